#ifndef MATCHGAN_NETS_HPP_
#define MATCHGAN_NETS_HPP_

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "matchgan/ops.hpp"
#include "matchgan/rng.hpp"

namespace matchgan {

// Conv weight init: N(0, 0.02^2), biases zero, instance-norm affine at
// identity.
template <class T>
Tensor<T> gaussian_init(Shape shape, Rng& rng, double std = 0.02) {
  Tensor<T> t(std::move(shape));
  for (auto& x : t.v) x = static_cast<T>(rng.normal() * std);
  return t;
}

template <class T>
struct Conv2dLayer {
  Param<T> w, b;
  bool has_bias = false;
  int64_t stride = 1, pad = 0;

  Conv2dLayer() = default;
  Conv2dLayer(const std::string& name, int64_t ci, int64_t co, int64_t k,
              int64_t stride_, int64_t pad_, bool bias, Rng& rng)
      : w(name + ".w", gaussian_init<T>({co, ci, k, k}, rng)),
        b(name + ".b", Tensor<T>({co})),
        has_bias(bias),
        stride(stride_),
        pad(pad_) {}

  VarId forward(Graph<T>& g, VarId x) {
    return ops::conv2d(g, x, g.param(w),
                       has_bias ? g.param(b) : ops::kNoVar, stride, pad);
  }
  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&w);
    if (has_bias) out.push_back(&b);
  }
  int64_t param_count() const {
    return w.numel() + (has_bias ? b.numel() : 0);
  }
};

template <class T>
struct ConvT2dLayer {
  Param<T> w, b;  // w layout [ci, co, k, k]
  bool has_bias = false;
  int64_t stride = 1, pad = 0, outpad = 0;

  ConvT2dLayer() = default;
  ConvT2dLayer(const std::string& name, int64_t ci, int64_t co, int64_t k,
               int64_t stride_, int64_t pad_, int64_t outpad_, bool bias,
               Rng& rng)
      : w(name + ".w", gaussian_init<T>({ci, co, k, k}, rng)),
        b(name + ".b", Tensor<T>({co})),
        has_bias(bias),
        stride(stride_),
        pad(pad_),
        outpad(outpad_) {}

  VarId forward(Graph<T>& g, VarId x) {
    return ops::convt2d(g, x, g.param(w),
                        has_bias ? g.param(b) : ops::kNoVar, stride, pad,
                        outpad);
  }
  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&w);
    if (has_bias) out.push_back(&b);
  }
  int64_t param_count() const {
    return w.numel() + (has_bias ? b.numel() : 0);
  }
};

template <class T>
struct InstanceNorm2d {
  Param<T> gamma, beta;

  InstanceNorm2d() = default;
  InstanceNorm2d(const std::string& name, int64_t c)
      : gamma(name + ".gamma", Tensor<T>({c}, T(1))),
        beta(name + ".beta", Tensor<T>({c})) {}

  VarId forward(Graph<T>& g, VarId x) {
    return ops::instance_norm(g, x, g.param(gamma), g.param(beta));
  }
  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
  int64_t param_count() const { return gamma.numel() + beta.numel(); }
};

/// Builder arguments, recorded in checkpoints so loading reconstructs
/// identical shapes.
struct GeneratorConfig {
  int64_t image_size = 128;
  int64_t n_attr = 5;
  int64_t base_width = 64;
  uint64_t init_seed = 0;
};

/// Encoder-bottleneck-decoder translator. Three stride-2 downsampling convs
/// (7x7 then 4x4, 4x4), six residual blocks, three mirrored stride-2
/// transposed convs, tanh output. The target label is replicated spatially
/// and concatenated to the input channels.
template <class T>
class Generator {
 public:
  explicit Generator(const GeneratorConfig& cfg) : cfg_(cfg) {
    require(cfg.image_size >= 8 && cfg.image_size % 8 == 0,
            ErrorKind::InvalidSize,
            "generator: image_size must be divisible by 8");
    Rng root(cfg.init_seed);
    const int64_t w = cfg.base_width;
    auto mk_rng = [&](const std::string& n) { return root.stream("g." + n); };
    Rng r;
    r = mk_rng("down0");
    down_.emplace_back("g.down0", 3 + cfg.n_attr, w, 7, 2, 3, false, r);
    r = mk_rng("down1");
    down_.emplace_back("g.down1", w, 2 * w, 4, 2, 1, false, r);
    r = mk_rng("down2");
    down_.emplace_back("g.down2", 2 * w, 4 * w, 4, 2, 1, false, r);
    for (int i = 0; i < 3; ++i)
      down_norm_.emplace_back("g.down" + std::to_string(i) + ".in",
                              down_[i].w.value.shape[0]);
    for (int i = 0; i < 6; ++i) {
      const std::string nm = "g.res" + std::to_string(i);
      r = mk_rng("res" + std::to_string(i) + "a");
      res_a_.emplace_back(nm + ".a", 4 * w, 4 * w, 3, 1, 1, false, r);
      r = mk_rng("res" + std::to_string(i) + "b");
      res_b_.emplace_back(nm + ".b", 4 * w, 4 * w, 3, 1, 1, false, r);
      res_na_.emplace_back(nm + ".a.in", 4 * w);
      res_nb_.emplace_back(nm + ".b.in", 4 * w);
    }
    r = mk_rng("up0");
    up_.emplace_back("g.up0", 4 * w, 2 * w, 4, 2, 1, 0, false, r);
    r = mk_rng("up1");
    up_.emplace_back("g.up1", 2 * w, w, 4, 2, 1, 0, false, r);
    r = mk_rng("up2");
    up_.emplace_back("g.up2", w, 3, 7, 2, 3, 1, false, r);
    for (int i = 0; i < 2; ++i)
      up_norm_.emplace_back("g.up" + std::to_string(i) + ".in",
                            up_[i].w.value.shape[1]);
  }

  /// labels: [B, n_attr] in {0,1}; x: [B,3,H,W] in [-1,1].
  VarId forward(Graph<T>& g, VarId x, const Tensor<T>& labels) {
    const Shape in_shape = g.val(x).shape;
    require(in_shape.size() == 4 && in_shape[1] == 3 &&
                in_shape[2] == cfg_.image_size &&
                in_shape[3] == cfg_.image_size,
            ErrorKind::ShapeMismatch, "generator: bad input shape");
    require(labels.shape[0] == in_shape[0] && labels.shape[1] == cfg_.n_attr,
            ErrorKind::ShapeMismatch, "generator: bad label shape");
    VarId lm = g.leaf(make_label_map(labels, in_shape[2], in_shape[3]));
    VarId h = ops::concat_ch(g, x, lm);
    for (size_t i = 0; i < down_.size(); ++i) {
      h = down_[i].forward(g, h);
      h = down_norm_[i].forward(g, h);
      h = ops::relu(g, h);
    }
    for (size_t i = 0; i < res_a_.size(); ++i) {
      VarId t = res_a_[i].forward(g, h);
      t = res_na_[i].forward(g, t);
      t = ops::relu(g, t);
      t = res_b_[i].forward(g, t);
      t = res_nb_[i].forward(g, t);
      h = ops::add(g, h, t);
    }
    for (size_t i = 0; i + 1 < up_.size(); ++i) {
      h = up_[i].forward(g, h);
      h = up_norm_[i].forward(g, h);
      h = ops::relu(g, h);
    }
    h = up_.back().forward(g, h);
    return ops::tanh_(g, h);
  }

  /// Inference without tape.
  Tensor<T> infer(const Tensor<T>& x, const Tensor<T>& labels) {
    Graph<T> g;
    g.grad_enabled = false;
    return g.val(forward(g, g.leaf(x), labels));
  }

  static Tensor<T> make_label_map(const Tensor<T>& labels, int64_t H,
                                  int64_t W) {
    const int64_t B = labels.shape[0], A = labels.shape[1];
    Tensor<T> m({B, A, H, W});
    for (int64_t b = 0; b < B; ++b)
      for (int64_t a = 0; a < A; ++a) {
        T* dst = m.data() + (b * A + a) * H * W;
        const T v = labels[b * A + a];
        for (int64_t i = 0; i < H * W; ++i) dst[i] = v;
      }
    return m;
  }

  std::vector<Param<T>*> parameters() {
    std::vector<Param<T>*> out;
    for (size_t i = 0; i < down_.size(); ++i) {
      down_[i].collect(out);
      down_norm_[i].collect(out);
    }
    for (size_t i = 0; i < res_a_.size(); ++i) {
      res_a_[i].collect(out);
      res_na_[i].collect(out);
      res_b_[i].collect(out);
      res_nb_[i].collect(out);
    }
    for (size_t i = 0; i < up_.size(); ++i) {
      up_[i].collect(out);
      if (i < up_norm_.size()) up_norm_[i].collect(out);
    }
    return out;
  }

  int64_t param_count() {
    int64_t n = 0;
    for (auto* p : parameters()) n += p->numel();
    return n;
  }
  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }
  const GeneratorConfig& config() const { return cfg_; }

 private:
  GeneratorConfig cfg_;
  std::vector<Conv2dLayer<T>> down_, res_a_, res_b_;
  std::vector<InstanceNorm2d<T>> down_norm_, res_na_, res_nb_, up_norm_;
  std::vector<ConvT2dLayer<T>> up_;
};

struct DiscriminatorConfig {
  int64_t image_size = 128;
  int64_t n_attr = 5;
  int64_t base_width = 64;
  int64_t depth = 0;          // 0 = log2(image_size) - 1
  int64_t max_width = 2048;   // cap on trunk widths for desk-scale builds
  uint64_t init_seed = 0;
};

inline int64_t discriminator_depth(const DiscriminatorConfig& cfg) {
  if (cfg.depth > 0) return cfg.depth;
  int64_t d = 0, s = cfg.image_size;
  while (s > 2) {
    s /= 2;
    ++d;
  }
  return d;  // log2(image_size) - 1
}

/// Scores a batch for the adversarial objective and exposes the input
/// gradient of that score as graph nodes, which is what the gradient penalty
/// differentiates.
template <class T>
class Critic {
 public:
  virtual ~Critic() = default;
  virtual VarId adv_input_grad(Graph<T>& g, const Tensor<T>& xhat) = 0;
  virtual VarId adv_score_only(Graph<T>& g, VarId x) = 0;
};

template <class T>
struct DiscriminatorOut {
  VarId emb;  // [B, C_emb, s, s]
  VarId adv;  // [B]
  VarId cls;  // [B, n_attr]
};

/// PatchGAN-style trunk: stride-2 4x4 convs with leaky ReLU (slope 0.01), no
/// normalization, widths doubling up to max_width. Three heads share the
/// trunk embedding.
template <class T>
class Discriminator : public Critic<T> {
 public:
  explicit Discriminator(const DiscriminatorConfig& cfg) : cfg_(cfg) {
    depth_ = discriminator_depth(cfg);
    require(depth_ >= 1, ErrorKind::InvalidSize, "discriminator: depth");
    require(cfg.image_size % (int64_t(1) << depth_) == 0,
            ErrorKind::InvalidSize,
            "discriminator: image_size not divisible by 2^depth");
    emb_spatial_ = cfg.image_size >> depth_;
    require(emb_spatial_ >= 1, ErrorKind::InvalidSize,
            "discriminator: embedding spatial size");
    Rng root(cfg.init_seed);
    int64_t ci = 3;
    for (int64_t i = 0; i < depth_; ++i) {
      const int64_t co = std::min(cfg.base_width << i, cfg.max_width);
      Rng r = root.stream("d.conv" + std::to_string(i));
      trunk_.emplace_back("d.conv" + std::to_string(i), ci, co, 4, 2, 1,
                          true, r);
      ci = co;
    }
    emb_channels_ = ci;
    Rng r = root.stream("d.adv");
    adv_ = Conv2dLayer<T>("d.adv", emb_channels_, 1, 3, 1, 1, false, r);
    r = root.stream("d.cls");
    cls_ = Conv2dLayer<T>("d.cls", emb_channels_, cfg.n_attr, emb_spatial_,
                          1, 0, false, r);
  }

  DiscriminatorOut<T> forward(Graph<T>& g, VarId x) {
    // copy shape facts up front; node references go stale as ops append
    const Shape in_shape = g.val(x).shape;
    require(in_shape.size() == 4 && in_shape[2] == cfg_.image_size &&
                in_shape[3] == cfg_.image_size,
            ErrorKind::ShapeMismatch, "discriminator: bad input shape");
    const int64_t B = in_shape[0];
    VarId h = x;
    for (auto& c : trunk_) {
      h = c.forward(g, h);
      h = ops::leaky_relu(g, h, T(0.01));
    }
    DiscriminatorOut<T> out;
    out.emb = h;
    VarId a = adv_.forward(g, h);           // [B,1,s,s]
    out.adv = ops::mean_per_sample(g, a);   // [B]
    VarId c = cls_.forward(g, h);           // [B,n_attr,1,1]
    out.cls = ops::reshape(g, c, Shape{B, cfg_.n_attr});
    return out;
  }

  VarId adv_score_only(Graph<T>& g, VarId x) override {
    return forward(g, x).adv;
  }

  /// Builds grad_x D_adv(x) as graph nodes: the trunk runs once without tape
  /// to collect leaky-relu masks, then the backward chain is spelled out with
  /// conv2d_input_grad so it stays differentiable w.r.t. the weights.
  VarId adv_input_grad(Graph<T>& g, const Tensor<T>& xhat) override {
    const int64_t B = xhat.shape[0];
    std::vector<Tensor<T>> masks;
    Tensor<T> cur = xhat;
    std::vector<Shape> in_shapes;
    for (auto& c : trunk_) {
      in_shapes.push_back(cur.shape);
      Tensor<T> y;
      kernels::conv2d_forward(cur, c.w.value, c.b.value.data(), c.stride,
                              c.pad, y);
      Tensor<T> mask(y.shape);
      for (int64_t i = 0; i < y.numel(); ++i)
        mask[i] = y[i] > T(0) ? T(1) : T(0.01);
      for (int64_t i = 0; i < y.numel(); ++i)
        y[i] = y[i] > T(0) ? y[i] : T(0.01) * y[i];
      masks.push_back(std::move(mask));
      cur = std::move(y);
    }
    const int64_t s = emb_spatial_;
    VarId u = g.leaf(Tensor<T>::full({B, 1, s, s},
                                     T(1) / static_cast<T>(s * s)));
    u = ops::conv2d_input_grad(g, u, g.param(adv_.w), 1, 1, s, s);
    for (int64_t i = depth_ - 1; i >= 0; --i) {
      u = ops::mul_const(g, u, std::move(masks[i]));
      u = ops::conv2d_input_grad(g, u, g.param(trunk_[i].w), 2, 1,
                                 in_shapes[i][2], in_shapes[i][3]);
    }
    return u;
  }

  std::vector<Param<T>*> parameters() {
    std::vector<Param<T>*> out;
    for (auto& c : trunk_) c.collect(out);
    adv_.collect(out);
    cls_.collect(out);
    return out;
  }
  int64_t param_count() {
    int64_t n = 0;
    for (auto* p : parameters()) n += p->numel();
    return n;
  }
  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  int64_t emb_channels() const { return emb_channels_; }
  int64_t emb_spatial() const { return emb_spatial_; }
  int64_t depth() const { return depth_; }
  const DiscriminatorConfig& config() const { return cfg_; }

 private:
  DiscriminatorConfig cfg_;
  int64_t depth_ = 0, emb_channels_ = 0, emb_spatial_ = 0;
  std::vector<Conv2dLayer<T>> trunk_;
  Conv2dLayer<T> adv_, cls_;
};

/// Pair classifier head: one convolution over channel-concatenated embedding
/// pairs, softmax over {matched, mismatched}. Entry 0 is P(matched); the
/// concatenation order is (first, second), no symmetry is imposed.
template <class T>
class MatchHead {
 public:
  MatchHead() = default;
  MatchHead(int64_t emb_channels, int64_t emb_spatial, uint64_t init_seed) {
    require(emb_channels > 0, ErrorKind::InvalidArgument,
            "match head: emb_channels");
    Rng r = Rng(init_seed).stream("d.mch");
    conv_ = Conv2dLayer<T>("d.mch", 2 * emb_channels, 2, emb_spatial, 1, 0,
                           true, r);
  }

  /// emb_a, emb_b: [N, C, s, s] -> logits [N,2,1,1]
  VarId logits(Graph<T>& g, VarId emb_a, VarId emb_b) {
    check_same_shape(g.val(emb_a), g.val(emb_b), "match head");
    VarId cat = ops::concat_ch(g, emb_a, emb_b);
    return conv_.forward(g, cat);
  }

  /// P(matched) per pair -> [N]
  VarId prob(Graph<T>& g, VarId emb_a, VarId emb_b) {
    return ops::softmax2_p0(g, logits(g, emb_a, emb_b));
  }

  std::vector<Param<T>*> parameters() {
    std::vector<Param<T>*> out;
    conv_.collect(out);
    return out;
  }
  int64_t param_count() { return conv_.param_count(); }
  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

 private:
  Conv2dLayer<T> conv_;
};

template <class T>
Generator<T> build_generator(int64_t image_size, int64_t n_attr,
                             int64_t base_width, uint64_t seed = 0) {
  return Generator<T>(GeneratorConfig{image_size, n_attr, base_width, seed});
}

template <class T>
Discriminator<T> build_discriminator(int64_t image_size, int64_t n_attr,
                                     int64_t base_width, uint64_t seed = 0,
                                     int64_t depth = 0,
                                     int64_t max_width = 2048) {
  return Discriminator<T>(DiscriminatorConfig{image_size, n_attr, base_width,
                                              depth, max_width, seed});
}

template <class T>
MatchHead<T> build_match_head(int64_t emb_channels,
                              std::pair<int64_t, int64_t> emb_spatial,
                              uint64_t seed = 0) {
  require(emb_spatial.first == emb_spatial.second, ErrorKind::InvalidSize,
          "match head: non-square embeddings unsupported");
  return MatchHead<T>(emb_channels, emb_spatial.first, seed);
}

}  // namespace matchgan

#endif  // MATCHGAN_NETS_HPP_
