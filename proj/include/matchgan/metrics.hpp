#ifndef MATCHGAN_METRICS_HPP_
#define MATCHGAN_METRICS_HPP_

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "matchgan/datagen.hpp"
#include "matchgan/losses.hpp"
#include "matchgan/optim.hpp"
#include "matchgan/pretext.hpp"

namespace matchgan {

// ---------------------------------------------------------------------------
// Gaussian sufficient statistics + Frechet distance
// ---------------------------------------------------------------------------

/// Mean/covariance of an embedding set. Accumulation is mergeable so shards
/// combine deterministically; covariance uses the n-1 normalisation.
struct GaussianStats {
  int64_t dim = 0;
  int64_t n = 0;
  std::vector<double> mean;  // d
  std::vector<double> cov;   // d*d row-major
};

class StatsAccumulator {
 public:
  explicit StatsAccumulator(int64_t dim) : dim_(dim), sum_(dim, 0.0),
                                           outer_(dim * dim, 0.0) {}

  /// features: [N, d]
  void add(const Tensor<double>& features) {
    require(features.ndim() == 2 && features.shape[1] == dim_,
            ErrorKind::DimensionMismatch, "stats: feature dim mismatch");
    const int64_t N = features.shape[0];
    for (int64_t i = 0; i < N; ++i) {
      const double* x = features.data() + i * dim_;
      for (int64_t a = 0; a < dim_; ++a) {
        sum_[a] += x[a];
        for (int64_t b = a; b < dim_; ++b) outer_[a * dim_ + b] += x[a] * x[b];
      }
    }
    n_ += N;
  }

  void merge(const StatsAccumulator& o) {
    require(o.dim_ == dim_, ErrorKind::DimensionMismatch, "stats merge");
    for (int64_t a = 0; a < dim_; ++a) sum_[a] += o.sum_[a];
    for (int64_t i = 0; i < dim_ * dim_; ++i) outer_[i] += o.outer_[i];
    n_ += o.n_;
  }

  GaussianStats finalize() const {
    require(n_ >= 2, ErrorKind::InvalidArgument,
            "stats: need at least 2 samples");
    GaussianStats s;
    s.dim = dim_;
    s.n = n_;
    s.mean.resize(dim_);
    for (int64_t a = 0; a < dim_; ++a) s.mean[a] = sum_[a] / double(n_);
    s.cov.assign(dim_ * dim_, 0.0);
    for (int64_t a = 0; a < dim_; ++a)
      for (int64_t b = a; b < dim_; ++b) {
        const double c =
            (outer_[a * dim_ + b] - double(n_) * s.mean[a] * s.mean[b]) /
            double(n_ - 1);
        s.cov[a * dim_ + b] = c;
        s.cov[b * dim_ + a] = c;
      }
    return s;
  }

  int64_t count() const { return n_; }

 private:
  int64_t dim_;
  int64_t n_ = 0;
  std::vector<double> sum_;
  std::vector<double> outer_;
};

namespace detail {

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major d*d).
/// On return `a` holds garbage, eigvals/eigvecs are filled; eigvecs column j
/// is the j-th eigenvector: V[i*d+j].
inline void jacobi_eigen(std::vector<double> a, int64_t d,
                         std::vector<double>& eigvals,
                         std::vector<double>& V) {
  V.assign(d * d, 0.0);
  for (int64_t i = 0; i < d; ++i) V[i * d + i] = 1.0;
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0;
    for (int64_t p = 0; p < d; ++p)
      for (int64_t q = p + 1; q < d; ++q) off += a[p * d + q] * a[p * d + q];
    if (off < 1e-24) break;
    for (int64_t p = 0; p < d; ++p)
      for (int64_t q = p + 1; q < d; ++q) {
        const double apq = a[p * d + q];
        if (std::abs(apq) < 1e-300) continue;
        const double app = a[p * d + p], aqq = a[q * d + q];
        const double theta = (aqq - app) / (2 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int64_t i = 0; i < d; ++i) {
          const double aip = a[i * d + p], aiq = a[i * d + q];
          a[i * d + p] = c * aip - s * aiq;
          a[i * d + q] = s * aip + c * aiq;
        }
        for (int64_t i = 0; i < d; ++i) {
          const double api = a[p * d + i], aqi = a[q * d + i];
          a[p * d + i] = c * api - s * aqi;
          a[q * d + i] = s * api + c * aqi;
        }
        for (int64_t i = 0; i < d; ++i) {
          const double vip = V[i * d + p], viq = V[i * d + q];
          V[i * d + p] = c * vip - s * viq;
          V[i * d + q] = s * vip + c * viq;
        }
      }
  }
  eigvals.resize(d);
  for (int64_t i = 0; i < d; ++i) eigvals[i] = a[i * d + i];
}

inline std::vector<double> matmul_sq(const std::vector<double>& A,
                                     const std::vector<double>& B,
                                     int64_t d) {
  std::vector<double> C(d * d, 0.0);
  for (int64_t i = 0; i < d; ++i)
    for (int64_t k = 0; k < d; ++k) {
      const double aik = A[i * d + k];
      for (int64_t j = 0; j < d; ++j) C[i * d + j] += aik * B[k * d + j];
    }
  return C;
}

/// PSD matrix square root via eigendecomposition; eigenvalues below
/// -neg_tol raise NonPSD, small negatives are clipped to 0.
inline std::vector<double> sqrtm_psd(const std::vector<double>& m, int64_t d,
                                     double neg_tol) {
  // symmetrize before decomposing
  std::vector<double> s(d * d);
  for (int64_t i = 0; i < d; ++i)
    for (int64_t j = 0; j < d; ++j)
      s[i * d + j] = 0.5 * (m[i * d + j] + m[j * d + i]);
  std::vector<double> w, V;
  jacobi_eigen(s, d, w, V);
  double scale = 1.0;
  for (int64_t i = 0; i < d; ++i) scale = std::max(scale, std::abs(w[i]));
  for (int64_t i = 0; i < d; ++i) {
    require(w[i] > -neg_tol * scale, ErrorKind::NonPSD,
            "matrix square root: eigenvalue " + std::to_string(w[i]) +
                " below tolerance");
    w[i] = w[i] > 0 ? std::sqrt(w[i]) : 0.0;
  }
  std::vector<double> out(d * d, 0.0);
  for (int64_t i = 0; i < d; ++i)
    for (int64_t j = 0; j < d; ++j) {
      double acc = 0;
      for (int64_t k = 0; k < d; ++k)
        acc += V[i * d + k] * w[k] * V[j * d + k];
      out[i * d + j] = acc;
    }
  return out;
}

}  // namespace detail

/// |mu1-mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2)); the cross term is computed
/// as Tr sqrt(sqrt(S1) S2 sqrt(S1)), the symmetrized product.
inline double frechet_distance(const GaussianStats& a, const GaussianStats& b,
                               double neg_tol = 1e-6) {
  require(a.dim == b.dim, ErrorKind::DimensionMismatch,
          "frechet_distance: dimension mismatch");
  const int64_t d = a.dim;
  double mean_term = 0;
  for (int64_t i = 0; i < d; ++i) {
    const double dm = a.mean[i] - b.mean[i];
    mean_term += dm * dm;
  }
  auto sqrt_a = detail::sqrtm_psd(a.cov, d, neg_tol);
  auto inner = detail::matmul_sq(detail::matmul_sq(sqrt_a, b.cov, d), sqrt_a, d);
  // eigenvalues of the symmetrized inner product give Tr sqrt
  std::vector<double> sym(d * d);
  for (int64_t i = 0; i < d; ++i)
    for (int64_t j = 0; j < d; ++j)
      sym[i * d + j] = 0.5 * (inner[i * d + j] + inner[j * d + i]);
  std::vector<double> w, V;
  detail::jacobi_eigen(sym, d, w, V);
  double tr_sqrt = 0, scale = 1.0;
  for (int64_t i = 0; i < d; ++i) scale = std::max(scale, std::abs(w[i]));
  for (int64_t i = 0; i < d; ++i) {
    require(w[i] > -neg_tol * scale, ErrorKind::NonPSD,
            "frechet_distance: product eigenvalue below tolerance");
    tr_sqrt += w[i] > 0 ? std::sqrt(w[i]) : 0.0;
  }
  double tr = 0;
  for (int64_t i = 0; i < d; ++i)
    tr += a.cov[i * d + i] + b.cov[i * d + i];
  return mean_term + tr - 2 * tr_sqrt;
}

// ---------------------------------------------------------------------------
// inception score
// ---------------------------------------------------------------------------

/// Per fold: exp(mean_x KL(p(y|x) || p_fold)). Returns (mean, population std)
/// over `folds` near-equal contiguous folds.
inline std::pair<double, double> inception_score(
    const Tensor<double>& probs, int64_t folds = 10) {
  const int64_t N = probs.shape[0], C = probs.shape[1];
  require(folds >= 1 && N >= folds, ErrorKind::InvalidArgument,
          "inception_score: need at least `folds` rows");
  for (int64_t i = 0; i < N; ++i) {
    double s = 0;
    for (int64_t c = 0; c < C; ++c) s += probs[i * C + c];
    require(std::abs(s - 1.0) < 1e-6, ErrorKind::InvalidArgument,
            "inception_score: row " + std::to_string(i) +
                " does not sum to 1");
  }
  std::vector<double> scores;
  const int64_t base = N / folds, rem = N % folds;
  int64_t start = 0;
  for (int64_t f = 0; f < folds; ++f) {
    const int64_t len = base + (f < rem ? 1 : 0);
    std::vector<double> marginal(C, 0.0);
    for (int64_t i = start; i < start + len; ++i)
      for (int64_t c = 0; c < C; ++c) marginal[c] += probs[i * C + c];
    for (auto& m : marginal) m /= double(len);
    double mean_kl = 0;
    for (int64_t i = start; i < start + len; ++i) {
      double kl = 0;
      for (int64_t c = 0; c < C; ++c) {
        const double p = probs[i * C + c];
        if (p > 1e-12)
          kl += p * (std::log(p) - std::log(std::max(marginal[c], 1e-12)));
      }
      mean_kl += kl;
    }
    scores.push_back(std::exp(mean_kl / double(len)));
    start += len;
  }
  double mean = 0;
  for (double s : scores) mean += s;
  mean /= double(folds);
  double var = 0;
  for (double s : scores) var += (s - mean) * (s - mean);
  return {mean, std::sqrt(var / double(folds))};
}

// ---------------------------------------------------------------------------
// feature extractor
// ---------------------------------------------------------------------------

/// Embedding + class-posterior provider for the metrics. The desk-scale
/// default is a small CNN trained on synthetic data; anything exposing this
/// interface (e.g. an Inception-v3 adapter) drops in.
template <class T>
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual int64_t feature_dim() const = 0;
  virtual int64_t n_classes() const = 0;
  virtual Tensor<double> embed(const Tensor<T>& batch) = 0;
  virtual Tensor<double> classify(const Tensor<T>& batch) = 0;
};

/// 4-layer CNN over [-1,1] images: three stride-2 convs, global average
/// pooling into a 64-d embedding, linear head over the K label classes.
template <class T>
class SmallCnn {
 public:
  SmallCnn() = default;
  SmallCnn(int64_t n_classes, uint64_t seed) : n_classes_(n_classes) {
    Rng root(seed);
    Rng r = root.stream("cnn.c1");
    c1_ = Conv2dLayer<T>("cnn.c1", 3, 16, 3, 2, 1, true, r);
    r = root.stream("cnn.c2");
    c2_ = Conv2dLayer<T>("cnn.c2", 16, 32, 3, 2, 1, true, r);
    r = root.stream("cnn.c3");
    c3_ = Conv2dLayer<T>("cnn.c3", 32, 64, 3, 2, 1, true, r);
    r = root.stream("cnn.fc");
    fc_ = Conv2dLayer<T>("cnn.fc", 64, n_classes, 1, 1, 0, true, r);
  }

  struct Out {
    VarId feat;    // [B,64]
    VarId logits;  // [B,K]
  };

  Out forward(Graph<T>& g, VarId x) {
    const int64_t B = g.val(x).shape[0];
    VarId h = ops::leaky_relu(g, c1_.forward(g, x), T(0.1));
    h = ops::leaky_relu(g, c2_.forward(g, h), T(0.1));
    h = ops::leaky_relu(g, c3_.forward(g, h), T(0.1));
    VarId pooled = ops::mean_hw(g, h);  // [B,64,1,1]
    Out out;
    out.logits = ops::reshape(g, fc_.forward(g, pooled),
                              Shape{B, n_classes_});
    out.feat = ops::reshape(g, pooled, Shape{B, 64});
    return out;
  }

  std::vector<Param<T>*> parameters() {
    std::vector<Param<T>*> ps;
    c1_.collect(ps);
    c2_.collect(ps);
    c3_.collect(ps);
    fc_.collect(ps);
    return ps;
  }
  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }
  int64_t n_classes() const { return n_classes_; }

 private:
  int64_t n_classes_ = 0;
  Conv2dLayer<T> c1_, c2_, c3_, fc_;
};

/// Supervised training spec for the extractor and the GAN-train/GAN-test
/// classifiers (fixed for reproducibility).
struct ClassifierSpec {
  int64_t epochs = 20;
  int64_t batch_size = 32;
  double lr = 1e-3;
  uint64_t seed = 0;
};

/// Trains a SmallCnn with softmax cross-entropy over class indices.
/// `load` maps a ref to an image tensor.
template <class T>
SmallCnn<T> train_small_cnn(
    const std::function<Tensor<T>(const std::vector<ImageRefId>&)>& load,
    const std::vector<ImageRefId>& refs, const std::vector<int>& class_ids,
    int64_t n_classes, const ClassifierSpec& spec) {
  require(refs.size() == class_ids.size() && !refs.empty(),
          ErrorKind::InvalidArgument, "train_small_cnn: bad training set");
  SmallCnn<T> net(n_classes, spec.seed);
  Adam<T> opt(net.parameters(), T(0.9), T(0.999));
  Rng rng = Rng(spec.seed).stream("cnn.train");
  std::vector<size_t> order(refs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int64_t epoch = 0; epoch < spec.epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t start = 0; start < order.size();
         start += size_t(spec.batch_size)) {
      const size_t end =
          std::min(order.size(), start + size_t(spec.batch_size));
      std::vector<ImageRefId> batch_refs;
      std::vector<int64_t> batch_cls;
      for (size_t i = start; i < end; ++i) {
        batch_refs.push_back(refs[order[i]]);
        batch_cls.push_back(class_ids[order[i]]);
      }
      Graph<T> g;
      VarId x = g.leaf(load(batch_refs));
      auto out = net.forward(g, x);
      VarId loss = ops::softmax_ce_mean(g, out.logits, batch_cls);
      net.zero_grad();
      g.backward(loss);
      opt.step(static_cast<T>(spec.lr));
    }
  }
  return net;
}

template <class T>
class SmallCnnExtractor : public FeatureExtractor<T> {
 public:
  SmallCnnExtractor(SmallCnn<T> net, int64_t n_classes)
      : net_(std::move(net)), n_classes_(n_classes) {}

  int64_t feature_dim() const override { return 64; }
  int64_t n_classes() const override { return n_classes_; }

  Tensor<double> embed(const Tensor<T>& batch) override {
    Graph<T> g;
    g.grad_enabled = false;
    auto out = net_.forward(g, g.leaf(batch));
    return g.val(out.feat).template cast<double>();
  }

  Tensor<double> classify(const Tensor<T>& batch) override {
    Graph<T> g;
    g.grad_enabled = false;
    auto out = net_.forward(g, g.leaf(batch));
    const Tensor<T>& z = g.val(out.logits);
    const int64_t B = z.shape[0], C = z.shape[1];
    Tensor<double> probs({B, C});
    for (int64_t b = 0; b < B; ++b) {
      double m = z[b * C];
      for (int64_t c = 1; c < C; ++c) m = std::max(m, double(z[b * C + c]));
      double sum = 0;
      for (int64_t c = 0; c < C; ++c) {
        probs[b * C + c] = std::exp(double(z[b * C + c]) - m);
        sum += probs[b * C + c];
      }
      for (int64_t c = 0; c < C; ++c) probs[b * C + c] /= sum;
    }
    return probs;
  }

  SmallCnn<T>& net() { return net_; }

 private:
  SmallCnn<T> net_;
  int64_t n_classes_;
};

// ---------------------------------------------------------------------------
// evaluation protocols
// ---------------------------------------------------------------------------

/// Image-to-image translator: (batch, target labels) -> batch. The trained
/// generator plugs in as a lambda; tests use the identity.
template <class T>
using Translator =
    std::function<Tensor<T>(const Tensor<T>&, const Tensor<T>&)>;

struct FidReport {
  double fid = 0;                  // pooled over all target domains
  std::vector<double> per_domain;  // one FID per target class
};

/// Translates every test image to each target class, pools the translations
/// as the fake distribution and the originals as the real one, and returns
/// the Frechet distance between extractor embeddings.
template <class T>
FidReport fid_protocol(const Translator<T>& translate,
                       const Dataset<T>& dataset,
                       const std::vector<ImageRefId>& test_refs,
                       const LabelClasses& classes,
                       FeatureExtractor<T>& extractor,
                       int64_t eval_batch = 64) {
  require(!test_refs.empty(), ErrorKind::EmptyPool, "fid: empty test set");
  const int64_t d = extractor.feature_dim();
  StatsAccumulator real_acc(d), fake_acc(d);
  std::vector<StatsAccumulator> dom_acc;
  for (int c = 0; c < classes.K(); ++c) dom_acc.emplace_back(d);

  for (size_t start = 0; start < test_refs.size();
       start += size_t(eval_batch)) {
    const size_t end =
        std::min(test_refs.size(), start + size_t(eval_batch));
    std::vector<ImageRefId> chunk(test_refs.begin() + int64_t(start),
                                  test_refs.begin() + int64_t(end));
    Tensor<T> x = dataset.batch(chunk, nullptr);
    real_acc.add(extractor.embed(x));
    for (int c = 0; c < classes.K(); ++c) {
      std::vector<int> cls(chunk.size(), c);
      Tensor<T> y = labels_to_tensor<T>(classes, cls);
      Tensor<T> fake = translate(x, y);
      Tensor<double> emb = extractor.embed(fake);
      fake_acc.add(emb);
      dom_acc[size_t(c)].add(emb);
    }
  }
  GaussianStats real_stats = real_acc.finalize();
  FidReport report;
  report.fid = frechet_distance(real_stats, fake_acc.finalize());
  for (int c = 0; c < classes.K(); ++c)
    report.per_domain.push_back(
        frechet_distance(real_stats, dom_acc[size_t(c)].finalize()));
  return report;
}

namespace detail {

/// Mean per-attribute accuracy for binary schemas (predicted class mapped to
/// its bit vector), top-1 for one-hot.
inline double accuracy_from_predictions(const std::vector<int>& predicted,
                                        const std::vector<int>& truth,
                                        const LabelClasses& classes,
                                        LabelEncoding enc) {
  require(predicted.size() == truth.size() && !predicted.empty(),
          ErrorKind::InvalidArgument, "accuracy: size mismatch");
  if (enc == LabelEncoding::kOneHot) {
    int64_t hit = 0;
    for (size_t i = 0; i < predicted.size(); ++i)
      if (predicted[i] == truth[i]) ++hit;
    return double(hit) / double(predicted.size());
  }
  int64_t hit = 0, total = 0;
  for (size_t i = 0; i < predicted.size(); ++i) {
    const auto& pb = classes.classes[size_t(predicted[i])].bits;
    const auto& tb = classes.classes[size_t(truth[i])].bits;
    for (size_t a = 0; a < pb.size(); ++a) {
      ++total;
      if (pb[a] == tb[a]) ++hit;
    }
  }
  return double(hit) / double(total);
}

template <class T>
std::vector<int> predict_classes(FeatureExtractor<T>& extractor,
                                 const std::function<Tensor<T>(size_t, size_t)>& load_range,
                                 size_t n, int64_t batch) {
  std::vector<int> out;
  for (size_t start = 0; start < n; start += size_t(batch)) {
    const size_t end = std::min(n, start + size_t(batch));
    Tensor<double> probs = extractor.classify(load_range(start, end));
    const int64_t C = probs.shape[1];
    for (int64_t i = 0; i < probs.shape[0]; ++i) {
      int best = 0;
      for (int64_t c = 1; c < C; ++c)
        if (probs[i * C + c] > probs[i * C + best]) best = int(c);
      out.push_back(best);
    }
  }
  return out;
}

}  // namespace detail

/// How translation targets are assigned during the GAN-train/GAN-test
/// protocols. kUniform is the measurement protocol; kSourceLabels turns an
/// identity translator into an ordinary classifier train/test run, the
/// oracle cross-check.
enum class TargetPolicy { kUniform, kSourceLabels };

/// GAN-train: classifier trained on translated images (target labels as
/// ground truth), evaluated on real test data.
template <class T>
double gan_train(const Translator<T>& translate, const Dataset<T>& dataset,
                 const std::vector<ImageRefId>& train_refs,
                 const std::vector<ImageRefId>& test_refs,
                 const LabelClasses& classes, const ClassifierSpec& spec,
                 TargetPolicy policy = TargetPolicy::kUniform) {
  require(!train_refs.empty() && !test_refs.empty(), ErrorKind::EmptyPool,
          "gan_train: empty data");
  Rng rng = Rng(spec.seed).stream("gan_train.targets");
  std::vector<int> target_cls;
  for (size_t i = 0; i < train_refs.size(); ++i)
    target_cls.push_back(
        policy == TargetPolicy::kUniform
            ? int(rng.uniform_int(uint64_t(classes.K())))
            : classes.index_of(dataset.label(train_refs[i])));

  // synthetic training set: translations labelled by their targets
  auto load_synth = [&](const std::vector<ImageRefId>& idxs) {
    std::vector<int> cls;
    for (auto i : idxs) cls.push_back(target_cls[size_t(i)]);
    std::vector<ImageRefId> actual;
    for (auto i : idxs) actual.push_back(train_refs[size_t(i)]);
    Tensor<T> x = dataset.batch(actual, nullptr);
    return translate(x, labels_to_tensor<T>(classes, cls));
  };
  std::vector<ImageRefId> pseudo_refs(train_refs.size());
  for (size_t i = 0; i < pseudo_refs.size(); ++i)
    pseudo_refs[i] = int64_t(i);
  SmallCnn<T> net = train_small_cnn<T>(load_synth, pseudo_refs, target_cls,
                                       classes.K(), spec);
  SmallCnnExtractor<T> clf(std::move(net), classes.K());

  auto load_test = [&](size_t a, size_t b) {
    std::vector<ImageRefId> chunk(test_refs.begin() + int64_t(a),
                                  test_refs.begin() + int64_t(b));
    return dataset.batch(chunk, nullptr);
  };
  auto predicted = detail::predict_classes<T>(clf, load_test,
                                              test_refs.size(), 64);
  std::vector<int> truth;
  for (auto r : test_refs) truth.push_back(classes.index_of(dataset.label(r)));
  return detail::accuracy_from_predictions(predicted, truth, classes,
                                           dataset.schema().encoding);
}

/// GAN-test: classifier trained on real labelled images, evaluated on
/// translated test images against their target labels.
template <class T>
double gan_test(const Translator<T>& translate, const Dataset<T>& dataset,
                const std::vector<ImageRefId>& train_refs,
                const std::vector<ImageRefId>& test_refs,
                const LabelClasses& classes, const ClassifierSpec& spec,
                TargetPolicy policy = TargetPolicy::kUniform) {
  require(!train_refs.empty() && !test_refs.empty(), ErrorKind::EmptyPool,
          "gan_test: empty data");
  std::vector<int> train_cls;
  for (auto r : train_refs)
    train_cls.push_back(classes.index_of(dataset.label(r)));
  auto load_real = [&](const std::vector<ImageRefId>& idxs) {
    return dataset.batch(idxs, nullptr);
  };
  SmallCnn<T> net =
      train_small_cnn<T>(load_real, train_refs, train_cls, classes.K(), spec);
  SmallCnnExtractor<T> clf(std::move(net), classes.K());

  Rng rng = Rng(spec.seed).stream("gan_test.targets");
  std::vector<int> target_cls;
  for (size_t i = 0; i < test_refs.size(); ++i)
    target_cls.push_back(
        policy == TargetPolicy::kUniform
            ? int(rng.uniform_int(uint64_t(classes.K())))
            : classes.index_of(dataset.label(test_refs[i])));
  auto load_fake = [&](size_t a, size_t b) {
    std::vector<ImageRefId> chunk(test_refs.begin() + int64_t(a),
                                  test_refs.begin() + int64_t(b));
    std::vector<int> cls(target_cls.begin() + int64_t(a),
                         target_cls.begin() + int64_t(b));
    Tensor<T> x = dataset.batch(chunk, nullptr);
    return translate(x, labels_to_tensor<T>(classes, cls));
  };
  auto predicted = detail::predict_classes<T>(clf, load_fake,
                                              test_refs.size(), 64);
  return detail::accuracy_from_predictions(predicted, target_cls, classes,
                                           dataset.schema().encoding);
}

/// Accuracy of the trained match head on balanced matched/mismatched pairs
/// drawn from held-out images (P(matched) > 0.5 counts as "matched").
template <class T>
double match_pair_accuracy(Discriminator<T>& D, MatchHead<T>& head,
                           const Dataset<T>& dataset,
                           const std::vector<ImageRefId>& refs,
                           const LabelClasses& classes, int64_t n_pairs,
                           Rng& rng, int64_t eval_batch = 32) {
  // group refs by class
  std::vector<std::vector<ImageRefId>> by_class(size_t(classes.K()));
  for (auto r : refs) {
    const int c = classes.index_of(dataset.label(r));
    if (c >= 0) by_class[size_t(c)].push_back(r);
  }
  std::vector<int> usable;
  for (int c = 0; c < classes.K(); ++c)
    if (by_class[size_t(c)].size() >= 2) usable.push_back(c);
  require(usable.size() >= 2, ErrorKind::EmptyPool,
          "match_pair_accuracy: need two populated classes");

  int64_t hits = 0, total = 0;
  for (int64_t start = 0; start < n_pairs; start += eval_batch) {
    const int64_t len = std::min(eval_batch, n_pairs - start);
    std::vector<ImageRefId> lhs, rhs;
    std::vector<int> want;  // 1 = matched
    for (int64_t i = 0; i < len; ++i) {
      const bool matched = (total + i) % 2 == 0;
      const int ca = usable[rng.uniform_int(usable.size())];
      const auto& ga = by_class[size_t(ca)];
      lhs.push_back(ga[rng.uniform_int(ga.size())]);
      if (matched) {
        ImageRefId other;
        do {
          other = ga[rng.uniform_int(ga.size())];
        } while (other == lhs.back() && ga.size() > 1);
        rhs.push_back(other);
      } else {
        int cb;
        do {
          cb = usable[rng.uniform_int(usable.size())];
        } while (cb == ca);
        const auto& gb = by_class[size_t(cb)];
        rhs.push_back(gb[rng.uniform_int(gb.size())]);
      }
      want.push_back(matched ? 1 : 0);
    }
    Graph<T> g;
    g.grad_enabled = false;
    VarId ea = D.forward(g, g.leaf(dataset.batch(lhs, nullptr))).emb;
    VarId eb = D.forward(g, g.leaf(dataset.batch(rhs, nullptr))).emb;
    VarId p = head.prob(g, ea, eb);
    for (int64_t i = 0; i < len; ++i) {
      const bool pred = g.val(p)[i] > T(0.5);
      if (pred == (want[size_t(i)] == 1)) ++hits;
    }
    total += len;
  }
  return double(hits) / double(total);
}

}  // namespace matchgan

#endif  // MATCHGAN_METRICS_HPP_
