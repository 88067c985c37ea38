#ifndef MATCHGAN_DATAGEN_HPP_
#define MATCHGAN_DATAGEN_HPP_

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "matchgan/imageio.hpp"
#include "matchgan/labelspace.hpp"
#include "matchgan/rng.hpp"
#include "matchgan/tensor.hpp"

namespace matchgan {

/// One attribute's rendering rule: a horizontal band and the colour channel
/// that carries the bit. Bands are disjoint so attributes stay independently
/// recoverable.
///
/// Decision rule (used by tests and the metrics oracle): attribute i of a
/// rendered image is 1 iff the mean of channel `channel` over rows
/// [row0,row1) exceeds 0.
struct AttributeRenderer {
  int64_t row0 = 0, row1 = 0;
  int channel = 0;
};

struct SyntheticSpec {
  int64_t image_size = 32;
  std::vector<AttributeRenderer> renderers;  // one per attribute
  double noise_amplitude = 0.1;

  /// Default layout: the top half of the image is split into n_attr bands,
  /// attribute i drives channel i%3 of band i; the bottom half holds the
  /// nuisance content (background plus a jittered bright disc).
  static SyntheticSpec make_default(int64_t image_size, int n_attr,
                                    double noise_amplitude = 0.1) {
    SyntheticSpec s;
    s.image_size = image_size;
    s.noise_amplitude = noise_amplitude;
    const int64_t top = image_size / 2;
    for (int i = 0; i < n_attr; ++i) {
      AttributeRenderer r;
      r.row0 = top * i / n_attr;
      r.row1 = top * (i + 1) / n_attr;
      r.channel = i % 3;
      s.renderers.push_back(r);
    }
    return s;
  }
};

/// Renders a label into a [3,S,S] tensor in [-1,1]. The base image is a
/// deterministic function of the label; nuisance variation (disc position,
/// pixel noise) comes from `rng` and is skipped entirely when
/// noise_amplitude == 0.
template <class T>
Tensor<T> render_synthetic(const LabelVector& label, const SyntheticSpec& spec,
                           Rng& rng) {
  require(label.size() == spec.renderers.size(), ErrorKind::InvalidArgument,
          "render_synthetic: label length != renderer count");
  const int64_t S = spec.image_size;
  Tensor<T> img({3, S, S}, T(-0.2));  // background

  for (size_t i = 0; i < spec.renderers.size(); ++i) {
    const auto& r = spec.renderers[i];
    const T on = label.bits[i] ? T(0.7) : T(-0.7);
    for (int64_t c = 0; c < 3; ++c) {
      const T v = (c == r.channel) ? on : T(-0.1);
      for (int64_t y = r.row0; y < r.row1; ++y)
        for (int64_t x = 0; x < S; ++x) img.at3(c, y, x) = v;
    }
  }

  if (spec.noise_amplitude > 0) {
    // jittered bright disc in the bottom half
    const int64_t half = S / 2;
    const int64_t rad = std::max<int64_t>(2, S / 8);
    const int64_t cy = half + rad +
                       static_cast<int64_t>(rng.uniform_int(
                           uint64_t(std::max<int64_t>(1, half - 2 * rad))));
    const int64_t cx = rad + static_cast<int64_t>(rng.uniform_int(
                                 uint64_t(std::max<int64_t>(1, S - 2 * rad))));
    for (int64_t y = half; y < S; ++y)
      for (int64_t x = 0; x < S; ++x)
        if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= rad * rad)
          for (int64_t c = 0; c < 3; ++c) img.at3(c, y, x) = T(0.9);

    const T amp = static_cast<T>(spec.noise_amplitude);
    for (auto& v : img.v) v += amp * static_cast<T>(rng.normal());
  }

  for (auto& v : img.v) v = std::clamp(v, T(-1), T(1));
  return img;
}

/// The documented decision rule for recovering attribute bits from a
/// rendered image (also exercised by the synthetic-recoverability test).
template <class T>
LabelVector decode_synthetic(const Tensor<T>& img, const SyntheticSpec& spec) {
  LabelVector out;
  const int64_t S = spec.image_size;
  for (const auto& r : spec.renderers) {
    double acc = 0;
    int64_t n = 0;
    for (int64_t y = r.row0; y < r.row1; ++y)
      for (int64_t x = 0; x < S; ++x) {
        acc += img.at3(r.channel, y, x);
        ++n;
      }
    out.bits.push_back(acc / std::max<int64_t>(1, n) > 0 ? 1 : 0);
  }
  return out;
}

/// Centre-crop to crop_size^2, bilinear-resize to out_size^2, rescale
/// [0,255] -> [-1,1]. Grayscale inputs are replicated to 3 channels.
template <class T>
Tensor<T> preprocess(const RawImage& raw, int64_t crop_size,
                     int64_t out_size) {
  require(crop_size <= std::min(raw.height, raw.width),
          ErrorKind::ImageTooSmall,
          "preprocess: crop " + std::to_string(crop_size) + " exceeds " +
              std::to_string(raw.width) + "x" + std::to_string(raw.height));
  const int64_t x0 = (raw.width - crop_size) / 2;
  const int64_t y0 = (raw.height - crop_size) / 2;
  Tensor<T> out({3, out_size, out_size});
  const double scale = static_cast<double>(crop_size) / out_size;
  for (int64_t oy = 0; oy < out_size; ++oy) {
    const double sy = (oy + 0.5) * scale - 0.5;
    const int64_t iy0 = std::clamp<int64_t>(
        static_cast<int64_t>(std::floor(sy)), 0, crop_size - 1);
    const int64_t iy1 = std::min(iy0 + 1, crop_size - 1);
    const double fy = std::clamp(sy - iy0, 0.0, 1.0);
    for (int64_t ox = 0; ox < out_size; ++ox) {
      const double sx = (ox + 0.5) * scale - 0.5;
      const int64_t ix0 = std::clamp<int64_t>(
          static_cast<int64_t>(std::floor(sx)), 0, crop_size - 1);
      const int64_t ix1 = std::min(ix0 + 1, crop_size - 1);
      const double fx = std::clamp(sx - ix0, 0.0, 1.0);
      for (int64_t c = 0; c < 3; ++c) {
        const int64_t rc = raw.channels == 1 ? 0 : c;
        auto px = [&](int64_t y, int64_t x) {
          return static_cast<double>(raw.at(y0 + y, x0 + x, rc));
        };
        const double v = (1 - fy) * ((1 - fx) * px(iy0, ix0) + fx * px(iy0, ix1)) +
                         fy * ((1 - fx) * px(iy1, ix0) + fx * px(iy1, ix1));
        out.at3(c, oy, ox) = static_cast<T>(v / 127.5 - 1.0);
      }
    }
  }
  return out;
}

template <class T>
void flip_horizontal(Tensor<T>& img) {
  const int64_t C = img.shape[0], H = img.shape[1], W = img.shape[2];
  for (int64_t c = 0; c < C; ++c)
    for (int64_t y = 0; y < H; ++y)
      for (int64_t x = 0; x < W / 2; ++x)
        std::swap(img.at3(c, y, x), img.at3(c, y, W - 1 - x));
}

/// [-1,1] CHW float tensor -> 8-bit HWC image.
template <class T>
RawImage tensor_to_raw(const Tensor<T>& img) {
  RawImage out;
  out.channels = img.shape[0];
  out.height = img.shape[1];
  out.width = img.shape[2];
  out.data.resize(static_cast<size_t>(out.width * out.height * out.channels));
  for (int64_t c = 0; c < out.channels; ++c)
    for (int64_t y = 0; y < out.height; ++y)
      for (int64_t x = 0; x < out.width; ++x) {
        const double v = (std::clamp(double(img.at3(c, y, x)), -1.0, 1.0) +
                          1.0) * 127.5;
        out.at(y, x, c) = static_cast<uint8_t>(std::lround(v));
      }
  return out;
}

/// Tiles [3,S,S] tensors into a rows x cols grid PNG (row-major order).
template <class T>
void write_grid_png(const std::string& path,
                    const std::vector<Tensor<T>>& tiles, int64_t rows,
                    int64_t cols) {
  require(!tiles.empty() && rows * cols >= int64_t(tiles.size()),
          ErrorKind::InvalidArgument, "write_grid_png: bad grid layout");
  const int64_t S = tiles[0].shape[1];
  RawImage out;
  out.width = cols * S;
  out.height = rows * S;
  out.channels = 3;
  out.data.assign(static_cast<size_t>(out.width * out.height * 3), 0);
  for (size_t t = 0; t < tiles.size(); ++t) {
    const int64_t r = static_cast<int64_t>(t) / cols;
    const int64_t c = static_cast<int64_t>(t) % cols;
    RawImage tile = tensor_to_raw(tiles[t]);
    for (int64_t y = 0; y < S; ++y)
      for (int64_t x = 0; x < S; ++x)
        for (int64_t ch = 0; ch < 3; ++ch)
          out.at(r * S + y, c * S + x, ch) = tile.at(y, x, ch);
  }
  write_png(path, out);
}

// ---------------------------------------------------------------------------
// datasets
// ---------------------------------------------------------------------------

/// Uniform access to images + ground-truth labels by ImageRefId. The
/// partition machinery only sees ids; ground truth stays here for evaluation
/// and for building the labelled pool.
template <class T>
class Dataset {
 public:
  virtual ~Dataset() = default;
  virtual int64_t size() const = 0;
  virtual int64_t image_size() const = 0;
  virtual const AttributeSchema& schema() const = 0;
  virtual const LabelVector& label(ImageRefId id) const = 0;
  /// aug: augmentation stream for training batches (nullptr = eval, no
  /// augmentation).
  virtual Tensor<T> image(ImageRefId id, Rng* aug) const = 0;

  std::vector<LabelledExample> labelled_examples() const {
    std::vector<LabelledExample> out;
    out.reserve(static_cast<size_t>(size()));
    for (int64_t i = 0; i < size(); ++i) out.emplace_back(i, label(i));
    return out;
  }

  /// Stacks refs into a [B,3,S,S] batch.
  Tensor<T> batch(const std::vector<ImageRefId>& refs, Rng* aug) const {
    const int64_t S = image_size();
    Tensor<T> out({static_cast<int64_t>(refs.size()), 3, S, S});
    for (size_t i = 0; i < refs.size(); ++i) {
      Tensor<T> img = image(refs[i], aug);
      std::copy(img.v.begin(), img.v.end(),
                out.v.begin() + static_cast<int64_t>(i) * 3 * S * S);
    }
    return out;
  }
};

/// Procedural dataset: sample i carries class (i mod K) over the enumerated
/// valid label vectors, rendered with per-sample deterministic nuisance.
template <class T>
class SyntheticDataset : public Dataset<T> {
 public:
  SyntheticDataset(SyntheticSpec spec, AttributeSchema schema, int64_t n,
                   uint64_t seed)
      : spec_(std::move(spec)), schema_(std::move(schema)), n_(n), seed_(seed) {
    schema_.validate();
    labels_ = enumerate_valid_labels(schema_);
    require(!labels_.empty(), ErrorKind::InvalidArgument,
            "synthetic dataset: schema admits no labels");
  }

  int64_t size() const override { return n_; }
  int64_t image_size() const override { return spec_.image_size; }
  const AttributeSchema& schema() const override { return schema_; }
  const LabelVector& label(ImageRefId id) const override {
    return labels_[static_cast<size_t>(id % int64_t(labels_.size()))];
  }
  Tensor<T> image(ImageRefId id, Rng*) const override {
    uint64_t x = seed_;
    x ^= 0x632be59bd9b4e019ULL * (uint64_t(id) + 1);
    Rng rng(splitmix64(x));
    return render_synthetic<T>(label(id), spec_, rng);
  }

  const SyntheticSpec& spec() const { return spec_; }

  /// All label vectors admitted by the schema, in lexicographic bit order.
  static std::vector<LabelVector> enumerate_valid_labels(
      const AttributeSchema& schema) {
    std::vector<LabelVector> out;
    const int n = schema.n_attr;
    for (int64_t m = 0; m < (int64_t(1) << n); ++m) {
      LabelVector v;
      for (int i = 0; i < n; ++i)
        v.bits.push_back(static_cast<uint8_t>((m >> i) & 1));
      bool ok = true;
      try {
        v.validate(schema);
      } catch (const MgError&) {
        ok = false;
      }
      if (ok) out.push_back(std::move(v));
    }
    return out;
  }

 private:
  SyntheticSpec spec_;
  AttributeSchema schema_;
  int64_t n_;
  uint64_t seed_;
  std::vector<LabelVector> labels_;
};

/// Rows parsed from an attribute file, checked against the image folder.
struct ImageFolderIndex {
  std::string dir;
  std::vector<std::string> names;
  std::vector<LabelVector> labels;
};

/// Parses the attribute file, projects onto the schema's attributes and
/// verifies every listed image exists.
inline ImageFolderIndex load_image_folder(const std::string& image_dir,
                                          const std::string& attribute_file,
                                          const AttributeSchema& schema) {
  AttributeFile af = parse_attribute_file(attribute_file);
  auto rows = project_attributes(af, schema);
  ImageFolderIndex idx;
  idx.dir = image_dir;
  for (auto& [name, lv] : rows) {
    const std::string path = image_dir + "/" + name;
    require(file_exists(path), ErrorKind::MissingFile,
            "listed image missing: " + path);
    idx.names.push_back(name);
    idx.labels.push_back(std::move(lv));
  }
  return idx;
}

/// CelebA/RaFD-style folder dataset with centre-crop + resize preprocessing
/// and train-time horizontal flips.
template <class T>
class ImageFolderDataset : public Dataset<T> {
 public:
  ImageFolderDataset(ImageFolderIndex idx, AttributeSchema schema,
                     int64_t crop_size, int64_t out_size,
                     bool train_flip = true)
      : idx_(std::move(idx)),
        schema_(std::move(schema)),
        crop_(crop_size),
        out_(out_size),
        flip_(train_flip) {}

  int64_t size() const override {
    return static_cast<int64_t>(idx_.names.size());
  }
  int64_t image_size() const override { return out_; }
  const AttributeSchema& schema() const override { return schema_; }
  const LabelVector& label(ImageRefId id) const override {
    return idx_.labels[static_cast<size_t>(id)];
  }
  Tensor<T> image(ImageRefId id, Rng* aug) const override {
    RawImage raw =
        read_image(idx_.dir + "/" + idx_.names[static_cast<size_t>(id)]);
    Tensor<T> img = preprocess<T>(raw, crop_, out_);
    if (aug && flip_ && aug->uniform() < 0.5) flip_horizontal(img);
    return img;
  }
  const std::vector<std::string>& names() const { return idx_.names; }

 private:
  ImageFolderIndex idx_;
  AttributeSchema schema_;
  int64_t crop_, out_;
  bool flip_;
};

}  // namespace matchgan

#endif  // MATCHGAN_DATAGEN_HPP_
