#ifndef MATCHGAN_LABELSPACE_HPP_
#define MATCHGAN_LABELSPACE_HPP_

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "matchgan/common.hpp"
#include "matchgan/rng.hpp"
#include "matchgan/tensor.hpp"

namespace matchgan {

enum class LabelEncoding { kMultiLabelBinary, kOneHot };

/// Describes the attribute vector layout: which bits exist, which are
/// mutually exclusive (e.g. the three hair colours), and the encoding.
struct AttributeSchema {
  std::vector<std::string> attribute_names;
  std::vector<std::vector<int>> exclusive_groups;
  LabelEncoding encoding = LabelEncoding::kMultiLabelBinary;
  int n_attr = 0;

  void validate() const;
};

/// Binary/one-hot attribute vector, compared holistically.
struct LabelVector {
  std::vector<uint8_t> bits;

  LabelVector() = default;
  explicit LabelVector(std::vector<uint8_t> b) : bits(std::move(b)) {}
  static LabelVector from_ints(std::initializer_list<int> xs) {
    LabelVector v;
    for (int x : xs) v.bits.push_back(static_cast<uint8_t>(x));
    return v;
  }

  bool operator==(const LabelVector& o) const { return bits == o.bits; }
  size_t size() const { return bits.size(); }
  void validate(const AttributeSchema& schema) const;
  std::string str() const;
};

struct LabelVectorHash {
  size_t operator()(const LabelVector& v) const {
    size_t h = 1469598103934665603ULL;
    for (uint8_t b : v.bits) {
      h ^= b;
      h *= 1099511628211ULL;
    }
    return h;
  }
};

/// The discrete class set Y = {y_1..y_K}: distinct label vectors in
/// first-appearance order.
struct LabelClasses {
  std::vector<LabelVector> classes;
  std::unordered_map<LabelVector, int, LabelVectorHash> class_index;

  int K() const { return static_cast<int>(classes.size()); }
  int index_of(const LabelVector& v) const {
    auto it = class_index.find(v);
    return it == class_index.end() ? -1 : it->second;
  }
};

using ImageRefId = int64_t;
using LabelledExample = std::pair<ImageRefId, LabelVector>;

/// Disjoint labelled pool (grouped by class) and unlabelled pool.
struct DatasetPartition {
  std::vector<std::vector<ImageRefId>> labelled;  // index = class index
  std::vector<ImageRefId> unlabelled;
  AttributeSchema schema;
  LabelClasses classes;

  int64_t labelled_count() const {
    int64_t n = 0;
    for (const auto& g : labelled) n += static_cast<int64_t>(g.size());
    return n;
  }
};

/// De-duplicates observed label vectors (first-appearance order).
/// Throws EmptyPool / DegenerateLabelSpace.
LabelClasses enumerate_classes(const std::vector<LabelledExample>& labelled);

/// Uniform labelled/unlabelled split, spread evenly between classes whenever
/// possible: round-robin over classes in descending population order, order
/// within a class shuffled by the seed.
DatasetPartition split_semi_supervised(
    const std::vector<LabelledExample>& dataset, double percent_labelled,
    uint64_t seed, const AttributeSchema& schema);

struct LabelledBatch {
  std::vector<ImageRefId> refs;    // grouped: B/k per class
  std::vector<int> class_of;       // class index per item
  std::vector<int> class_subset;   // the k drawn classes (K_src)
};

struct TargetBatch {
  std::vector<int> class_ids;      // B target class indices, grouped
  std::vector<int> class_subset;   // the k drawn classes (K_trg)
};

/// B images from k uniformly drawn classes, B/k each. With
/// `allow_replacement` a class smaller than B/k is sampled with replacement,
/// otherwise ClassUnderflow is thrown.
LabelledBatch sample_labelled_batch(const DatasetPartition& partition,
                                    int64_t B, int64_t k, Rng& rng,
                                    bool allow_replacement = true);

/// B target labels from k uniformly drawn classes, independent of any source
/// batch.
TargetBatch sample_target_batch(const LabelClasses& classes, int64_t B,
                                int64_t k, Rng& rng);

/// Stacks class label vectors into a [B, n_attr] tensor.
template <class T>
Tensor<T> labels_to_tensor(const LabelClasses& classes,
                           const std::vector<int>& class_ids) {
  const int64_t B = static_cast<int64_t>(class_ids.size());
  const int64_t A = static_cast<int64_t>(classes.classes.at(0).size());
  Tensor<T> t({B, A});
  for (int64_t b = 0; b < B; ++b) {
    const auto& bits = classes.classes.at(class_ids[b]).bits;
    for (int64_t a = 0; a < A; ++a) t[b * A + a] = static_cast<T>(bits[a]);
  }
  return t;
}

// --- attribute file + partition manifest formats ---

struct AttributeFile {
  std::vector<std::string> names;
  std::vector<std::pair<std::string, LabelVector>> rows;
};

/// Header line of attribute names, then one line per image:
/// "filename v_1 ... v_n" with v in {-1,1}, mapped to {0,1}.
AttributeFile parse_attribute_file(const std::string& path);

/// Keeps only the schema's attributes (matched by name) in schema order.
std::vector<std::pair<std::string, LabelVector>> project_attributes(
    const AttributeFile& file, const AttributeSchema& schema);

/// One line per image: "filename<TAB>class_index" or
/// "filename<TAB>UNLABELLED".
void write_partition_manifest(const DatasetPartition& partition,
                              const std::vector<std::string>& names,
                              const std::string& path);

/// Returns (filename, class_index) rows, class_index = -1 for unlabelled.
std::vector<std::pair<std::string, int>> read_partition_manifest(
    const std::string& path);

}  // namespace matchgan

#endif  // MATCHGAN_LABELSPACE_HPP_
