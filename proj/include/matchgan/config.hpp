#ifndef MATCHGAN_CONFIG_HPP_
#define MATCHGAN_CONFIG_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "matchgan/common.hpp"
#include "matchgan/labelspace.hpp"

namespace matchgan {

/// Flat key-value configuration with dotted section names:
///   train.iters = 200000
///   # comment
/// All defaults live in code; a run dumps its fully resolved configuration
/// next to its outputs.
class KvConfig {
 public:
  static KvConfig parse_string(const std::string& text,
                               const std::string& origin = "<string>");
  static KvConfig parse_file(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
  }

  std::string get_str(const std::string& key, const std::string& dflt) const;
  int64_t get_int(const std::string& key, int64_t dflt) const;
  double get_double(const std::string& key, double dflt) const;
  bool get_bool(const std::string& key, bool dflt) const;

  /// Sorted "key = value" lines.
  std::string dump() const;
  /// FNV-1a of the dump, hex-encoded; stamped into metric reports.
  std::string hash() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Everything a run needs, resolved from defaults + config file + flag
/// overrides.
struct ExperimentConfig {
  // data
  std::string dataset = "synthetic";  // synthetic | image_folder
  std::string image_dir;
  std::string attribute_file;
  std::vector<std::string> attributes;         // image_folder schema
  std::vector<std::vector<int>> exclusive_groups;
  std::string encoding = "binary";             // binary | one_hot
  int64_t synthetic_train = 4096;
  int64_t synthetic_test = 512;
  int64_t n_attr = 3;
  double synthetic_noise = 0.1;
  int64_t image_size = 32;
  int64_t crop_size = 178;
  double test_fraction = 0.1;
  bool train_flip = true;
  double percent_labelled = 0.05;
  uint64_t data_seed = 0;

  // model
  int64_t g_base_width = 16;
  int64_t d_base_width = 32;
  int64_t d_depth = 0;
  int64_t d_max_width = 2048;

  // training (paper defaults)
  int64_t iters = 200000;
  int64_t batch_size = 16;
  int64_t classes_per_batch = 4;
  int64_t d_per_g = 5;
  double lr_g = 1e-4;
  double lr_d = 1e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int64_t decay_start = 0;
  double lambda_cls = 1.0;
  double lambda_cyc = 10.0;
  double lambda_gp = 10.0;
  double lambda_mch = 0.5;
  double triplet_margin = 1.0;
  char setup = 'G';
  uint64_t seed = 0;
  std::string precision = "f32";  // f32 | f64

  // intervals + outputs
  int64_t log_interval = 10;
  int64_t checkpoint_interval = 10000;
  int64_t sample_interval = 1000;
  std::string out_dir = "runs/exp";

  // metrics
  int64_t classifier_epochs = 20;
  int64_t extractor_train = 1024;
  int64_t eval_batch = 64;

  static ExperimentConfig from_kv(const KvConfig& kv);
  KvConfig to_kv() const;

  AttributeSchema schema() const;
};

}  // namespace matchgan

#endif  // MATCHGAN_CONFIG_HPP_
