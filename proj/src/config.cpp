#include "matchgan/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace matchgan {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, sep)) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

}  // namespace

KvConfig KvConfig::parse_string(const std::string& text,
                                const std::string& origin) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::InvalidArgument,
            origin + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), ErrorKind::InvalidArgument,
            origin + ":" + std::to_string(lineno) + ": empty key");
    cfg.values_[key] = value;
  }
  return cfg;
}

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::MissingFile, "config not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path);
}

std::string KvConfig::get_str(const std::string& key,
                              const std::string& dflt) const {
  auto it = values_.find(key);
  return it == values_.end() ? dflt : it->second;
}

int64_t KvConfig::get_int(const std::string& key, int64_t dflt) const {
  auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  try {
    return std::stoll(it->second);
  } catch (...) {
    fail(ErrorKind::InvalidArgument,
         "config key " + key + ": not an integer: " + it->second);
  }
}

double KvConfig::get_double(const std::string& key, double dflt) const {
  auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  try {
    return std::stod(it->second);
  } catch (...) {
    fail(ErrorKind::InvalidArgument,
         "config key " + key + ": not a number: " + it->second);
  }
}

bool KvConfig::get_bool(const std::string& key, bool dflt) const {
  auto it = values_.find(key);
  if (it == values_.end()) return dflt;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorKind::InvalidArgument, "config key " + key + ": not a bool: " + v);
}

std::string KvConfig::dump() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
  return os.str();
}

std::string KvConfig::hash() const {
  const std::string text = dump();
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)h);
  return buf;
}

ExperimentConfig ExperimentConfig::from_kv(const KvConfig& kv) {
  ExperimentConfig c;
  c.dataset = kv.get_str("data.dataset", c.dataset);
  c.image_dir = kv.get_str("data.image_dir", c.image_dir);
  c.attribute_file = kv.get_str("data.attribute_file", c.attribute_file);
  c.attributes = split(kv.get_str("data.attributes", ""), ',');
  for (const auto& grp :
       split(kv.get_str("data.exclusive_groups", ""), ';')) {
    std::vector<int> ids;
    for (const auto& tok : split(grp, ',')) ids.push_back(std::stoi(tok));
    if (!ids.empty()) c.exclusive_groups.push_back(std::move(ids));
  }
  c.encoding = kv.get_str("data.encoding", c.encoding);
  c.synthetic_train = kv.get_int("data.synthetic_train", c.synthetic_train);
  c.synthetic_test = kv.get_int("data.synthetic_test", c.synthetic_test);
  c.n_attr = kv.get_int("data.n_attr", c.n_attr);
  c.synthetic_noise = kv.get_double("data.noise", c.synthetic_noise);
  c.image_size = kv.get_int("data.image_size", c.image_size);
  c.crop_size = kv.get_int("data.crop_size", c.crop_size);
  c.test_fraction = kv.get_double("data.test_fraction", c.test_fraction);
  c.train_flip = kv.get_bool("data.flip", c.train_flip);
  c.percent_labelled =
      kv.get_double("data.percent_labelled", c.percent_labelled);
  c.data_seed = uint64_t(kv.get_int("data.seed", int64_t(c.data_seed)));

  c.g_base_width = kv.get_int("model.g_base_width", c.g_base_width);
  c.d_base_width = kv.get_int("model.d_base_width", c.d_base_width);
  c.d_depth = kv.get_int("model.d_depth", c.d_depth);
  c.d_max_width = kv.get_int("model.d_max_width", c.d_max_width);

  c.iters = kv.get_int("train.iters", c.iters);
  c.batch_size = kv.get_int("train.batch_size", c.batch_size);
  c.classes_per_batch =
      kv.get_int("train.classes_per_batch", c.classes_per_batch);
  c.d_per_g = kv.get_int("train.d_per_g", c.d_per_g);
  c.lr_g = kv.get_double("train.lr_g", c.lr_g);
  c.lr_d = kv.get_double("train.lr_d", c.lr_d);
  c.adam_beta1 = kv.get_double("train.adam_beta1", c.adam_beta1);
  c.adam_beta2 = kv.get_double("train.adam_beta2", c.adam_beta2);
  c.decay_start = kv.get_int("train.decay_start", c.decay_start);
  c.lambda_cls = kv.get_double("loss.lambda_cls", c.lambda_cls);
  c.lambda_cyc = kv.get_double("loss.lambda_cyc", c.lambda_cyc);
  c.lambda_gp = kv.get_double("loss.lambda_gp", c.lambda_gp);
  c.lambda_mch = kv.get_double("loss.lambda_mch", c.lambda_mch);
  c.triplet_margin = kv.get_double("loss.triplet_margin", c.triplet_margin);
  const std::string setup = kv.get_str("train.setup", std::string(1, c.setup));
  require(setup.size() == 1 && setup[0] >= 'A' && setup[0] <= 'H',
          ErrorKind::InvalidArgument, "train.setup must be A..H");
  c.setup = setup[0];
  c.seed = uint64_t(kv.get_int("train.seed", int64_t(c.seed)));
  c.precision = kv.get_str("train.precision", c.precision);
  require(c.precision == "f32" || c.precision == "f64",
          ErrorKind::InvalidArgument, "train.precision must be f32 or f64");

  c.log_interval = kv.get_int("log.interval", c.log_interval);
  c.checkpoint_interval =
      kv.get_int("log.checkpoint_interval", c.checkpoint_interval);
  c.sample_interval = kv.get_int("log.sample_interval", c.sample_interval);
  c.out_dir = kv.get_str("out.dir", c.out_dir);

  c.classifier_epochs =
      kv.get_int("metrics.classifier_epochs", c.classifier_epochs);
  c.extractor_train = kv.get_int("metrics.extractor_train", c.extractor_train);
  c.eval_batch = kv.get_int("metrics.eval_batch", c.eval_batch);
  return c;
}

KvConfig ExperimentConfig::to_kv() const {
  KvConfig kv;
  kv.set("data.dataset", dataset);
  kv.set("data.image_dir", image_dir);
  kv.set("data.attribute_file", attribute_file);
  {
    std::string joined;
    for (const auto& a : attributes)
      joined += (joined.empty() ? "" : ",") + a;
    kv.set("data.attributes", joined);
    std::string groups;
    for (const auto& grp : exclusive_groups) {
      if (!groups.empty()) groups += ";";
      for (size_t i = 0; i < grp.size(); ++i)
        groups += (i ? "," : "") + std::to_string(grp[i]);
    }
    kv.set("data.exclusive_groups", groups);
  }
  kv.set("data.encoding", encoding);
  kv.set("data.synthetic_train", std::to_string(synthetic_train));
  kv.set("data.synthetic_test", std::to_string(synthetic_test));
  kv.set("data.n_attr", std::to_string(n_attr));
  kv.set("data.noise", std::to_string(synthetic_noise));
  kv.set("data.image_size", std::to_string(image_size));
  kv.set("data.crop_size", std::to_string(crop_size));
  kv.set("data.test_fraction", std::to_string(test_fraction));
  kv.set("data.flip", train_flip ? "true" : "false");
  kv.set("data.percent_labelled", std::to_string(percent_labelled));
  kv.set("data.seed", std::to_string(data_seed));
  kv.set("model.g_base_width", std::to_string(g_base_width));
  kv.set("model.d_base_width", std::to_string(d_base_width));
  kv.set("model.d_depth", std::to_string(d_depth));
  kv.set("model.d_max_width", std::to_string(d_max_width));
  kv.set("train.iters", std::to_string(iters));
  kv.set("train.batch_size", std::to_string(batch_size));
  kv.set("train.classes_per_batch", std::to_string(classes_per_batch));
  kv.set("train.d_per_g", std::to_string(d_per_g));
  kv.set("train.lr_g", std::to_string(lr_g));
  kv.set("train.lr_d", std::to_string(lr_d));
  kv.set("train.adam_beta1", std::to_string(adam_beta1));
  kv.set("train.adam_beta2", std::to_string(adam_beta2));
  kv.set("train.decay_start", std::to_string(decay_start));
  kv.set("loss.lambda_cls", std::to_string(lambda_cls));
  kv.set("loss.lambda_cyc", std::to_string(lambda_cyc));
  kv.set("loss.lambda_gp", std::to_string(lambda_gp));
  kv.set("loss.lambda_mch", std::to_string(lambda_mch));
  kv.set("loss.triplet_margin", std::to_string(triplet_margin));
  kv.set("train.setup", std::string(1, setup));
  kv.set("train.seed", std::to_string(seed));
  kv.set("train.precision", precision);
  kv.set("log.interval", std::to_string(log_interval));
  kv.set("log.checkpoint_interval", std::to_string(checkpoint_interval));
  kv.set("log.sample_interval", std::to_string(sample_interval));
  kv.set("out.dir", out_dir);
  kv.set("metrics.classifier_epochs", std::to_string(classifier_epochs));
  kv.set("metrics.extractor_train", std::to_string(extractor_train));
  kv.set("metrics.eval_batch", std::to_string(eval_batch));
  return kv;
}

AttributeSchema ExperimentConfig::schema() const {
  AttributeSchema s;
  if (dataset == "synthetic") {
    for (int64_t i = 0; i < n_attr; ++i)
      s.attribute_names.push_back("attr" + std::to_string(i));
    s.n_attr = int(n_attr);
  } else {
    require(!attributes.empty(), ErrorKind::InvalidArgument,
            "image_folder dataset needs data.attributes");
    s.attribute_names = attributes;
    s.n_attr = int(attributes.size());
  }
  s.exclusive_groups = exclusive_groups;
  if (encoding == "one_hot") {
    s.encoding = LabelEncoding::kOneHot;
    if (s.exclusive_groups.empty()) {
      std::vector<int> all;
      for (int i = 0; i < s.n_attr; ++i) all.push_back(i);
      s.exclusive_groups = {all};
    }
  } else {
    require(encoding == "binary", ErrorKind::InvalidArgument,
            "data.encoding must be binary or one_hot");
    s.encoding = LabelEncoding::kMultiLabelBinary;
  }
  s.validate();
  return s;
}

}  // namespace matchgan
