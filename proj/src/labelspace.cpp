#include "matchgan/labelspace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace matchgan {

void AttributeSchema::validate() const {
  require(n_attr > 0, ErrorKind::InvalidArgument, "schema: n_attr must be > 0");
  std::vector<char> seen(static_cast<size_t>(n_attr), 0);
  size_t covered = 0;
  for (const auto& grp : exclusive_groups) {
    for (int idx : grp) {
      require(idx >= 0 && idx < n_attr, ErrorKind::InvalidArgument,
              "schema: exclusive group index out of range");
      require(!seen[static_cast<size_t>(idx)], ErrorKind::InvalidArgument,
              "schema: exclusive groups must be pairwise disjoint");
      seen[static_cast<size_t>(idx)] = 1;
      ++covered;
    }
  }
  if (encoding == LabelEncoding::kOneHot) {
    require(exclusive_groups.size() == 1 &&
                covered == static_cast<size_t>(n_attr),
            ErrorKind::InvalidArgument,
            "schema: one_hot requires a single group covering all indices");
  }
}

void LabelVector::validate(const AttributeSchema& schema) const {
  require(static_cast<int>(bits.size()) == schema.n_attr,
          ErrorKind::InvalidArgument, "label vector length != n_attr");
  for (uint8_t b : bits)
    require(b == 0 || b == 1, ErrorKind::InvalidArgument,
            "label bits must be 0/1");
  for (const auto& grp : schema.exclusive_groups) {
    int ones = 0;
    for (int idx : grp) ones += bits[static_cast<size_t>(idx)];
    if (schema.encoding == LabelEncoding::kOneHot) {
      require(ones == 1, ErrorKind::InvalidArgument,
              "one_hot label must have exactly one bit set per group");
    } else {
      require(ones <= 1, ErrorKind::InvalidArgument,
              "at most one bit may be set within an exclusive group");
    }
  }
}

std::string LabelVector::str() const {
  std::string s;
  s.reserve(bits.size());
  for (uint8_t b : bits) s.push_back(b ? '1' : '0');
  return s;
}

LabelClasses enumerate_classes(const std::vector<LabelledExample>& labelled) {
  require(!labelled.empty(), ErrorKind::EmptyPool,
          "enumerate_classes: no labelled examples");
  LabelClasses out;
  const size_t len = labelled.front().second.size();
  for (const auto& [ref, lv] : labelled) {
    require(lv.size() == len, ErrorKind::InvalidArgument,
            "enumerate_classes: inconsistent label lengths");
    if (out.class_index.find(lv) == out.class_index.end()) {
      out.class_index.emplace(lv, out.K());
      out.classes.push_back(lv);
    }
  }
  require(out.K() >= 2, ErrorKind::DegenerateLabelSpace,
          "enumerate_classes: fewer than 2 distinct classes, negative pairs "
          "are impossible");
  return out;
}

DatasetPartition split_semi_supervised(
    const std::vector<LabelledExample>& dataset, double percent_labelled,
    uint64_t seed, const AttributeSchema& schema) {
  require(percent_labelled > 0.0 && percent_labelled <= 1.0,
          ErrorKind::InvalidArgument,
          "split: percent_labelled must be in (0,1]");
  schema.validate();

  DatasetPartition part;
  part.schema = schema;
  part.classes = enumerate_classes(dataset);
  const int K = part.classes.K();

  // group refs by class, keep dataset order
  std::vector<std::vector<ImageRefId>> by_class(static_cast<size_t>(K));
  for (const auto& [ref, lv] : dataset) {
    lv.validate(schema);
    by_class[static_cast<size_t>(part.classes.index_of(lv))].push_back(ref);
  }

  const int64_t quota = static_cast<int64_t>(
      std::llround(percent_labelled * static_cast<double>(dataset.size())));

  // per-class shuffled order, one independent stream per class
  Rng root(seed);
  for (int c = 0; c < K; ++c) {
    Rng r = root.stream("split.class" + std::to_string(c));
    r.shuffle(by_class[static_cast<size_t>(c)]);
  }

  // round-robin over classes in descending population order
  std::vector<int> order(static_cast<size_t>(K));
  for (int c = 0; c < K; ++c) order[static_cast<size_t>(c)] = c;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return by_class[static_cast<size_t>(a)].size() >
           by_class[static_cast<size_t>(b)].size();
  });

  part.labelled.assign(static_cast<size_t>(K), {});
  std::vector<size_t> taken(static_cast<size_t>(K), 0);
  int64_t assigned = 0;
  while (assigned < quota) {
    bool progress = false;
    for (int c : order) {
      if (assigned >= quota) break;
      auto& pool = by_class[static_cast<size_t>(c)];
      if (taken[static_cast<size_t>(c)] < pool.size()) {
        part.labelled[static_cast<size_t>(c)].push_back(
            pool[taken[static_cast<size_t>(c)]++]);
        ++assigned;
        progress = true;
      }
    }
    if (!progress) break;  // every pool exhausted
  }

  // remaining refs become the unlabelled pool, in dataset order
  std::vector<char> is_labelled_ref;
  {
    std::unordered_map<ImageRefId, char> labelled_set;
    for (const auto& grp : part.labelled)
      for (ImageRefId r : grp) labelled_set[r] = 1;
    for (const auto& [ref, lv] : dataset)
      if (!labelled_set.count(ref)) part.unlabelled.push_back(ref);
  }

  // balance guard: a class must not starve while another holds >= 2 when
  // spreading evenly was possible (round-robin makes this unreachable; kept
  // as a postcondition)
  size_t mn = SIZE_MAX, mx = 0;
  for (const auto& g : part.labelled) {
    mn = std::min(mn, g.size());
    mx = std::max(mx, g.size());
  }
  if (mn == 0 && mx >= 2 && quota >= K)
    fail(ErrorKind::InsufficientData,
         "split: a class received no labelled examples");
  return part;
}

LabelledBatch sample_labelled_batch(const DatasetPartition& partition,
                                    int64_t B, int64_t k, Rng& rng,
                                    bool allow_replacement) {
  const int K = partition.classes.K();
  require(k >= 1 && k <= K, ErrorKind::InvalidArgument,
          "sample_labelled_batch: need 1 <= k <= K");
  require(B % k == 0, ErrorKind::InvalidArgument,
          "sample_labelled_batch: B must be divisible by k");
  const int64_t per_class = B / k;

  std::vector<int> cand(static_cast<size_t>(K));
  for (int c = 0; c < K; ++c) cand[static_cast<size_t>(c)] = c;
  rng.partial_shuffle(cand, static_cast<size_t>(k));
  cand.resize(static_cast<size_t>(k));

  LabelledBatch out;
  out.class_subset = cand;
  for (int c : cand) {
    const auto& pool = partition.labelled[static_cast<size_t>(c)];
    require(!pool.empty(), ErrorKind::ClassUnderflow,
            "sample_labelled_batch: class " + std::to_string(c) +
                " has no labelled examples");
    if (static_cast<int64_t>(pool.size()) >= per_class) {
      std::vector<ImageRefId> tmp = pool;
      rng.partial_shuffle(tmp, static_cast<size_t>(per_class));
      for (int64_t i = 0; i < per_class; ++i) {
        out.refs.push_back(tmp[static_cast<size_t>(i)]);
        out.class_of.push_back(c);
      }
    } else {
      require(allow_replacement, ErrorKind::ClassUnderflow,
              "sample_labelled_batch: class " + std::to_string(c) +
                  " cannot supply " + std::to_string(per_class) +
                  " examples without replacement");
      for (int64_t i = 0; i < per_class; ++i) {
        out.refs.push_back(pool[rng.uniform_int(pool.size())]);
        out.class_of.push_back(c);
      }
    }
  }
  return out;
}

TargetBatch sample_target_batch(const LabelClasses& classes, int64_t B,
                                int64_t k, Rng& rng) {
  const int K = classes.K();
  require(k >= 1 && k <= K, ErrorKind::InvalidArgument,
          "sample_target_batch: need 1 <= k <= K");
  require(B % k == 0, ErrorKind::InvalidArgument,
          "sample_target_batch: B must be divisible by k");
  std::vector<int> cand(static_cast<size_t>(K));
  for (int c = 0; c < K; ++c) cand[static_cast<size_t>(c)] = c;
  rng.partial_shuffle(cand, static_cast<size_t>(k));
  cand.resize(static_cast<size_t>(k));

  TargetBatch out;
  out.class_subset = cand;
  const int64_t per_class = B / k;
  for (int c : cand)
    for (int64_t i = 0; i < per_class; ++i) out.class_ids.push_back(c);
  return out;
}

AttributeFile parse_attribute_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::MissingFile,
          "attribute file not found: " + path);
  AttributeFile out;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::IoError,
          "attribute file is empty: " + path);
  {
    std::istringstream hs(line);
    std::string name;
    while (hs >> name) out.names.push_back(name);
  }
  require(!out.names.empty(), ErrorKind::MalformedAttributeLine,
          path + ":1: empty header");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string fname;
    ls >> fname;
    LabelVector lv;
    int v;
    while (ls >> v) {
      require(v == -1 || v == 1, ErrorKind::MalformedAttributeLine,
              path + ":" + std::to_string(lineno) +
                  ": attribute values must be -1 or 1");
      lv.bits.push_back(v == 1 ? 1 : 0);
    }
    require(!ls.fail() || ls.eof(), ErrorKind::MalformedAttributeLine,
            path + ":" + std::to_string(lineno) + ": non-numeric attribute");
    require(lv.size() == out.names.size(), ErrorKind::MalformedAttributeLine,
            path + ":" + std::to_string(lineno) + ": expected " +
                std::to_string(out.names.size()) + " values, got " +
                std::to_string(lv.size()));
    out.rows.emplace_back(fname, std::move(lv));
  }
  return out;
}

std::vector<std::pair<std::string, LabelVector>> project_attributes(
    const AttributeFile& file, const AttributeSchema& schema) {
  schema.validate();
  std::vector<size_t> cols;
  for (const auto& want : schema.attribute_names) {
    auto it = std::find(file.names.begin(), file.names.end(), want);
    require(it != file.names.end(), ErrorKind::UnknownAttributeName,
            "attribute not present in file: " + want);
    cols.push_back(static_cast<size_t>(it - file.names.begin()));
  }
  std::vector<std::pair<std::string, LabelVector>> out;
  out.reserve(file.rows.size());
  for (const auto& [name, lv] : file.rows) {
    LabelVector sel;
    for (size_t c : cols) sel.bits.push_back(lv.bits[c]);
    out.emplace_back(name, std::move(sel));
  }
  return out;
}

void write_partition_manifest(const DatasetPartition& partition,
                              const std::vector<std::string>& names,
                              const std::string& path) {
  std::ofstream outf(path);
  require(outf.good(), ErrorKind::IoError, "cannot write manifest: " + path);
  for (size_t c = 0; c < partition.labelled.size(); ++c)
    for (ImageRefId r : partition.labelled[c])
      outf << names.at(static_cast<size_t>(r)) << "\t" << c << "\n";
  for (ImageRefId r : partition.unlabelled)
    outf << names.at(static_cast<size_t>(r)) << "\tUNLABELLED\n";
}

std::vector<std::pair<std::string, int>> read_partition_manifest(
    const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::MissingFile, "manifest not found: " + path);
  std::vector<std::pair<std::string, int>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    require(tab != std::string::npos, ErrorKind::IoError,
            path + ":" + std::to_string(lineno) + ": missing tab");
    std::string name = line.substr(0, tab);
    std::string rest = line.substr(tab + 1);
    if (rest == "UNLABELLED") {
      out.emplace_back(std::move(name), -1);
    } else {
      out.emplace_back(std::move(name), std::stoi(rest));
    }
  }
  return out;
}

}  // namespace matchgan
