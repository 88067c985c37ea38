#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "matchgan/labelspace.hpp"

using namespace matchgan;

TEST_SUITE_BEGIN("labelspace");

namespace {

AttributeSchema celeba_like_schema() {
  AttributeSchema s;
  s.attribute_names = {"Black_Hair", "Blond_Hair", "Brown_Hair", "Male",
                       "Young"};
  s.exclusive_groups = {{0, 1, 2}};
  s.encoding = LabelEncoding::kMultiLabelBinary;
  s.n_attr = 5;
  return s;
}

AttributeSchema onehot_schema(int n) {
  AttributeSchema s;
  for (int i = 0; i < n; ++i)
    s.attribute_names.push_back("expr" + std::to_string(i));
  std::vector<int> all;
  for (int i = 0; i < n; ++i) all.push_back(i);
  s.exclusive_groups = {all};
  s.encoding = LabelEncoding::kOneHot;
  s.n_attr = n;
  return s;
}

std::vector<LabelledExample> round_robin_dataset(
    int64_t n, const std::vector<LabelVector>& classes) {
  std::vector<LabelledExample> out;
  for (int64_t i = 0; i < n; ++i)
    out.emplace_back(i, classes[size_t(i) % classes.size()]);
  return out;
}

}  // namespace

TEST_CASE("enumerate_classes de-duplicates in first-appearance order") {
  auto a = LabelVector::from_ints({1, 0, 0, 1, 0});
  auto b = LabelVector::from_ints({0, 1, 0, 0, 1});
  LabelClasses cls = enumerate_classes({{0, a}, {1, a}, {2, b}});
  REQUIRE(cls.K() == 2);
  CHECK(cls.classes[0] == a);
  CHECK(cls.classes[1] == b);
  CHECK(cls.index_of(b) == 1);
}

TEST_CASE("enumerate_classes error paths") {
  try {
    enumerate_classes({});
    FAIL("expected EmptyPool");
  } catch (const MgError& e) {
    CHECK(e.kind() == ErrorKind::EmptyPool);
  }
  auto a = LabelVector::from_ints({1, 0});
  try {
    enumerate_classes({{0, a}, {1, a}, {2, a}});
    FAIL("expected DegenerateLabelSpace");
  } catch (const MgError& e) {
    CHECK(e.kind() == ErrorKind::DegenerateLabelSpace);
  }
}

TEST_CASE("one-hot pool with all 8 expressions enumerates K=8") {
  auto schema = onehot_schema(8);
  std::vector<LabelledExample> pool;
  for (int64_t i = 0; i < 64; ++i) {
    LabelVector v(std::vector<uint8_t>(8, 0));
    v.bits[size_t(i % 8)] = 1;
    v.validate(schema);
    pool.emplace_back(i, v);
  }
  CHECK(enumerate_classes(pool).K() == 8);
}

TEST_CASE("split keeps CelebA-sized pool fully labelled at percent=1") {
  auto schema = celeba_like_schema();
  std::vector<LabelVector> classes = {
      LabelVector::from_ints({1, 0, 0, 1, 0}),
      LabelVector::from_ints({0, 1, 0, 0, 1}),
      LabelVector::from_ints({0, 0, 1, 1, 1}),
      LabelVector::from_ints({1, 0, 0, 0, 0}),
  };
  auto data = round_robin_dataset(162770, classes);
  auto part = split_semi_supervised(data, 1.0, 7, schema);
  CHECK(part.labelled_count() == 162770);
  CHECK(part.unlabelled.empty());
}

TEST_CASE("split: 100 examples over 4 classes at 20% gives 5 per class") {
  auto schema = celeba_like_schema();
  std::vector<LabelVector> classes = {
      LabelVector::from_ints({1, 0, 0, 0, 0}),
      LabelVector::from_ints({0, 1, 0, 0, 0}),
      LabelVector::from_ints({0, 0, 1, 0, 0}),
      LabelVector::from_ints({0, 0, 0, 1, 0}),
  };
  auto data = round_robin_dataset(100, classes);
  for (uint64_t seed : {1ull, 2ull, 99ull}) {
    auto part = split_semi_supervised(data, 0.2, seed, schema);
    CHECK(part.labelled_count() == 20);
    for (const auto& g : part.labelled) CHECK(g.size() == 5);
  }
}

TEST_CASE("split: RaFD-sized pool at 10% gives 720 labelled, 6480 unlabelled") {
  auto schema = onehot_schema(8);
  std::vector<LabelVector> classes;
  for (int i = 0; i < 8; ++i) {
    LabelVector v(std::vector<uint8_t>(8, 0));
    v.bits[size_t(i)] = 1;
    classes.push_back(v);
  }
  auto data = round_robin_dataset(7200, classes);
  auto part = split_semi_supervised(data, 0.1, 3, schema);
  CHECK(part.labelled_count() == 720);
  CHECK(part.unlabelled.size() == 6480);
}

TEST_CASE("split invariants: disjointness, determinism, balance") {
  auto schema = celeba_like_schema();
  std::vector<LabelVector> classes = {
      LabelVector::from_ints({1, 0, 0, 1, 0}),
      LabelVector::from_ints({0, 1, 0, 1, 0}),
      LabelVector::from_ints({0, 0, 1, 0, 1}),
      LabelVector::from_ints({0, 0, 0, 0, 0}),
      LabelVector::from_ints({1, 0, 0, 0, 1}),
  };
  Rng mk(17);
  std::vector<LabelledExample> data;
  for (int64_t i = 0; i < 557; ++i)
    data.emplace_back(i, classes[mk.uniform_int(classes.size())]);

  for (double pct : {0.031, 0.2, 0.5, 0.93}) {
    for (uint64_t seed : {5ull, 6ull}) {
      auto p1 = split_semi_supervised(data, pct, seed, schema);
      auto p2 = split_semi_supervised(data, pct, seed, schema);
      // determinism
      CHECK(p1.unlabelled == p2.unlabelled);
      for (size_t c = 0; c < p1.labelled.size(); ++c)
        CHECK(p1.labelled[c] == p2.labelled[c]);
      // disjointness + exact sizes
      std::vector<char> seen(data.size(), 0);
      for (const auto& g : p1.labelled)
        for (auto r : g) {
          CHECK(!seen[size_t(r)]);
          seen[size_t(r)] = 1;
        }
      for (auto r : p1.unlabelled) {
        CHECK(!seen[size_t(r)]);
        seen[size_t(r)] = 1;
      }
      CHECK(p1.labelled_count() + int64_t(p1.unlabelled.size()) ==
            int64_t(data.size()));
      CHECK(p1.labelled_count() == std::llround(pct * double(data.size())));
      // labels filed under the right class
      for (size_t c = 0; c < p1.labelled.size(); ++c)
        for (auto r : p1.labelled[c])
          CHECK(data[size_t(r)].second == p1.classes.classes[c]);
      // balance within 1 where populations permit
      size_t mn = SIZE_MAX, mx = 0;
      for (const auto& g : p1.labelled) {
        mn = std::min(mn, g.size());
        mx = std::max(mx, g.size());
      }
      CHECK(mx - mn <= 1);
    }
  }
}

TEST_CASE("labelled batch: B=16 k=4 gives 4 images from each of 4 classes") {
  auto schema = onehot_schema(8);
  std::vector<LabelVector> classes;
  for (int i = 0; i < 8; ++i) {
    LabelVector v(std::vector<uint8_t>(8, 0));
    v.bits[size_t(i)] = 1;
    classes.push_back(v);
  }
  auto data = round_robin_dataset(800, classes);
  auto part = split_semi_supervised(data, 0.5, 1, schema);
  Rng rng(2);
  auto batch = sample_labelled_batch(part, 16, 4, rng);
  REQUIRE(batch.refs.size() == 16);
  REQUIRE(batch.class_subset.size() == 4);
  // grouped: 4 per class, distinct classes, labels equal the filed class
  std::vector<int> cnt(8, 0);
  for (size_t i = 0; i < 16; ++i) {
    ++cnt[size_t(batch.class_of[i])];
    CHECK(data[size_t(batch.refs[i])].second ==
          part.classes.classes[size_t(batch.class_of[i])]);
  }
  std::vector<int> sub = batch.class_subset;
  std::sort(sub.begin(), sub.end());
  CHECK(std::unique(sub.begin(), sub.end()) == sub.end());
  for (int c : batch.class_subset) CHECK(cnt[size_t(c)] == 4);
}

TEST_CASE("labelled batch: two singleton classes give one image per class") {
  auto schema = celeba_like_schema();
  auto a = LabelVector::from_ints({1, 0, 0, 0, 0});
  auto b = LabelVector::from_ints({0, 1, 0, 0, 0});
  std::vector<LabelledExample> data = {{0, a}, {1, b}};
  auto part = split_semi_supervised(data, 1.0, 1, schema);
  Rng rng(3);
  auto batch = sample_labelled_batch(part, 2, 2, rng);
  CHECK(batch.refs.size() == 2);
  CHECK(batch.class_of[0] != batch.class_of[1]);

  // with replacement disabled a singleton class cannot supply 2 examples
  Rng rng2(4);
  CHECK_THROWS_AS((void)sample_labelled_batch(part, 4, 2, rng2, false),
                  MgError);
  // with replacement (the default) it can
  Rng rng3(5);
  auto batch2 = sample_labelled_batch(part, 4, 2, rng3);
  CHECK(batch2.refs.size() == 4);
}

TEST_CASE("class frequencies match uniform sampling over 10k draws") {
  auto schema = onehot_schema(8);
  std::vector<LabelVector> classes;
  for (int i = 0; i < 8; ++i) {
    LabelVector v(std::vector<uint8_t>(8, 0));
    v.bits[size_t(i)] = 1;
    classes.push_back(v);
  }
  auto data = round_robin_dataset(160, classes);
  auto part = split_semi_supervised(data, 1.0, 1, schema);

  Rng rng(42);
  std::vector<int64_t> src_cnt(8, 0);
  for (int it = 0; it < 10000; ++it) {
    auto b = sample_labelled_batch(part, 8, 4, rng);
    for (int c : b.class_subset) ++src_cnt[size_t(c)];
  }
  for (auto c : src_cnt) CHECK(std::abs(double(c) / 10000.0 - 0.5) < 0.02);

  Rng rng2(43);
  std::vector<int64_t> trg_cnt(8, 0);
  for (int it = 0; it < 10000; ++it) {
    auto t = sample_target_batch(part.classes, 8, 4, rng2);
    for (int c : t.class_subset) ++trg_cnt[size_t(c)];
  }
  for (auto c : trg_cnt) CHECK(std::abs(double(c) / 10000.0 - 0.5) < 0.02);
}

TEST_CASE("target batch: B=16 k=4 over K=5; B=k=K covers every class once") {
  std::vector<LabelVector> classes = {
      LabelVector::from_ints({1, 0, 0, 0, 0}),
      LabelVector::from_ints({0, 1, 0, 0, 0}),
      LabelVector::from_ints({0, 0, 1, 0, 0}),
      LabelVector::from_ints({0, 0, 0, 1, 0}),
      LabelVector::from_ints({0, 0, 0, 0, 1}),
  };
  std::vector<LabelledExample> data = round_robin_dataset(50, classes);
  auto cls = enumerate_classes(data);
  Rng rng(5);
  auto t = sample_target_batch(cls, 16, 4, rng);
  REQUIRE(t.class_ids.size() == 16);
  std::vector<int> cnt(5, 0);
  for (int c : t.class_ids) ++cnt[size_t(c)];
  int nonzero = 0;
  for (int c : cnt)
    if (c > 0) {
      ++nonzero;
      CHECK(c == 4);
    }
  CHECK(nonzero == 4);

  auto t2 = sample_target_batch(cls, 5, 5, rng);
  std::vector<int> ids = t2.class_ids;
  std::sort(ids.begin(), ids.end());
  CHECK(ids == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("attribute file parses; malformed lines carry line numbers") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "mg_attr_test";
  fs::create_directories(dir);
  const std::string good = (dir / "attrs.txt").string();
  {
    std::ofstream f(good);
    f << "Black_Hair Blond_Hair Male\n";
    f << "a.png 1 -1 1\n";
    f << "b.png -1 1 -1\n";
  }
  auto af = parse_attribute_file(good);
  CHECK(af.names ==
        std::vector<std::string>{"Black_Hair", "Blond_Hair", "Male"});
  REQUIRE(af.rows.size() == 2);
  CHECK(af.rows[0].second.bits == std::vector<uint8_t>{1, 0, 1});
  CHECK(af.rows[1].second.bits == std::vector<uint8_t>{0, 1, 0});

  const std::string bad = (dir / "bad.txt").string();
  {
    std::ofstream f(bad);
    f << "A B\n";
    f << "a.png 1 -1\n";
    f << "b.png 1\n";
  }
  try {
    parse_attribute_file(bad);
    FAIL("expected MalformedAttributeLine");
  } catch (const MgError& e) {
    CHECK(e.kind() == ErrorKind::MalformedAttributeLine);
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }

  CHECK_THROWS_AS((void)parse_attribute_file((dir / "nope.txt").string()),
                  MgError);

  AttributeSchema schema;
  schema.attribute_names = {"Male", "Blond_Hair"};
  schema.n_attr = 2;
  auto rows = project_attributes(af, schema);
  CHECK(rows[0].second.bits == std::vector<uint8_t>{1, 0});

  AttributeSchema bad_schema;
  bad_schema.attribute_names = {"No_Such_Attr"};
  bad_schema.n_attr = 1;
  try {
    project_attributes(af, bad_schema);
    FAIL("expected UnknownAttributeName");
  } catch (const MgError& e) {
    CHECK(e.kind() == ErrorKind::UnknownAttributeName);
  }
}

TEST_CASE("partition manifest round-trips") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "mg_manifest_test";
  fs::create_directories(dir);
  auto schema = celeba_like_schema();
  auto a = LabelVector::from_ints({1, 0, 0, 0, 0});
  auto b = LabelVector::from_ints({0, 1, 0, 0, 0});
  std::vector<LabelledExample> data = {{0, a}, {1, b}, {2, a}, {3, b}};
  auto part = split_semi_supervised(data, 0.5, 1, schema);
  std::vector<std::string> names = {"i0.png", "i1.png", "i2.png", "i3.png"};
  const std::string path = (dir / "manifest.tsv").string();
  write_partition_manifest(part, names, path);
  auto rows = read_partition_manifest(path);
  REQUIRE(rows.size() == 4);
  int labelled = 0, unlabelled = 0;
  for (auto& [name, c] : rows) (c >= 0 ? labelled : unlabelled)++;
  CHECK(labelled == 2);
  CHECK(unlabelled == 2);
}

TEST_SUITE_END();
