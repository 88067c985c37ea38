#include <cmath>
#include <set>

#include "doctest.h"
#include "matchgan/pretext.hpp"
#include "testutil.hpp"

using namespace matchgan;
using testutil::random_tensor;

TEST_SUITE_BEGIN("pretext");

namespace {

BatchGroups groups_of(std::vector<std::vector<int64_t>> pos,
                      std::vector<int> ids) {
  BatchGroups g;
  g.positions = std::move(pos);
  g.class_ids = std::move(ids);
  return g;
}

void check_valid(const std::vector<Triplet>& ts, const BatchGroups& g) {
  for (const auto& t : ts) {
    CHECK(t.anchor_class != t.negative_class);
    size_t ga = SIZE_MAX, gn = SIZE_MAX;
    for (size_t i = 0; i < g.class_ids.size(); ++i) {
      if (g.class_ids[i] == t.anchor_class) ga = i;
      if (g.class_ids[i] == t.negative_class) gn = i;
    }
    REQUIRE(ga != SIZE_MAX);
    REQUIRE(gn != SIZE_MAX);
    auto in_group = [&](size_t gi, int64_t pos) {
      const auto& v = g.positions[gi];
      return std::find(v.begin(), v.end(), pos) != v.end();
    };
    CHECK(in_group(ga, t.anchor));
    CHECK(in_group(ga, t.positive));
    CHECK(in_group(gn, t.negative));
    if (g.positions[ga].size() >= 2) CHECK(t.anchor != t.positive);
  }
}

}  // namespace

TEST_CASE("exhaustive plan on {A:[a1,a2], B:[b1,b2]} yields the 8 triplets") {
  auto g = groups_of({{0, 1}, {2, 3}}, {0, 1});
  Rng rng(1);
  auto ts = build_real_triplets(g, rng, TripletPlan::kExhaustive);
  REQUIRE(ts.size() == 8);
  std::set<std::tuple<int64_t, int64_t, int64_t>> got;
  for (const auto& t : ts) got.insert({t.anchor, t.positive, t.negative});
  std::set<std::tuple<int64_t, int64_t, int64_t>> want = {
      {0, 1, 2}, {0, 1, 3}, {1, 0, 2}, {1, 0, 3},
      {2, 3, 0}, {2, 3, 1}, {3, 2, 0}, {3, 2, 1}};
  CHECK(got == want);
  check_valid(ts, g);
}

TEST_CASE("singleton classes fall back to anchor==positive, 2 triplets") {
  auto g = groups_of({{0}, {1}}, {0, 1});
  Rng rng(2);
  auto ts = build_real_triplets(g, rng, TripletPlan::kExhaustive);
  REQUIRE(ts.size() == 2);
  for (const auto& t : ts) CHECK(t.anchor == t.positive);
  check_valid(ts, g);
}

TEST_CASE("default batch 4x4: sampled plan gives B=16, per-class plan 48") {
  auto g = groups_of({{0, 1, 2, 3}, {4, 5, 6, 7}, {8, 9, 10, 11},
                      {12, 13, 14, 15}},
                     {0, 1, 2, 3});
  Rng rng(3);
  auto ts = build_real_triplets(g, rng);  // default single-negative plan
  CHECK(ts.size() == 16);
  check_valid(ts, g);

  Rng rng2(4);
  auto ts48 = build_real_triplets(g, rng2, TripletPlan::kPerClassNegatives);
  CHECK(ts48.size() == 48);  // 4 anchors/class x 1 positive x 3 negatives
  check_valid(ts48, g);
}

TEST_CASE("single-class batches are rejected") {
  auto g = groups_of({{0, 1, 2}}, {0});
  Rng rng(5);
  try {
    build_real_triplets(g, rng);
    FAIL("expected DegenerateBatch");
  } catch (const MgError& e) {
    CHECK(e.kind() == ErrorKind::DegenerateBatch);
  }
}

TEST_CASE("property: all triplets valid over 1000 random batches") {
  Rng rng(6);
  for (int it = 0; it < 1000; ++it) {
    const int k = 2 + int(rng.uniform_int(4));
    std::vector<int> class_of_row;
    for (int c = 0; c < k; ++c) {
      const int sz = 1 + int(rng.uniform_int(5));
      for (int i = 0; i < sz; ++i) class_of_row.push_back(c * 3 + 1);
    }
    // interleave rows so grouping is exercised
    Rng sh(it);
    sh.shuffle(class_of_row);
    for (int c = 0; c < k; ++c) class_of_row[size_t(c)] = c * 3 + 1;
    auto g = BatchGroups::from_flat(class_of_row);
    const auto plan = it % 3 == 0   ? TripletPlan::kExhaustive
                      : it % 3 == 1 ? TripletPlan::kPerClassNegatives
                                    : TripletPlan::kSampledSingleNegative;
    auto ts = build_triplets(g, plan, rng);
    CHECK(!ts.empty());
    check_valid(ts, g);
    if (plan == TripletPlan::kSampledSingleNegative)
      CHECK(ts.size() == class_of_row.size());
  }
}

TEST_CASE("match loss at P=0.5 equals 2 ln 2; perfect pairs drive it to 0") {
  Graph<double> g;
  VarId half = g.leaf(Tensor<double>({3}, 0.5));
  VarId l = match_loss_from_probs(g, half, half);
  CHECK(g.val(l)[0] == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));

  VarId ppos = g.leaf(Tensor<double>({3}, 1.0));
  VarId pneg = g.leaf(Tensor<double>({3}, 0.0));
  VarId l2 = match_loss_from_probs(g, ppos, pneg);
  CHECK(g.val(l2)[0] < 1e-6);
  CHECK(g.val(l2)[0] >= 0.0);
}

TEST_CASE("match loss scalar oracle: P(pos)=0.8, P(neg)=0.3") {
  Graph<double> g;
  VarId p = g.leaf(Tensor<double>({1}, 0.8));
  VarId n = g.leaf(Tensor<double>({1}, 0.3));
  VarId l = match_loss_from_probs(g, p, n);
  const double expect = -(std::log(0.8) + std::log(0.7));
  CHECK(g.val(l)[0] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(g.val(l)[0] == doctest::Approx(0.5798).epsilon(1e-4));
}

TEST_CASE("match loss is invariant under permutation of the triplet list") {
  Discriminator<double> D(DiscriminatorConfig{16, 2, 4, 0, 64, 7});
  MatchHead<double> H(D.emb_channels(), D.emb_spatial(), 7);
  Rng rng(8);
  auto x = random_tensor<double>({6, 3, 16, 16}, rng);
  auto g1 = groups_of({{0, 1, 2}, {3, 4, 5}}, {0, 1});
  Rng tr(9);
  auto ts = build_real_triplets(g1, tr, TripletPlan::kPerClassNegatives);
  auto ts_perm = ts;
  Rng sh(10);
  sh.shuffle(ts_perm);

  auto eval = [&](const std::vector<Triplet>& t) {
    Graph<double> g;
    g.grad_enabled = false;
    return g.val(match_loss_D(g, D, H, g.leaf(x), t))[0];
  };
  CHECK(eval(ts) == doctest::Approx(eval(ts_perm)).epsilon(1e-12));
}

TEST_CASE("raising the positive-pair probability strictly lowers the loss") {
  Graph<double> g;
  Param<double> p("p", Tensor<double>({2}, 0.6));
  Param<double> n("n", Tensor<double>({2}, 0.4));
  VarId l = match_loss_from_probs(g, g.param(p), g.param(n));
  g.backward(l);
  for (int i = 0; i < 2; ++i) {
    CHECK(p.grad[i] < 0.0);  // d loss / d P(pos) < 0
    CHECK(n.grad[i] > 0.0);  // d loss / d P(neg) > 0
  }
}

TEST_CASE("match_loss_G differentiates through the generated images") {
  Generator<double> G(GeneratorConfig{16, 2, 4, 11});
  Discriminator<double> D(DiscriminatorConfig{16, 2, 4, 0, 64, 11});
  MatchHead<double> H(D.emb_channels(), D.emb_spatial(), 11);
  Rng rng(12);
  auto x = random_tensor<double>({4, 3, 16, 16}, rng);
  Tensor<double> y({4, 2});
  y[0] = 1;
  y[3] = 1;
  y[4] = 1;
  y[7] = 1;
  auto gbat = groups_of({{0, 1}, {2, 3}}, {0, 1});
  Rng tr(13);
  auto ts = build_fake_triplets(gbat, tr, TripletPlan::kExhaustive);

  auto loss = [&](bool bw) {
    Graph<double> g;
    VarId fake = G.forward(g, g.leaf(x), y);
    VarId l = match_loss_G(g, D, H, fake, ts);
    if (bw) g.backward(l);
    return g.val(l)[0];
  };
  auto gp = G.parameters();
  std::vector<Param<double>*> slice = {gp[0], gp[6], gp.back()};
  Rng pick(14);
  CHECK(testutil::finite_diff_max_rel(loss, slice, 3, pick) < 1e-3);
}

TEST_CASE("euclidean triplet loss arithmetic oracles") {
  Graph<double> g;
  auto mk = [&](std::initializer_list<double> vals) {
    Tensor<double> t({1, int64_t(vals.size())});
    int64_t i = 0;
    for (double v : vals) t[i++] = v;
    return g.leaf(t);
  };
  // a=p, |a-n|^2 = 4 > margin 1 -> 0
  VarId l1 = euclidean_triplet_loss(g, mk({0.0, 0.0}), mk({0.0, 0.0}),
                                    mk({0.0, 2.0}), 1.0);
  CHECK(g.val(l1)[0] == 0.0);
  // a=p=n -> margin
  VarId l2 = euclidean_triplet_loss(g, mk({0.5, 0.5}), mk({0.5, 0.5}),
                                    mk({0.5, 0.5}), 1.0);
  CHECK(g.val(l2)[0] == doctest::Approx(1.0).epsilon(1e-12));
  // a=(0,0), p=(1,0), n=(0,2), margin 1 -> max(0, 1-4+1) = 0
  VarId l3 = euclidean_triplet_loss(g, mk({0.0, 0.0}), mk({1.0, 0.0}),
                                    mk({0.0, 2.0}), 1.0);
  CHECK(g.val(l3)[0] == 0.0);
}

TEST_CASE("empty triplet set is rejected") {
  Discriminator<double> D(DiscriminatorConfig{16, 2, 4, 0, 64, 15});
  MatchHead<double> H(D.emb_channels(), D.emb_spatial(), 15);
  Graph<double> g;
  g.grad_enabled = false;
  Rng rng(16);
  auto x = random_tensor<double>({2, 3, 16, 16}, rng);
  try {
    match_loss_D(g, D, H, g.leaf(x), {});
    FAIL("expected EmptyTripletSet");
  } catch (const MgError& e) {
    CHECK(e.kind() == ErrorKind::EmptyTripletSet);
  }
}

TEST_SUITE_END();
