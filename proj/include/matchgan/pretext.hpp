#ifndef MATCHGAN_PRETEXT_HPP_
#define MATCHGAN_PRETEXT_HPP_

#include <vector>

#include "matchgan/nets.hpp"
#include "matchgan/rng.hpp"

namespace matchgan {

/// (anchor, positive, negative) over batch positions, with class metadata.
/// anchor/positive share a class; the negative comes from another class.
struct Triplet {
  int64_t anchor = 0;
  int64_t positive = 0;
  int64_t negative = 0;
  int anchor_class = 0;
  int negative_class = 0;
};

/// How many triplets a batch yields.
///  - kSampledSingleNegative: every member anchors once with one uniformly
///    drawn negative class -> B triplets (the training default, linear in B).
///  - kPerClassNegatives: every member anchors once against one negative from
///    each other class -> B*(k-1) triplets.
///  - kExhaustive: all (anchor, positive != anchor, negative) combinations.
enum class TripletPlan {
  kSampledSingleNegative,
  kPerClassNegatives,
  kExhaustive,
};

/// Groups of batch positions by class. `positions[i]` lists the batch rows of
/// class `class_ids[i]`.
struct BatchGroups {
  std::vector<std::vector<int64_t>> positions;
  std::vector<int> class_ids;

  static BatchGroups from_flat(const std::vector<int>& class_of_row) {
    BatchGroups g;
    for (size_t row = 0; row < class_of_row.size(); ++row) {
      const int c = class_of_row[row];
      size_t gi = 0;
      for (; gi < g.class_ids.size(); ++gi)
        if (g.class_ids[gi] == c) break;
      if (gi == g.class_ids.size()) {
        g.class_ids.push_back(c);
        g.positions.emplace_back();
      }
      g.positions[gi].push_back(static_cast<int64_t>(row));
    }
    return g;
  }
};

/// Builds triplets from class-grouped batch positions. Positive falls back to
/// the anchor itself only for singleton groups. Works identically for real
/// batches (grouped by source label) and generated batches (grouped by target
/// label).
inline std::vector<Triplet> build_triplets(const BatchGroups& groups,
                                           TripletPlan plan, Rng& rng) {
  size_t nonempty = 0;
  for (const auto& g : groups.positions)
    if (!g.empty()) ++nonempty;
  require(nonempty >= 2, ErrorKind::DegenerateBatch,
          "build_triplets: need at least two classes in the batch");

  const size_t G = groups.positions.size();
  std::vector<Triplet> out;

  auto pick_positive = [&](size_t gi, int64_t anchor_pos) {
    const auto& grp = groups.positions[gi];
    if (grp.size() == 1) return grp[0];  // singleton fallback
    int64_t p;
    do {
      p = grp[rng.uniform_int(grp.size())];
    } while (p == anchor_pos);
    return p;
  };

  if (plan == TripletPlan::kExhaustive) {
    for (size_t ga = 0; ga < G; ++ga) {
      if (groups.positions[ga].empty()) continue;
      for (size_t gn = 0; gn < G; ++gn) {
        if (gn == ga || groups.positions[gn].empty()) continue;
        for (int64_t a : groups.positions[ga])
          for (int64_t p : groups.positions[ga]) {
            if (p == a && groups.positions[ga].size() > 1) continue;
            for (int64_t n : groups.positions[gn])
              out.push_back({a, p, n, groups.class_ids[ga],
                             groups.class_ids[gn]});
          }
      }
    }
    return out;
  }

  for (size_t ga = 0; ga < G; ++ga) {
    if (groups.positions[ga].empty()) continue;
    std::vector<size_t> others;
    for (size_t gn = 0; gn < G; ++gn)
      if (gn != ga && !groups.positions[gn].empty()) others.push_back(gn);
    for (int64_t a : groups.positions[ga]) {
      const int64_t p = pick_positive(ga, a);
      if (plan == TripletPlan::kPerClassNegatives) {
        for (size_t gn : others) {
          const auto& ng = groups.positions[gn];
          out.push_back({a, p, ng[rng.uniform_int(ng.size())],
                         groups.class_ids[ga], groups.class_ids[gn]});
        }
      } else {
        const size_t gn = others[rng.uniform_int(others.size())];
        const auto& ng = groups.positions[gn];
        out.push_back({a, p, ng[rng.uniform_int(ng.size())],
                       groups.class_ids[ga], groups.class_ids[gn]});
      }
    }
  }
  return out;
}

/// Triplets over a real labelled batch, grouped by source class.
inline std::vector<Triplet> build_real_triplets(
    const BatchGroups& batch_groups, Rng& rng,
    TripletPlan plan = TripletPlan::kSampledSingleNegative) {
  return build_triplets(batch_groups, plan, rng);
}

/// Triplets over generated images, grouped by TARGET class; anchors,
/// positives and negatives may come from different (unknown) source images.
inline std::vector<Triplet> build_fake_triplets(
    const BatchGroups& fake_groups, Rng& rng,
    TripletPlan plan = TripletPlan::kSampledSingleNegative) {
  return build_triplets(fake_groups, plan, rng);
}

/// Mean over triplets of -[log P(matched|a,p) + log(1 - P(matched|a,n))],
/// probabilities clamped to [eps, 1-eps].
template <class T>
VarId match_loss_from_probs(Graph<T>& g, VarId p_pos, VarId p_neg,
                            T eps = T(1e-7)) {
  VarId lp = ops::log_(g, ops::clamp(g, p_pos, eps, T(1) - eps));
  VarId one_minus =
      ops::add_scalar(g, ops::scale(g, p_neg, T(-1)), T(1));
  VarId ln = ops::log_(g, ops::clamp(g, one_minus, eps, T(1) - eps));
  return ops::scale(g, ops::mean_all(g, ops::add(g, lp, ln)), T(-1));
}

/// Match loss over an embedding batch [B,C,s,s] already produced by the
/// discriminator trunk. Gradients flow wherever the embeddings came from
/// (real images for the D update, generated ones for the G update).
template <class T>
VarId match_loss_on_embeddings(Graph<T>& g, MatchHead<T>& head, VarId emb,
                               const std::vector<Triplet>& triplets,
                               T eps = T(1e-7)) {
  require(!triplets.empty(), ErrorKind::EmptyTripletSet,
          "match loss: no triplets");
  std::vector<int64_t> ia, ip, in;
  for (const auto& t : triplets) {
    ia.push_back(t.anchor);
    ip.push_back(t.positive);
    in.push_back(t.negative);
  }
  VarId ea = ops::gather_batch(g, emb, ia);
  VarId ep = ops::gather_batch(g, emb, ip);
  VarId en = ops::gather_batch(g, emb, in);
  VarId p_pos = head.prob(g, ea, ep);
  VarId p_neg = head.prob(g, ea, en);
  return match_loss_from_probs(g, p_pos, p_neg, eps);
}

/// Eq.-style match loss for real labelled triplets: embeds the batch through
/// D and scores pairs with the match head.
template <class T>
VarId match_loss_D(Graph<T>& g, Discriminator<T>& D, MatchHead<T>& head,
                   VarId real_batch, const std::vector<Triplet>& triplets) {
  VarId emb = D.forward(g, real_batch).emb;
  return match_loss_on_embeddings(g, head, emb, triplets);
}

/// Same objective over generated images; gradients flow into G through the
/// generated batch.
template <class T>
VarId match_loss_G(Graph<T>& g, Discriminator<T>& D, MatchHead<T>& head,
                   VarId fake_batch, const std::vector<Triplet>& triplets) {
  VarId emb = D.forward(g, fake_batch).emb;
  return match_loss_on_embeddings(g, head, emb, triplets);
}

/// Standard hinge triplet loss on flattened embeddings:
/// mean max(0, |a-p|^2 - |a-n|^2 + margin). The setup-H alternative.
template <class T>
VarId euclidean_triplet_loss(Graph<T>& g, VarId emb_a, VarId emb_p,
                             VarId emb_n, T margin) {
  VarId d_ap = ops::sumsq_per_sample(g, ops::sub(g, emb_a, emb_p));
  VarId d_an = ops::sumsq_per_sample(g, ops::sub(g, emb_a, emb_n));
  VarId h = ops::relu(g, ops::add_scalar(g, ops::sub(g, d_ap, d_an), margin));
  return ops::mean_all(g, h);
}

/// Setup-H loss over a trunk embedding batch and a triplet list.
template <class T>
VarId euclidean_triplet_loss_on_embeddings(
    Graph<T>& g, VarId emb, const std::vector<Triplet>& triplets, T margin) {
  require(!triplets.empty(), ErrorKind::EmptyTripletSet,
          "euclidean triplet loss: no triplets");
  std::vector<int64_t> ia, ip, in;
  for (const auto& t : triplets) {
    ia.push_back(t.anchor);
    ip.push_back(t.positive);
    in.push_back(t.negative);
  }
  return euclidean_triplet_loss(g, ops::gather_batch(g, emb, ia),
                                ops::gather_batch(g, emb, ip),
                                ops::gather_batch(g, emb, in), margin);
}

}  // namespace matchgan

#endif  // MATCHGAN_PRETEXT_HPP_
