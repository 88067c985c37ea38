#ifndef MATCHGAN_LOSSES_HPP_
#define MATCHGAN_LOSSES_HPP_

#include <optional>

#include "matchgan/labelspace.hpp"
#include "matchgan/nets.hpp"
#include "matchgan/rng.hpp"

namespace matchgan {

template <class T>
struct LossWeights {
  T lambda_cls = T(1);
  T lambda_cyc = T(10);
  T lambda_gp = T(10);
  T lambda_mch = T(0.5);

  void validate() const {
    require(lambda_cls >= 0 && lambda_cyc >= 0 && lambda_gp >= 0 &&
                lambda_mch >= 0 && std::isfinite(double(lambda_cls)) &&
                std::isfinite(double(lambda_cyc)) &&
                std::isfinite(double(lambda_gp)) &&
                std::isfinite(double(lambda_mch)),
            ErrorKind::InvalidArgument,
            "loss weights must be finite and non-negative");
  }
};

/// x_hat = alpha*r + (1-alpha)*f with one alpha ~ U(0,1) per sample.
template <class T>
Tensor<T> gp_interpolate(const Tensor<T>& real, const Tensor<T>& fake,
                         Rng& rng) {
  check_same_shape(real, fake, "gp_interpolate");
  Tensor<T> out(real.shape);
  const int64_t B = real.shape[0], stride = real.numel() / B;
  for (int64_t b = 0; b < B; ++b) {
    const T a = static_cast<T>(rng.uniform());
    const T* r = real.data() + b * stride;
    const T* f = fake.data() + b * stride;
    T* o = out.data() + b * stride;
    for (int64_t i = 0; i < stride; ++i)
      o[i] = a * r[i] + (T(1) - a) * f[i];
  }
  return out;
}

/// mean_b (|grad_xhat D_adv(xhat_b)|_2 - 1)^2, built from graph nodes so a
/// backward pass yields the second-order parameter gradients.
template <class T>
VarId gradient_penalty(Graph<T>& g, Critic<T>& critic,
                       const Tensor<T>& xhat) {
  VarId grad = critic.adv_input_grad(g, xhat);
  VarId ss = ops::sumsq_per_sample(g, grad);
  VarId norm = ops::sqrt_(g, ops::add_scalar(g, ss, T(1e-24)));
  return ops::mean_all(g, ops::square(g, ops::add_scalar(g, norm, T(-1))));
}

/// Critic loss with precomputed scores (the trainer reuses its forward
/// passes): mean D(f) - mean D(r) + lambda_gp * penalty. The fake batch must
/// be detached from G's graph.
template <class T>
VarId adv_loss_D_from_scores(Graph<T>& g, Critic<T>& critic, VarId adv_real,
                             VarId adv_fake, const Tensor<T>& real,
                             const Tensor<T>& fake, T lambda_gp, Rng& rng) {
  check_same_shape(g.val(adv_real), g.val(adv_fake), "adv_loss_D scores");
  Tensor<T> xhat = gp_interpolate(real, fake, rng);
  VarId wass = ops::sub(g, ops::mean_all(g, adv_fake),
                        ops::mean_all(g, adv_real));
  VarId gp = gradient_penalty(g, critic, xhat);
  return ops::add(g, wass, ops::scale(g, gp, lambda_gp));
}

template <class T>
VarId adv_loss_D(Graph<T>& g, Critic<T>& critic, VarId real, VarId fake,
                 T lambda_gp, Rng& rng) {
  const Tensor<T> real_t = g.val(real);
  const Tensor<T> fake_t = g.val(fake);
  VarId ar = critic.adv_score_only(g, real);
  VarId af = critic.adv_score_only(g, fake);
  return adv_loss_D_from_scores(g, critic, ar, af, real_t, fake_t, lambda_gp,
                                rng);
}

/// Generator adversarial term: -mean D_adv(fake).
template <class T>
VarId adv_loss_G(Graph<T>& g, VarId adv_fake) {
  return ops::scale(g, ops::mean_all(g, adv_fake), T(-1));
}

/// Classification loss on logits [B,A]: per-attribute sigmoid cross-entropy
/// summed over attributes for binary schemas, softmax cross-entropy for
/// one-hot; mean over the batch either way.
template <class T>
VarId cls_loss_from_logits(Graph<T>& g, VarId logits,
                           const Tensor<T>& targets, LabelEncoding enc) {
  if (enc == LabelEncoding::kMultiLabelBinary)
    return ops::bce_logits_mean(g, logits, targets);
  // one-hot: targets -> class indices
  const int64_t B = targets.shape[0], A = targets.shape[1];
  std::vector<int64_t> idx(static_cast<size_t>(B), 0);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t a = 0; a < A; ++a)
      if (targets[b * A + a] > T(0.5)) idx[static_cast<size_t>(b)] = a;
  return ops::softmax_ce_mean(g, logits, std::move(idx));
}

/// L_cls^D over a labelled real batch.
template <class T>
VarId cls_loss_D(Graph<T>& g, Discriminator<T>& D, VarId real_batch,
                 const std::optional<Tensor<T>>& labels, LabelEncoding enc) {
  require(labels.has_value(), ErrorKind::UnlabelledBatch,
          "cls_loss_D: batch carries no source labels");
  return cls_loss_from_logits(g, D.forward(g, real_batch).cls, *labels, enc);
}

/// L_cls^G over generated images against their target labels (sources may be
/// labelled or unlabelled).
template <class T>
VarId cls_loss_G(Graph<T>& g, Discriminator<T>& D, VarId fake_batch,
                 const Tensor<T>& target_labels, LabelEncoding enc) {
  return cls_loss_from_logits(g, D.forward(g, fake_batch).cls, target_labels,
                              enc);
}

/// L1 round trip through already-generated fakes: |x - G(fake, y_src)|_1.
template <class T>
VarId cycle_loss_from_fake(Graph<T>& g, Generator<T>& G, VarId real_batch,
                           VarId fake_batch,
                           const std::optional<Tensor<T>>& src_labels) {
  require(src_labels.has_value(), ErrorKind::UnlabelledBatch,
          "cycle_loss: batch carries no source labels");
  VarId rec = G.forward(g, fake_batch, *src_labels);
  return ops::l1_mean(g, real_batch, rec);
}

/// Full round trip |x - G(G(x,y_trg), y_src)|_1.
template <class T>
VarId cycle_loss(Graph<T>& g, Generator<T>& G, VarId real_batch,
                 const std::optional<Tensor<T>>& src_labels,
                 const Tensor<T>& trg_labels) {
  require(src_labels.has_value(), ErrorKind::UnlabelledBatch,
          "cycle_loss: batch carries no source labels");
  VarId fake = G.forward(g, real_batch, trg_labels);
  return cycle_loss_from_fake(g, G, real_batch, fake, src_labels);
}

/// L_D = adv + odd(i) * (lambda_cls*cls + lambda_mch*mch). On even
/// iterations the adversarial node is returned as-is, so the even-step loss
/// is bit-equal to the adversarial term alone.
template <class T>
VarId total_loss_D(Graph<T>& g, VarId adv, std::optional<VarId> cls,
                   std::optional<VarId> mch, const LossWeights<T>& w,
                   bool is_odd) {
  if (!is_odd) return adv;
  VarId out = adv;
  if (cls) out = ops::add(g, out, ops::scale(g, *cls, w.lambda_cls));
  if (mch) out = ops::add(g, out, ops::scale(g, *mch, w.lambda_mch));
  return out;
}

/// L_G = adv_G + lambda_cls*cls + lambda_mch*mch + odd(i)*lambda_cyc*cyc.
/// cls and mch apply on every G update (their expectations range over
/// labelled and unlabelled sources); only the cycle term is odd-gated.
template <class T>
VarId total_loss_G(Graph<T>& g, VarId adv_g, std::optional<VarId> cls,
                   std::optional<VarId> mch, std::optional<VarId> cyc,
                   const LossWeights<T>& w, bool is_odd) {
  VarId out = adv_g;
  if (cls) out = ops::add(g, out, ops::scale(g, *cls, w.lambda_cls));
  if (mch) out = ops::add(g, out, ops::scale(g, *mch, w.lambda_mch));
  if (is_odd && cyc)
    out = ops::add(g, out, ops::scale(g, *cyc, w.lambda_cyc));
  return out;
}

}  // namespace matchgan

#endif  // MATCHGAN_LOSSES_HPP_
