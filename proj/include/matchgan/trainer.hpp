#ifndef MATCHGAN_TRAINER_HPP_
#define MATCHGAN_TRAINER_HPP_

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "matchgan/checkpoint.hpp"
#include "matchgan/datagen.hpp"
#include "matchgan/losses.hpp"
#include "matchgan/optim.hpp"
#include "matchgan/pretext.hpp"

namespace matchgan {

enum class MatchVariant { kConcatCe, kEuclideanTriplet, kOff };

inline std::string match_variant_name(MatchVariant v) {
  switch (v) {
    case MatchVariant::kConcatCe: return "concat_ce";
    case MatchVariant::kEuclideanTriplet: return "euclidean_triplet";
    default: return "off";
  }
}

inline MatchVariant match_variant_from(const std::string& s) {
  if (s == "concat_ce") return MatchVariant::kConcatCe;
  if (s == "euclidean_triplet") return MatchVariant::kEuclideanTriplet;
  if (s == "off") return MatchVariant::kOff;
  fail(ErrorKind::InvalidArgument, "unknown match variant: " + s);
}

/// The Table-1 switches: which data pools feed the match loss, and which
/// pairwise objective it uses.
struct AblationSwitches {
  bool use_mch_real_labelled = true;
  bool use_mch_fake_labelled = true;
  bool use_mch_fake_unlabelled = true;
  MatchVariant mch_variant = MatchVariant::kConcatCe;
  bool labelled_only_data = false;  // setups A/B discard the unlabelled pool
};

struct ModelConfig {
  int64_t image_size = 32;
  int64_t n_attr = 3;
  int64_t g_base_width = 16;
  int64_t d_base_width = 32;
  int64_t d_depth = 0;  // 0 = auto
  int64_t d_max_width = 2048;
};

template <class T>
struct TrainingConfig {
  int64_t total_iters = 200000;   // N, counts discriminator updates
  int64_t batch_size = 16;        // B
  int64_t classes_per_batch = 4;  // k
  int64_t d_per_g = 5;            // n_G
  T lr_g = T(1e-4);
  T lr_d = T(1e-4);
  T adam_beta1 = T(0.5);
  T adam_beta2 = T(0.999);
  int64_t decay_start = 0;  // 0 -> total_iters / 2
  LossWeights<T> weights;
  T triplet_margin = T(1);  // setup H
  AblationSwitches ablation;
  uint64_t seed = 0;
  int64_t log_interval = 10;
  int64_t checkpoint_interval = 10000;
  int64_t sample_interval = 1000;

  int64_t decay_start_or_default() const {
    return decay_start > 0 ? decay_start : total_iters / 2;
  }
  void validate() const {
    require(batch_size % classes_per_batch == 0, ErrorKind::InvalidArgument,
            "B must be divisible by k");
    require(d_per_g >= 1, ErrorKind::InvalidArgument, "n_G must be >= 1");
    require(decay_start_or_default() <= total_iters,
            ErrorKind::InvalidArgument, "decay_start must be <= N");
    weights.validate();
  }
};

/// Constant lr up to decay_start, then linear to 0 at N.
template <class T>
T lr_at(int64_t i, T lr0, const TrainingConfig<T>& cfg) {
  const int64_t ds = cfg.decay_start_or_default();
  if (i <= ds) return lr0;
  const double frac = double(cfg.total_iters - i) / double(cfg.total_iters - ds);
  return static_cast<T>(double(lr0) * frac);
}

/// Images fed into the match loss, per data pool (the criterion-9
/// instrumentation).
struct MatchCounters {
  int64_t real_labelled = 0;
  int64_t fake_labelled = 0;
  int64_t fake_unlabelled = 0;
};

/// Per-iteration record for the metrics log and the schedule-trace oracle.
struct StepRecord {
  int64_t iteration = 0;
  double lr_d = 0, lr_g = 0;
  std::optional<double> adv_d, cls_d, mch_d, adv_g, cls_g, mch_g, cyc;
  bool g_updated = false;
  double wall_time_s = 0;

  /// Canonical presence list, e.g. {"adv_d","cls_d","mch_d"}.
  std::vector<std::string> terms() const {
    std::vector<std::string> t;
    if (adv_d) t.push_back("adv_d");
    if (cls_d) t.push_back("cls_d");
    if (mch_d) t.push_back("mch_d");
    if (adv_g) t.push_back("adv_g");
    if (cls_g) t.push_back("cls_g");
    if (mch_g) t.push_back("mch_g");
    if (cyc) t.push_back("cyc");
    return t;
  }

  bool all_finite() const {
    for (const auto& v : {adv_d, cls_d, mch_d, adv_g, cls_g, mch_g, cyc})
      if (v && !std::isfinite(*v)) return false;
    return true;
  }
};

template <class T>
struct TrainState {
  ModelConfig model;
  std::unique_ptr<Generator<T>> G;
  std::unique_ptr<Discriminator<T>> D;
  std::unique_ptr<MatchHead<T>> head;
  Adam<T> opt_g, opt_d;
  Rng rng_data, rng_target, rng_gp;
  int64_t iteration = 0;
  MatchCounters counters;

  std::vector<Param<T>*> d_side_params() {
    auto ps = D->parameters();
    for (auto* p : head->parameters()) ps.push_back(p);
    return ps;
  }
  void zero_all_grads() {
    G->zero_grad();
    D->zero_grad();
    head->zero_grad();
  }
};

template <class T>
TrainState<T> init_train_state(const ModelConfig& model,
                               const TrainingConfig<T>& cfg) {
  cfg.validate();
  TrainState<T> s;
  s.model = model;
  s.G = std::make_unique<Generator<T>>(GeneratorConfig{
      model.image_size, model.n_attr, model.g_base_width, cfg.seed});
  s.D = std::make_unique<Discriminator<T>>(
      DiscriminatorConfig{model.image_size, model.n_attr, model.d_base_width,
                          model.d_depth, model.d_max_width, cfg.seed});
  s.head = std::make_unique<MatchHead<T>>(s.D->emb_channels(),
                                          s.D->emb_spatial(), cfg.seed);
  s.opt_g = Adam<T>(s.G->parameters(), cfg.adam_beta1, cfg.adam_beta2);
  s.opt_d = Adam<T>(s.d_side_params(), cfg.adam_beta1, cfg.adam_beta2);
  Rng root(cfg.seed);
  s.rng_data = root.stream("data");
  s.rng_target = root.stream("target");
  s.rng_gp = root.stream("gp");
  return s;
}

namespace detail {

/// Even iterations draw from the unlabelled pool; with no unlabelled data
/// (100%-labelled or labelled-only setups) they draw labelled refs used
/// without their labels.
inline std::vector<ImageRefId> sample_unlabelled_refs(
    const DatasetPartition& partition, int64_t B, Rng& rng) {
  if (!partition.unlabelled.empty()) {
    std::vector<ImageRefId> out;
    for (int64_t i = 0; i < B; ++i)
      out.push_back(
          partition.unlabelled[rng.uniform_int(partition.unlabelled.size())]);
    return out;
  }
  std::vector<ImageRefId> all;
  for (const auto& g : partition.labelled)
    all.insert(all.end(), g.begin(), g.end());
  require(!all.empty(), ErrorKind::EmptyPool, "partition has no images");
  std::vector<ImageRefId> out;
  for (int64_t i = 0; i < B; ++i)
    out.push_back(all[rng.uniform_int(all.size())]);
  return out;
}

}  // namespace detail

/// One Algorithm-1 iteration: always a D update; a G update when the
/// iteration index is a multiple of n_G. Odd iterations carry source labels
/// (classification, real-triplet match, cycle); even iterations are
/// unlabelled.
template <class T>
StepRecord train_step(TrainState<T>& state, const TrainingConfig<T>& cfg,
                      const Dataset<T>& dataset,
                      const DatasetPartition& partition) {
  const auto t0 = std::chrono::steady_clock::now();
  const int64_t i = state.iteration + 1;
  const bool odd = (i % 2) == 1;
  const int64_t B = cfg.batch_size, k = cfg.classes_per_batch;
  const LabelEncoding enc = partition.schema.encoding;
  const MatchVariant variant = cfg.ablation.mch_variant;

  StepRecord rec;
  rec.iteration = i;
  rec.lr_d = double(lr_at(i, cfg.lr_d, cfg));
  rec.lr_g = double(lr_at(i, cfg.lr_g, cfg));

  // --- source batch ---
  std::vector<ImageRefId> refs;
  std::vector<int> class_of;
  std::optional<Tensor<T>> src_labels;
  if (odd) {
    auto lb = sample_labelled_batch(partition, B, k, state.rng_data);
    refs = std::move(lb.refs);
    class_of = std::move(lb.class_of);
    src_labels = labels_to_tensor<T>(partition.classes, class_of);
  } else {
    refs = detail::sample_unlabelled_refs(partition, B, state.rng_data);
  }
  Tensor<T> x = dataset.batch(refs, &state.rng_data);

  // --- target labels, independent stream, spread over batch positions ---
  auto tb = sample_target_batch(partition.classes, B, k, state.rng_target);
  std::vector<int> trg_class = std::move(tb.class_ids);
  state.rng_target.shuffle(trg_class);
  Tensor<T> ytrg = labels_to_tensor<T>(partition.classes, trg_class);

  // --- D update (fakes detached from G) ---
  Tensor<T> fake = state.G->infer(x, ytrg);
  {
    Graph<T> g;
    VarId real_id = g.leaf(x);
    VarId fake_id = g.leaf(fake);
    auto out_real = state.D->forward(g, real_id);
    auto out_fake = state.D->forward(g, fake_id);
    VarId adv = adv_loss_D_from_scores(g, *state.D, out_real.adv,
                                       out_fake.adv, x, fake,
                                       cfg.weights.lambda_gp, state.rng_gp);
    rec.adv_d = double(g.val(adv)[0]);
    std::optional<VarId> cls, mch;
    if (odd) {
      cls = cls_loss_from_logits(g, out_real.cls, *src_labels, enc);
      rec.cls_d = double(g.val(*cls)[0]);
      if (cfg.ablation.use_mch_real_labelled &&
          variant != MatchVariant::kOff) {
        auto groups = BatchGroups::from_flat(class_of);
        auto tr = build_real_triplets(groups, state.rng_data);
        mch = variant == MatchVariant::kConcatCe
                  ? match_loss_on_embeddings(g, *state.head, out_real.emb, tr)
                  : euclidean_triplet_loss_on_embeddings(
                        g, out_real.emb, tr, cfg.triplet_margin);
        rec.mch_d = double(g.val(*mch)[0]);
        state.counters.real_labelled += B;
      }
    }
    VarId loss = total_loss_D(g, adv, cls, mch, cfg.weights, odd);
    state.zero_all_grads();
    g.backward(loss);
    state.opt_d.step(lr_at(i, cfg.lr_d, cfg));
  }

  // --- G update on multiples of n_G ---
  if (i % cfg.d_per_g == 0) {
    Graph<T> g;
    VarId x_id = g.leaf(x);
    VarId fake_id = state.G->forward(g, x_id, ytrg);
    auto out = state.D->forward(g, fake_id);
    VarId adv = adv_loss_G(g, out.adv);
    rec.adv_g = double(g.val(adv)[0]);
    VarId cls = cls_loss_from_logits(g, out.cls, ytrg, enc);
    rec.cls_g = double(g.val(cls)[0]);
    std::optional<VarId> mch, cyc;
    const bool use_fake_mch = odd ? cfg.ablation.use_mch_fake_labelled
                                  : cfg.ablation.use_mch_fake_unlabelled;
    if (use_fake_mch && variant != MatchVariant::kOff) {
      auto fgroups = BatchGroups::from_flat(trg_class);
      auto tf = build_fake_triplets(fgroups, state.rng_data);
      mch = variant == MatchVariant::kConcatCe
                ? match_loss_on_embeddings(g, *state.head, out.emb, tf)
                : euclidean_triplet_loss_on_embeddings(g, out.emb, tf,
                                                       cfg.triplet_margin);
      rec.mch_g = double(g.val(*mch)[0]);
      (odd ? state.counters.fake_labelled : state.counters.fake_unlabelled) +=
          B;
    }
    if (odd) {
      cyc = cycle_loss_from_fake(g, *state.G, x_id, fake_id, src_labels);
      rec.cyc = double(g.val(*cyc)[0]);
    }
    VarId loss = total_loss_G(g, adv, cls, mch, cyc, cfg.weights, odd);
    state.zero_all_grads();
    g.backward(loss);
    state.opt_g.step(lr_at(i, cfg.lr_g, cfg));
    rec.g_updated = true;
  }

  state.iteration = i;
  rec.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return rec;
}

template <class T>
struct TrainHooks {
  std::function<void(const StepRecord&)> on_record;
  std::function<void(TrainState<T>&)> on_checkpoint;
  std::function<void(TrainState<T>&)> on_sample;
};

/// Runs Algorithm 1 up to `until_iter` (capped at cfg.total_iters).
template <class T>
void train(TrainState<T>& state, const TrainingConfig<T>& cfg,
           const Dataset<T>& dataset, const DatasetPartition& partition,
           int64_t until_iter, const TrainHooks<T>& hooks = {}) {
  cfg.validate();
  require(partition.labelled_count() > 0, ErrorKind::EmptyPool,
          "train: labelled pool is empty");
  const int64_t stop = std::min(until_iter, cfg.total_iters);
  while (state.iteration < stop) {
    StepRecord rec = train_step(state, cfg, dataset, partition);
    if (hooks.on_record) hooks.on_record(rec);
    if (hooks.on_checkpoint && rec.iteration % cfg.checkpoint_interval == 0)
      hooks.on_checkpoint(state);
    if (hooks.on_sample && rec.iteration % cfg.sample_interval == 0)
      hooks.on_sample(state);
  }
}

/// Table-1 setups. A/C are the baseline (match loss off); D-H vary which
/// pools feed the match loss; H swaps in the Euclidean triplet objective.
template <class T>
TrainingConfig<T> ablation_setup(char letter, TrainingConfig<T> cfg) {
  auto& ab = cfg.ablation;
  ab = AblationSwitches{};
  switch (letter) {
    case 'A':
      ab.mch_variant = MatchVariant::kOff;
      ab.use_mch_real_labelled = ab.use_mch_fake_labelled =
          ab.use_mch_fake_unlabelled = false;
      ab.labelled_only_data = true;
      break;
    case 'B':
      ab.use_mch_fake_unlabelled = false;
      ab.labelled_only_data = true;
      break;
    case 'C':
      ab.mch_variant = MatchVariant::kOff;
      ab.use_mch_real_labelled = ab.use_mch_fake_labelled =
          ab.use_mch_fake_unlabelled = false;
      break;
    case 'D':
      ab.use_mch_real_labelled = false;
      break;
    case 'E':
      ab.use_mch_fake_labelled = ab.use_mch_fake_unlabelled = false;
      break;
    case 'F':
      ab.use_mch_fake_unlabelled = false;
      break;
    case 'G':
      break;
    case 'H':
      ab.mch_variant = MatchVariant::kEuclideanTriplet;
      break;
    default:
      fail(ErrorKind::InvalidArgument,
           std::string("unknown ablation setup: ") + letter);
  }
  return cfg;
}

/// Drops the unlabelled pool for labelled-only setups (A/B).
inline DatasetPartition apply_data_regime(DatasetPartition part,
                                          const AblationSwitches& ab) {
  if (ab.labelled_only_data) part.unlabelled.clear();
  return part;
}

// ---------------------------------------------------------------------------
// checkpointing
// ---------------------------------------------------------------------------

template <class T>
void save_checkpoint(const std::string& path, TrainState<T>& state,
                     const TrainingConfig<T>& cfg) {
  CheckpointWriter w;
  w.manifest["format"] = "matchgan-checkpoint";
  w.manifest["dtype"] = sizeof(T) == 4 ? "f32" : "f64";
  w.manifest["iteration"] = state.iteration;
  w.manifest["seed"] = cfg.seed;
  w.manifest["model"] = {{"image_size", state.model.image_size},
                         {"n_attr", state.model.n_attr},
                         {"g_base_width", state.model.g_base_width},
                         {"d_base_width", state.model.d_base_width},
                         {"d_depth", state.model.d_depth},
                         {"d_max_width", state.model.d_max_width}};
  w.manifest["rng"] = {{"data", rng_state_json(state.rng_data)},
                       {"target", rng_state_json(state.rng_target)},
                       {"gp", rng_state_json(state.rng_gp)}};
  w.manifest["adam"] = {{"t_g", state.opt_g.t()}, {"t_d", state.opt_d.t()}};
  w.manifest["counters"] = {
      {"mch_real_labelled", state.counters.real_labelled},
      {"mch_fake_labelled", state.counters.fake_labelled},
      {"mch_fake_unlabelled", state.counters.fake_unlabelled}};

  for (auto* p : state.G->parameters()) w.add(p->name, p->value);
  for (auto* p : state.d_side_params()) w.add(p->name, p->value);
  auto add_opt = [&](Adam<T>& opt, const std::string& prefix) {
    const auto& ps = opt.params();
    for (size_t j = 0; j < ps.size(); ++j) {
      w.add(prefix + ".m." + ps[j]->name, opt.m()[j]);
      w.add(prefix + ".v." + ps[j]->name, opt.v()[j]);
    }
  };
  add_opt(state.opt_g, "adam_g");
  add_opt(state.opt_d, "adam_d");
  w.write(path);
}

template <class T>
TrainState<T> load_checkpoint(const std::string& path,
                              const TrainingConfig<T>& cfg) {
  CheckpointReader r(path);
  require(r.manifest.at("dtype") == (sizeof(T) == 4 ? "f32" : "f64"),
          ErrorKind::IoError, "checkpoint precision mismatch");
  ModelConfig model;
  const auto& m = r.manifest.at("model");
  model.image_size = m.at("image_size");
  model.n_attr = m.at("n_attr");
  model.g_base_width = m.at("g_base_width");
  model.d_base_width = m.at("d_base_width");
  model.d_depth = m.at("d_depth");
  model.d_max_width = m.at("d_max_width");

  TrainingConfig<T> build_cfg = cfg;
  build_cfg.seed = r.manifest.at("seed");
  TrainState<T> s = init_train_state(model, build_cfg);
  s.iteration = r.manifest.at("iteration");
  s.rng_data = rng_from_json(r.manifest.at("rng").at("data"));
  s.rng_target = rng_from_json(r.manifest.at("rng").at("target"));
  s.rng_gp = rng_from_json(r.manifest.at("rng").at("gp"));
  s.opt_g.set_t(r.manifest.at("adam").at("t_g"));
  s.opt_d.set_t(r.manifest.at("adam").at("t_d"));
  const auto& c = r.manifest.at("counters");
  s.counters.real_labelled = c.at("mch_real_labelled");
  s.counters.fake_labelled = c.at("mch_fake_labelled");
  s.counters.fake_unlabelled = c.at("mch_fake_unlabelled");

  for (auto* p : s.G->parameters()) p->value = r.get<T>(p->name);
  for (auto* p : s.d_side_params()) p->value = r.get<T>(p->name);
  auto load_opt = [&](Adam<T>& opt, const std::string& prefix) {
    const auto& ps = opt.params();
    for (size_t j = 0; j < ps.size(); ++j) {
      opt.m()[j] = r.get<T>(prefix + ".m." + ps[j]->name);
      opt.v()[j] = r.get<T>(prefix + ".v." + ps[j]->name);
    }
  };
  load_opt(s.opt_g, "adam_g");
  load_opt(s.opt_d, "adam_d");
  return s;
}

}  // namespace matchgan

#endif  // MATCHGAN_TRAINER_HPP_
