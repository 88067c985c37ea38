#ifndef MATCHGAN_EXPERIMENT_HPP_
#define MATCHGAN_EXPERIMENT_HPP_

#include <memory>

#include "matchgan/config.hpp"
#include "matchgan/metrics.hpp"
#include "matchgan/trainer.hpp"

// Assembles datasets, partitions and trainer/metric configs from an
// ExperimentConfig. Shared by the CLI and the acceptance suite so both drive
// the exact same pipeline.

namespace matchgan {

template <class T>
struct Experiment {
  ExperimentConfig cfg;
  AttributeSchema schema;
  std::unique_ptr<Dataset<T>> dataset;
  std::vector<ImageRefId> train_refs, test_refs;
  DatasetPartition partition;  // over the train refs
};

template <class T>
Experiment<T> build_experiment(const ExperimentConfig& cfg) {
  Experiment<T> ex;
  ex.cfg = cfg;
  ex.schema = cfg.schema();
  if (cfg.dataset == "synthetic") {
    auto spec = SyntheticSpec::make_default(cfg.image_size, int(cfg.n_attr),
                                            cfg.synthetic_noise);
    ex.dataset = std::make_unique<SyntheticDataset<T>>(
        spec, ex.schema, cfg.synthetic_train + cfg.synthetic_test,
        cfg.data_seed);
    for (int64_t i = 0; i < cfg.synthetic_train; ++i)
      ex.train_refs.push_back(i);
    for (int64_t i = 0; i < cfg.synthetic_test; ++i)
      ex.test_refs.push_back(cfg.synthetic_train + i);
  } else if (cfg.dataset == "image_folder") {
    auto idx = load_image_folder(cfg.image_dir, cfg.attribute_file, ex.schema);
    ex.dataset = std::make_unique<ImageFolderDataset<T>>(
        std::move(idx), ex.schema, cfg.crop_size, cfg.image_size,
        cfg.train_flip);
    const int64_t n = ex.dataset->size();
    const int64_t test_n = std::llround(cfg.test_fraction * double(n));
    for (int64_t i = 0; i < n - test_n; ++i) ex.train_refs.push_back(i);
    for (int64_t i = n - test_n; i < n; ++i) ex.test_refs.push_back(i);
  } else {
    fail(ErrorKind::InvalidArgument, "unknown dataset: " + cfg.dataset);
  }
  std::vector<LabelledExample> pairs;
  for (auto r : ex.train_refs) pairs.emplace_back(r, ex.dataset->label(r));
  ex.partition = split_semi_supervised(pairs, cfg.percent_labelled,
                                       cfg.data_seed, ex.schema);
  return ex;
}

inline ModelConfig model_config(const ExperimentConfig& cfg) {
  ModelConfig m;
  m.image_size = cfg.image_size;
  m.n_attr = cfg.n_attr;
  m.g_base_width = cfg.g_base_width;
  m.d_base_width = cfg.d_base_width;
  m.d_depth = cfg.d_depth;
  m.d_max_width = cfg.d_max_width;
  return m;
}

template <class T>
TrainingConfig<T> training_config(const ExperimentConfig& cfg) {
  TrainingConfig<T> t;
  t.total_iters = cfg.iters;
  t.batch_size = cfg.batch_size;
  t.classes_per_batch = cfg.classes_per_batch;
  t.d_per_g = cfg.d_per_g;
  t.lr_g = T(cfg.lr_g);
  t.lr_d = T(cfg.lr_d);
  t.adam_beta1 = T(cfg.adam_beta1);
  t.adam_beta2 = T(cfg.adam_beta2);
  t.decay_start = cfg.decay_start;
  t.weights.lambda_cls = T(cfg.lambda_cls);
  t.weights.lambda_cyc = T(cfg.lambda_cyc);
  t.weights.lambda_gp = T(cfg.lambda_gp);
  t.weights.lambda_mch = T(cfg.lambda_mch);
  t.triplet_margin = T(cfg.triplet_margin);
  t.seed = cfg.seed;
  t.log_interval = cfg.log_interval;
  t.checkpoint_interval = cfg.checkpoint_interval;
  t.sample_interval = cfg.sample_interval;
  return ablation_setup(cfg.setup, t);
}

/// Deterministic default extractor: a SmallCnn trained on held-out synthetic
/// data (or on the labelled pool for folder datasets).
template <class T>
SmallCnnExtractor<T> build_extractor(Experiment<T>& ex) {
  const ExperimentConfig& cfg = ex.cfg;
  const LabelClasses& classes = ex.partition.classes;
  ClassifierSpec spec;
  spec.epochs = cfg.classifier_epochs;
  spec.seed = cfg.data_seed ^ 0xE87ULL;
  if (cfg.dataset == "synthetic") {
    auto sspec = SyntheticSpec::make_default(cfg.image_size, int(cfg.n_attr),
                                             cfg.synthetic_noise);
    auto held = std::make_shared<SyntheticDataset<T>>(
        sspec, ex.schema, cfg.extractor_train, cfg.data_seed ^ 0x5EEDULL);
    std::vector<ImageRefId> refs;
    std::vector<int> cls;
    for (int64_t i = 0; i < held->size(); ++i) {
      const int c = classes.index_of(held->label(i));
      if (c < 0) continue;  // class unseen in the labelled pool
      refs.push_back(i);
      cls.push_back(c);
    }
    auto load = [held](const std::vector<ImageRefId>& idxs) {
      return held->batch(idxs, nullptr);
    };
    return SmallCnnExtractor<T>(
        train_small_cnn<T>(load, refs, cls, classes.K(), spec), classes.K());
  }
  std::vector<ImageRefId> refs;
  std::vector<int> cls;
  for (size_t c = 0; c < ex.partition.labelled.size(); ++c)
    for (auto r : ex.partition.labelled[c]) {
      refs.push_back(r);
      cls.push_back(int(c));
    }
  const Dataset<T>* ds = ex.dataset.get();
  auto load = [ds](const std::vector<ImageRefId>& idxs) {
    return ds->batch(idxs, nullptr);
  };
  return SmallCnnExtractor<T>(
      train_small_cnn<T>(load, refs, cls, classes.K(), spec), classes.K());
}

}  // namespace matchgan

#endif  // MATCHGAN_EXPERIMENT_HPP_
