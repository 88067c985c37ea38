// matchgan: train / eval / grid entry points.
//
//   matchgan train --config desk.cfg --setup G --out runs/g
//   matchgan eval  --run runs/g --metrics fid,is,gan_test
//   matchgan grid  --run runs/g --inputs 8 --targets all --grid-out grid.png

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "matchgan/experiment.hpp"

namespace fs = std::filesystem;
using namespace matchgan;

namespace {

struct FlagOverrides {
  std::string config_path;
  std::string dataset, setup, out, precision;
  double percent_labelled = -1, lambda_mch = -1;
  int64_t iters = -1, batch_size = -1;
  int64_t seed = -1;

  ExperimentConfig resolve() const {
    KvConfig kv;
    if (!config_path.empty()) kv = KvConfig::parse_file(config_path);
    ExperimentConfig cfg = ExperimentConfig::from_kv(kv);
    if (!dataset.empty()) cfg.dataset = dataset;
    if (percent_labelled >= 0) cfg.percent_labelled = percent_labelled;
    if (!setup.empty()) {
      require(setup.size() == 1 && setup[0] >= 'A' && setup[0] <= 'H',
              ErrorKind::InvalidArgument, "--setup must be A..H");
      cfg.setup = setup[0];
    }
    if (lambda_mch >= 0) cfg.lambda_mch = lambda_mch;
    if (iters >= 0) cfg.iters = iters;
    if (batch_size >= 0) cfg.batch_size = batch_size;
    if (seed >= 0) cfg.seed = uint64_t(seed);
    if (!precision.empty()) cfg.precision = precision;
    if (!out.empty()) {
      cfg.out_dir = out;
    } else if (!kv.has("out.dir")) {
      const char* root = std::getenv("MATCHGAN_OUT");
      cfg.out_dir = std::string(root ? root : "runs") + "/exp";
    }
    return cfg;
  }
};

nlohmann::json record_json(const StepRecord& r) {
  nlohmann::json j;
  j["iter"] = r.iteration;
  j["lr_d"] = r.lr_d;
  j["lr_g"] = r.lr_g;
  auto put = [&](const char* k, const std::optional<double>& v) {
    if (v) j[k] = *v;
  };
  put("adv_d", r.adv_d);
  put("cls_d", r.cls_d);
  put("mch_d", r.mch_d);
  put("adv_g", r.adv_g);
  put("cls_g", r.cls_g);
  put("mch_g", r.mch_g);
  put("cyc", r.cyc);
  j["wall_time_s"] = r.wall_time_s;
  return j;
}

/// Grid layout: rows = target manipulations, columns = inputs plus a leading
/// source column (row r shows input r mod n there).
template <class T>
void emit_grid(const std::string& path, Generator<T>& G,
               const Dataset<T>& dataset,
               const std::vector<ImageRefId>& inputs,
               const std::vector<int>& target_classes,
               const LabelClasses& classes) {
  require(!target_classes.empty(), ErrorKind::InvalidArgument,
          "grid: empty target list");
  require(!inputs.empty(), ErrorKind::InvalidArgument, "grid: no inputs");
  const int64_t n = int64_t(inputs.size());
  Tensor<T> x = dataset.batch(inputs, nullptr);
  std::vector<Tensor<T>> tiles;
  const int64_t S = dataset.image_size();
  for (size_t r = 0; r < target_classes.size(); ++r) {
    tiles.push_back(dataset.image(inputs[r % size_t(n)], nullptr));
    std::vector<int> cls(size_t(n), target_classes[r]);
    Tensor<T> y = labels_to_tensor<T>(classes, cls);
    Tensor<T> fake = G.infer(x, y);
    for (int64_t i = 0; i < n; ++i) {
      Tensor<T> tile({3, S, S});
      std::copy(fake.data() + i * 3 * S * S,
                fake.data() + (i + 1) * 3 * S * S, tile.data());
      tiles.push_back(std::move(tile));
    }
  }
  write_grid_png(path, tiles, int64_t(target_classes.size()), n + 1);
}

template <class T>
int run_train(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  {
    std::ofstream rc(cfg.out_dir + "/resolved.cfg");
    rc << cfg.to_kv().dump();
  }
  Experiment<T> ex = build_experiment<T>(cfg);
  auto tcfg = training_config<T>(cfg);
  DatasetPartition part = apply_data_regime(ex.partition, tcfg.ablation);
  {
    std::vector<std::string> names;
    for (int64_t i = 0; i < ex.dataset->size(); ++i)
      names.push_back("img" + std::to_string(i));
    write_partition_manifest(part, names, cfg.out_dir + "/partition.tsv");
  }

  auto state = init_train_state(model_config(cfg), tcfg);
  std::ofstream log(cfg.out_dir + "/metrics.jsonl");
  const auto t_start = std::chrono::steady_clock::now();

  TrainHooks<T> hooks;
  hooks.on_record = [&](const StepRecord& r) {
    if (r.iteration % cfg.log_interval == 0 || r.iteration == 1) {
      log << record_json(r).dump() << "\n";
      log.flush();
    }
    if (r.iteration % 500 == 0) {
      const double el = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t_start)
                            .count();
      std::cout << "iter " << r.iteration << "/" << tcfg.total_iters
                << "  adv_d=" << (r.adv_d ? *r.adv_d : 0.0)
                << "  elapsed=" << int(el) << "s" << std::endl;
    }
  };
  hooks.on_checkpoint = [&](TrainState<T>& st) {
    save_checkpoint(cfg.out_dir + "/ck_" + std::to_string(st.iteration) +
                        ".bin",
                    st, tcfg);
    save_checkpoint(cfg.out_dir + "/ck_latest.bin", st, tcfg);
  };
  hooks.on_sample = [&](TrainState<T>& st) {
    std::vector<ImageRefId> inputs;
    const auto& pool = ex.test_refs.empty() ? ex.train_refs : ex.test_refs;
    for (size_t i = 0; i < std::min<size_t>(8, pool.size()); ++i)
      inputs.push_back(pool[i]);
    std::vector<int> targets;
    for (int c = 0; c < std::min(8, part.classes.K()); ++c)
      targets.push_back(c);
    emit_grid(cfg.out_dir + "/sample_" + std::to_string(st.iteration) +
                  ".png",
              *st.G, *ex.dataset, inputs, targets, part.classes);
  };

  train(state, tcfg, *ex.dataset, part, tcfg.total_iters, hooks);
  save_checkpoint(cfg.out_dir + "/ck_latest.bin", state, tcfg);
  std::cout << "done: " << state.iteration << " iterations, outputs in "
            << cfg.out_dir << "\n";
  return 0;
}

template <class T>
int run_eval(const ExperimentConfig& cfg, const std::string& ck_path,
             const std::string& metrics_csv, const std::string& report_path) {
  Experiment<T> ex = build_experiment<T>(cfg);
  auto tcfg = training_config<T>(cfg);
  auto state = load_checkpoint<T>(ck_path, tcfg);
  const LabelClasses& classes = ex.partition.classes;
  Translator<T> translate = [&](const Tensor<T>& x, const Tensor<T>& y) {
    return state.G->infer(x, y);
  };
  auto extractor = build_extractor(ex);

  std::vector<std::string> wanted;
  {
    std::istringstream is(metrics_csv);
    std::string tok;
    while (std::getline(is, tok, ',')) wanted.push_back(tok);
  }
  const std::string hash = cfg.to_kv().hash();
  nlohmann::json report = nlohmann::json::array();
  auto add = [&](const std::string& name, double value) {
    nlohmann::json j{{"metric", name},
                     {"value", value},
                     {"iteration", state.iteration},
                     {"config_hash", hash}};
    report.push_back(j);
    std::cout << name << " = " << value << "\n";
  };

  for (const auto& m : wanted) {
    if (m == "fid") {
      auto fid = fid_protocol<T>(translate, *ex.dataset, ex.test_refs,
                                 classes, extractor, cfg.eval_batch);
      add("fid", fid.fid);
      for (size_t c = 0; c < fid.per_domain.size(); ++c)
        add("fid.domain" + std::to_string(c), fid.per_domain[c]);
    } else if (m == "is") {
      // class posteriors over the pooled translations of the test set
      std::vector<Tensor<double>> rows;
      int64_t total = 0;
      for (size_t start = 0; start < ex.test_refs.size();
           start += size_t(cfg.eval_batch)) {
        const size_t end =
            std::min(ex.test_refs.size(), start + size_t(cfg.eval_batch));
        std::vector<ImageRefId> chunk(ex.test_refs.begin() + int64_t(start),
                                      ex.test_refs.begin() + int64_t(end));
        Tensor<T> x = ex.dataset->batch(chunk, nullptr);
        for (int c = 0; c < classes.K(); ++c) {
          std::vector<int> cls(chunk.size(), c);
          Tensor<T> fake = translate(x, labels_to_tensor<T>(classes, cls));
          rows.push_back(extractor.classify(fake));
          total += rows.back().shape[0];
        }
      }
      Tensor<double> probs({total, int64_t(classes.K())});
      int64_t at = 0;
      for (const auto& r : rows) {
        std::copy(r.v.begin(), r.v.end(), probs.v.begin() + at);
        at += r.numel();
      }
      auto [mean, stdev] = inception_score(probs, 10);
      add("is", mean);
      add("is.std", stdev);
    } else if (m == "gan_train" || m == "gan_test") {
      std::vector<ImageRefId> labelled;
      for (const auto& grp : ex.partition.labelled)
        labelled.insert(labelled.end(), grp.begin(), grp.end());
      ClassifierSpec spec;
      spec.epochs = cfg.classifier_epochs;
      spec.seed = cfg.data_seed ^ 0x6A9ULL;
      const double acc =
          m == "gan_train"
              ? gan_train<T>(translate, *ex.dataset, labelled, ex.test_refs,
                             classes, spec)
              : gan_test<T>(translate, *ex.dataset, labelled, ex.test_refs,
                            classes, spec);
      add(m, acc);
    } else if (m == "match_acc") {
      Rng rng(cfg.data_seed ^ 0x3A7ULL);
      add("match_acc",
          match_pair_accuracy(*state.D, *state.head, *ex.dataset,
                              ex.test_refs, classes, 512, rng));
    } else {
      fail(ErrorKind::InvalidArgument, "unknown metric: " + m);
    }
  }
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    for (const auto& j : report) out << j.dump() << "\n";
  }
  return 0;
}

template <class T>
int run_grid(const ExperimentConfig& cfg, const std::string& ck_path,
             int64_t n_inputs, const std::string& targets_arg,
             const std::string& out_path) {
  Experiment<T> ex = build_experiment<T>(cfg);
  auto tcfg = training_config<T>(cfg);
  auto state = load_checkpoint<T>(ck_path, tcfg);
  const LabelClasses& classes = ex.partition.classes;

  std::vector<int> targets;
  if (targets_arg == "all") {
    for (int c = 0; c < classes.K(); ++c) targets.push_back(c);
  } else {
    std::istringstream is(targets_arg);
    std::string tok;
    while (std::getline(is, tok, ',')) targets.push_back(std::stoi(tok));
  }
  require(!targets.empty(), ErrorKind::InvalidArgument,
          "grid: empty target list");
  for (int c : targets)
    require(c >= 0 && c < classes.K(), ErrorKind::InvalidArgument,
            "grid: target class out of range");

  const auto& pool = ex.test_refs.empty() ? ex.train_refs : ex.test_refs;
  std::vector<ImageRefId> inputs;
  for (int64_t i = 0; i < std::min<int64_t>(n_inputs, int64_t(pool.size()));
       ++i)
    inputs.push_back(pool[size_t(i)]);
  emit_grid(out_path, *state.G, *ex.dataset, inputs, targets, classes);
  std::cout << "wrote " << out_path << " (" << targets.size() << "x"
            << inputs.size() + 1 << " tiles)\n";
  return 0;
}

std::string checkpoint_dtype(const std::string& path) {
  CheckpointReader r(path);
  return r.manifest.at("dtype");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MatchGAN training and evaluation"};
  app.require_subcommand(1);

  FlagOverrides fl;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", fl.config_path, "key=value config file");
    sub->add_option("--dataset", fl.dataset, "synthetic | image_folder");
    sub->add_option("--percent-labelled", fl.percent_labelled,
                    "labelled fraction (0,1]");
    sub->add_option("--setup", fl.setup, "ablation setup A..H");
    sub->add_option("--lambda-mch", fl.lambda_mch, "match loss weight");
    sub->add_option("--iters", fl.iters, "total D iterations");
    sub->add_option("--batch-size", fl.batch_size, "batch size B");
    sub->add_option("--seed", fl.seed, "training seed");
    sub->add_option("--precision", fl.precision, "f32 | f64");
    sub->add_option("--out", fl.out, "output directory");
  };

  auto* tr = app.add_subcommand("train", "run Algorithm-1 training");
  add_common(tr);

  auto* ev = app.add_subcommand("eval", "compute metrics for a checkpoint");
  add_common(ev);
  std::string ck_path, run_dir, metrics_csv = "fid,is,gan_train,gan_test";
  std::string report_path;
  ev->add_option("--checkpoint", ck_path, "checkpoint file");
  ev->add_option("--run", run_dir, "run dir (uses resolved.cfg + ck_latest)");
  ev->add_option("--metrics", metrics_csv,
                 "comma list: fid,is,gan_train,gan_test,match_acc");
  ev->add_option("--report", report_path, "write JSONL report here");

  auto* gr = app.add_subcommand("grid", "emit a translation sample grid");
  add_common(gr);
  int64_t n_inputs = 8;
  std::string targets_arg = "all", grid_out = "grid.png";
  gr->add_option("--checkpoint", ck_path, "checkpoint file");
  gr->add_option("--run", run_dir, "run dir (uses resolved.cfg + ck_latest)");
  gr->add_option("--inputs", n_inputs, "number of input columns");
  gr->add_option("--targets", targets_arg, "'all' or comma class indices");
  gr->add_option("--grid-out", grid_out, "output PNG path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!run_dir.empty()) {
      if (fl.config_path.empty()) fl.config_path = run_dir + "/resolved.cfg";
      if (ck_path.empty()) ck_path = run_dir + "/ck_latest.bin";
    }
    ExperimentConfig cfg = fl.resolve();
    if (app.got_subcommand(tr)) {
      if (cfg.precision == "f64") return run_train<double>(cfg);
      return run_train<float>(cfg);
    }
    require(!ck_path.empty(), ErrorKind::InvalidArgument,
            "--checkpoint or --run is required");
    const std::string dtype = checkpoint_dtype(ck_path);
    if (app.got_subcommand(ev)) {
      return dtype == "f64"
                 ? run_eval<double>(cfg, ck_path, metrics_csv, report_path)
                 : run_eval<float>(cfg, ck_path, metrics_csv, report_path);
    }
    return dtype == "f64" ? run_grid<double>(cfg, ck_path, n_inputs,
                                             targets_arg, grid_out)
                          : run_grid<float>(cfg, ck_path, n_inputs,
                                            targets_arg, grid_out);
  } catch (const MgError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
