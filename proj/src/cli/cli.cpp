#include "usmae/cli/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

#include "usmae/cli/config.hpp"
#include "usmae/data/dataset.hpp"
#include "usmae/data/phantom.hpp"
#include "usmae/data/preprocess.hpp"
#include "usmae/data/split.hpp"
#include "usmae/errors.hpp"
#include "usmae/metrics/metrics.hpp"
#include "usmae/metrics/report.hpp"
#include "usmae/optim/checkpoint.hpp"
#include "usmae/optim/train.hpp"
#include "usmae/scorecam/scorecam.hpp"

namespace usmae::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Raised for bad invocations and configuration; maps to the usage exit code.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunFlags {
  std::string config;
  std::optional<std::string> manifest, task, out, from_checkpoint;
  std::optional<std::size_t> folds, repeats, epochs, batch, image_size, patch;
  std::optional<double> lr, wd, mask_ratio;
  std::optional<std::uint64_t> seed;
  bool group_split = false;
  std::vector<double> lr_grid, wd_grid;
};

enum FlagSet : unsigned {
  kCommon = 1,  // config, manifest, seed, out, epochs, batch, lr, wd, image size, patch
  kSplit = 2,   // task, folds, repeats, group split, from checkpoint
  kMask = 4,
  kGrid = 8,
};

void add_run_flags(CLI::App& app, RunFlags& f, unsigned set) {
  app.add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--manifest", f.manifest, "CSV manifest");
  app.add_option("--seed", f.seed, "master seed");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--epochs", f.epochs);
  app.add_option("--batch", f.batch);
  app.add_option("--lr", f.lr);
  app.add_option("--wd", f.wd);
  app.add_option("--image-size", f.image_size);
  app.add_option("--patch", f.patch);
  if (set & kMask) app.add_option("--mask-ratio", f.mask_ratio);
  if (set & kSplit) {
    app.add_option("--task", f.task)->check(CLI::IsMember({"binary", "multiclass"}));
    app.add_option("--folds", f.folds);
    app.add_option("--repeats", f.repeats);
    app.add_option("--from-checkpoint", f.from_checkpoint, "pretrained or fine-tuned checkpoint");
    app.add_flag("--group-split", f.group_split, "keep manifest groups within one subset");
  }
  if (set & kGrid) {
    app.add_option("--lr-grid", f.lr_grid)->delimiter(',');
    app.add_option("--wd-grid", f.wd_grid)->delimiter(',');
  }
}

RunConfig resolve(const RunFlags& f) {
  json o = json::object();
  auto put = [](json& dst, const char* key, const auto& opt) {
    if (opt) dst[key] = *opt;
  };
  put(o, "manifest", f.manifest);
  put(o, "task", f.task);
  put(o, "out", f.out);
  put(o, "from_checkpoint", f.from_checkpoint);
  put(o, "folds", f.folds);
  put(o, "repeats", f.repeats);
  put(o, "seed", f.seed);
  if (f.group_split) o["group_split"] = true;
  if (!f.lr_grid.empty()) o["lr_grid"] = f.lr_grid;
  if (!f.wd_grid.empty()) o["wd_grid"] = f.wd_grid;
  json optim = json::object(), model = json::object();
  put(optim, "epochs", f.epochs);
  put(optim, "batch_size", f.batch);
  put(optim, "learning_rate", f.lr);
  put(optim, "weight_decay", f.wd);
  put(model, "image_size", f.image_size);
  put(model, "patch_size", f.patch);
  put(model, "mask_ratio", f.mask_ratio);
  if (!optim.empty()) o["optim"] = optim;
  if (!model.empty()) o["model"] = model;
  try {
    return load_config(f.config, o);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

fs::path prepare_out(const RunConfig& cfg) {
  require(cfg.manifest, "--manifest");
  require(cfg.out, "--out");
  fs::create_directories(cfg.out);
  save_config(fs::path(cfg.out) / "run.json", cfg);
  return cfg.out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

class EpochLogWriter {
 public:
  explicit EpochLogWriter(const fs::path& path) : f_(path) {
    if (!f_) throw IoError("cannot write " + path.string());
    f_ << "epoch,step,lr,loss,val_accuracy\n";
  }
  void operator()(const optim::EpochLog& e) {
    f_ << e.epoch << ',' << e.step << ',' << fmt(e.lr) << ',' << fmt(e.loss) << ','
       << (e.val_accuracy ? fmt(*e.val_accuracy) : "") << '\n';
    f_.flush();
  }

 private:
  std::ofstream f_;
};

void check_class_coverage(const std::vector<data::SampleRecord>& records, std::size_t k) {
  std::vector<std::size_t> counts(k, 0);
  for (const auto& r : records) ++counts[static_cast<std::size_t>(data::class_index(r.label, k))];
  std::string missing;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] > 0) continue;
    const std::string name = k == 2 ? (c == 0 ? "normal" : "abnormal")
                                    : std::string(data::label_name(static_cast<data::Label>(c)));
    missing += missing.empty() ? name : std::string(", ") + name;
  }
  if (!missing.empty()) {
    throw ContractError("class coverage: a " + std::string(k == 2 ? "binary" : "multiclass") +
                        " task needs every class, but the manifest has no samples of " + missing);
  }
}

// Builds fresh fine-tuning models, optionally from a checkpoint.
class ModelFactory {
 public:
  explicit ModelFactory(RunConfig& cfg) : cfg_(cfg) {
    if (!cfg.from_checkpoint.empty()) {
      ck_ = optim::load_checkpoint(cfg.from_checkpoint);
      const auto k = cfg.num_classes();
      if (ck_->meta.mode == vitmae::ModelMode::finetuning && ck_->meta.model.num_classes != k) {
        throw ContractError("checkpoint classifies " + std::to_string(ck_->meta.model.num_classes) +
                            " classes but the task needs " + std::to_string(k));
      }
      cfg.model = ck_->meta.model;
      cfg.model.num_classes = k;
      cfg.model.seed = cfg.seed;
    }
  }

  vitmae::Model make() const {
    if (!ck_) return vitmae::Model::finetuning(cfg_.model, cfg_.seed);
    auto model = ck_->to_model();
    if (model.mode() == vitmae::ModelMode::pretraining) {
      model.to_finetuning(cfg_.seed, cfg_.num_classes());
    }
    return model;
  }

 private:
  const RunConfig& cfg_;
  std::optional<optim::Checkpoint> ck_;
};

struct LoadedData {
  std::vector<data::SampleRecord> records;
  std::vector<ndgrad::Tensor> tensors;
  std::vector<int> labels;

  optim::LabeledImages subset(std::span<const std::size_t> ids) const {
    optim::LabeledImages out;
    for (auto i : ids) {
      out.images.push_back(tensors[i]);
      out.labels.push_back(labels[i]);
    }
    return out;
  }
};

LoadedData load_data(const RunConfig& cfg, std::size_t k) {
  require(cfg.manifest, "--manifest");
  LoadedData d;
  d.records = data::load_manifest(cfg.manifest);
  if (k > 0) check_class_coverage(d.records, k);
  const auto all = data::all_indices(d.records.size());
  d.tensors = data::load_tensors(d.records, all, cfg.model.image_size);
  if (k > 0) d.labels = data::class_labels(d.records, all, k);
  return d;
}

data::FoldPlan plan_for(const RunConfig& cfg, const LoadedData& d) {
  return data::make_fold_plan(d.records, cfg.test_fraction, cfg.folds, cfg.repeats, cfg.seed,
                              cfg.group_split ? data::SplitMode::group : data::SplitMode::image);
}

std::uint64_t fold_seed(const RunConfig& cfg, std::size_t r, std::size_t f) {
  return cfg.seed + 1000003ull * (r * cfg.folds + f + 1);
}

optim::CheckpointMeta meta_for(const RunConfig& cfg, const vitmae::Model& model) {
  optim::CheckpointMeta meta;
  meta.model = model.config();
  meta.optim = cfg.optim;
  meta.seed = cfg.seed;
  meta.mode = model.mode();
  meta.extra = {{"run", to_json(cfg)}};
  return meta;
}

void print_summary(std::ostream& out, const std::string& task,
                   const std::map<std::string, metrics::Aggregate>& summary) {
  out << task << ":\n";
  char line[96];
  for (const auto& [name, a] : summary) {
    std::snprintf(line, sizeof line, "  %-12s %.4f +- %.4f (n=%zu)\n", name.c_str(), a.mean, a.std,
                  a.n_folds);
    out << line;
  }
}

json summarize(const std::vector<metrics::FoldRecord>& folds, std::ostream& out) {
  std::map<std::string, std::vector<metrics::FoldRecord>> by_task;
  for (const auto& f : folds) by_task[f.task].push_back(f);
  json j = json::object();
  for (const auto& [task, records] : by_task) {
    if (records.size() < 2) continue;
    const auto summary = metrics::aggregate_folds(records);
    print_summary(out, task, summary);
    j[task] = metrics::summary_json(summary);
  }
  return j;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

// ---- subcommands ----

struct SynthFlags {
  std::optional<std::size_t> n, normal, mcdk, utd;
  std::size_t size = 64;
  std::uint64_t seed = 0;
  double annotate = 0, speckle = 0.25;
  std::string out;
};

int cmd_synth(const SynthFlags& f, std::ostream& out) {
  data::SynthOptions opts;
  if (f.n) {
    opts.normal = (2 * *f.n + 1) / 3;
    const std::size_t abnormal = *f.n - opts.normal;
    opts.mcdk = abnormal / 5;
    opts.utd = abnormal - opts.mcdk;
  }
  if (f.normal) opts.normal = *f.normal;
  if (f.mcdk) opts.mcdk = *f.mcdk;
  if (f.utd) opts.utd = *f.utd;
  opts.size = f.size;
  opts.seed = f.seed;
  opts.annotate_fraction = f.annotate;
  opts.speckle_sigma = f.speckle;
  const auto records = data::synth_dataset(f.out, opts);
  out << "wrote " << records.size() << " images (" << opts.normal << " normal, " << opts.mcdk
      << " mcdk, " << opts.utd << " utd) to " << f.out << "\n";
  return kExitOk;
}

int cmd_preprocess(const std::string& manifest, const std::string& out_dir, std::ostream& out) {
  const auto records = data::load_manifest(manifest);
  const fs::path dir(out_dir);
  fs::create_directories(dir / "images");
  std::vector<data::SampleRecord> cleaned;
  char name[32];
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto rec = records[i];
    std::snprintf(name, sizeof name, "%05zu_", i);
    const auto dst = dir / "images" / (name + rec.path.stem().string() + ".pgm");
    data::write_pgm(dst, data::load_image(rec));
    rec.source = rec.path.string();
    rec.path = dst;
    cleaned.push_back(rec);
  }
  data::write_manifest(dir / "manifest.csv", cleaned);
  out << "preprocessed " << cleaned.size() << " images into " << dir.string() << "\n";
  return kExitOk;
}

int cmd_pretrain(RunConfig cfg, std::ostream& out) {
  const auto dir = prepare_out(cfg);
  const auto d = load_data(cfg, 0);
  auto model = vitmae::Model::pretraining(cfg.model, cfg.seed);
  EpochLogWriter log(dir / "log.csv");
  const auto result = optim::train_pretrain(model, d.tensors, cfg.optim, cfg.seed,
                                            [&](const optim::EpochLog& e) {
                                              log(e);
                                              out << "epoch " << e.epoch << " loss " << fmt(e.loss)
                                                  << "\n";
                                            });
  const auto hash = optim::save_checkpoint(dir / "pretrain.usmk", model, meta_for(cfg, model));
  out << "checkpoint " << (dir / "pretrain.usmk").string() << " " << hash << "\n";
  return kExitOk;
}

int cmd_finetune(RunConfig cfg, std::ostream& out) {
  const ModelFactory factory(cfg);
  const auto dir = prepare_out(cfg);
  const auto k = cfg.num_classes();
  const auto d = load_data(cfg, k);
  const auto plan = plan_for(cfg, d);
  data::write_fold_plan(dir / "fold_plan.tsv", plan);
  fs::create_directories(dir / "logs");
  fs::create_directories(dir / "checkpoints");
  const auto test = d.subset(plan.test);

  std::vector<metrics::FoldRecord> folds;
  char tag[32];
  for (std::size_t r = 0; r < cfg.repeats; ++r)
    for (std::size_t f = 0; f < cfg.folds; ++f) {
      std::snprintf(tag, sizeof tag, "r%zu_f%zu", r + 1, f + 1);
      const auto train_ids = plan.train(r, f);
      const auto train = d.subset(train_ids);
      const auto val = d.subset(plan.validation[r][f]);
      std::vector<std::size_t> counts(k, 0);
      for (int l : train.labels) ++counts[static_cast<std::size_t>(l)];
      const auto weights = optim::compute_class_weights(counts, static_cast<int>(f + 1));

      auto model = factory.make();
      EpochLogWriter log(dir / "logs" / (std::string(tag) + ".csv"));
      const auto result = optim::train_finetune(model, train, val, weights, cfg.optim,
                                                fold_seed(cfg, r, f), std::ref(log));
      optim::save_checkpoint(dir / "checkpoints" / (std::string(tag) + ".usmk"), model,
                             meta_for(cfg, model));

      metrics::FoldRecord vrec{static_cast<int>(r + 1), static_cast<int>(f + 1), "validation",
                               metrics::evaluate_predictions(result.best_val_probs, val.labels, k)};
      const auto test_probs = optim::predict_probs(model, test.images);
      metrics::FoldRecord trec{static_cast<int>(r + 1), static_cast<int>(f + 1), "test",
                               metrics::evaluate_predictions(test_probs, test.labels, k)};
      out << tag << ": best epoch " << result.best_epoch << ", val accuracy "
          << fmt(vrec.values["accuracy"]) << ", test auc " << fmt(trec.values["auc"]) << "\n";
      folds.push_back(std::move(vrec));
      folds.push_back(std::move(trec));
    }
  {
    std::ofstream csv(dir / "fold_metrics.csv");
    metrics::write_fold_csv(csv, folds);
  }
  write_json(dir / "summary.json", summarize(folds, out));
  return kExitOk;
}

int cmd_evaluate(const std::string& run_dir, const std::string& checkpoint,
                 const std::string& manifest, const std::string& out_dir, std::ostream& out) {
  if (!run_dir.empty()) {
    const fs::path dir(run_dir);
    std::ifstream csv(dir / "fold_metrics.csv");
    if (!csv) throw IoError("cannot open " + (dir / "fold_metrics.csv").string());
    const auto folds = metrics::read_fold_csv(csv, (dir / "fold_metrics.csv").string());
    write_json(dir / "summary.json", summarize(folds, out));
    return kExitOk;
  }
  if (checkpoint.empty() || manifest.empty()) {
    throw UsageError("evaluate needs --run DIR, or --checkpoint and --manifest");
  }
  require(out_dir, "--out");
  const auto ck = optim::load_checkpoint(checkpoint);
  if (ck.meta.mode != vitmae::ModelMode::finetuning) {
    throw StateError("evaluate needs a fine-tuned checkpoint");
  }
  const auto model = ck.to_model();
  const auto k = model.config().num_classes;
  const auto records = data::load_manifest(manifest);
  const auto all = data::all_indices(records.size());
  const auto images = data::load_tensors(records, all, model.config().image_size);
  const auto labels = data::class_labels(records, all, k);
  const auto probs = optim::predict_probs(model, images);
  const auto values = metrics::evaluate_predictions(probs, labels, k);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  write_json(dir / "metrics.json", values);
  for (std::size_t c = (k == 2 ? 1 : 0); c < k; ++c) {
    std::vector<double> scores(records.size());
    std::vector<int> truth(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      scores[i] = probs[i * k + c];
      truth[i] = labels[i] == static_cast<int>(c);
    }
    const auto curves = metrics::curve_points(scores, truth);
    const std::string suffix =
        k == 2 ? "" : "_" + std::string(data::label_name(static_cast<data::Label>(c)));
    std::ofstream roc(dir / ("roc" + suffix + ".csv")), pr(dir / ("pr" + suffix + ".csv"));
    metrics::write_roc_csv(roc, curves.roc);
    metrics::write_pr_csv(pr, curves.pr);
  }
  for (const auto& [name, v] : values) out << name << " " << fmt(v) << "\n";
  return kExitOk;
}

struct ExplainFlags {
  std::string checkpoint, image, mask, out, score = "difference";
  int target = -1;
  std::size_t budget = 64;
  double alpha = 0.5;
};

int cmd_explain(const ExplainFlags& f, std::ostream& out) {
  require(f.checkpoint, "--checkpoint");
  require(f.image, "--image");
  require(f.out, "--out");
  scorecam::ScorecamOptions opts;
  try {
    opts.score = scorecam::parse_score_mode(f.score);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  const auto ck = optim::load_checkpoint(f.checkpoint);
  const auto model = ck.to_model();
  const auto& mc = model.config();
  opts.channel_budget = std::min(f.budget, mc.embed_dim);

  data::SampleRecord rec;
  rec.path = f.image;
  const auto gray = data::load_image(rec);
  const auto tensor = data::resize_normalize(gray, mc.image_size);
  const auto cls = model.forward_classify(tensor);
  const int target = f.target >= 0 ? f.target : cls.predicted;
  const auto map = scorecam::scorecam(model, tensor, target, opts);

  const auto resized = data::resize_bilinear(gray, mc.image_size);
  data::GrayImage shown(mc.image_size, mc.image_size);
  for (std::size_t i = 0; i < resized.size(); ++i) {
    shown.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0f * resized[i]));
  }
  const fs::path dir(f.out);
  fs::create_directories(dir);
  data::write_ppm(dir / "overlay.ppm", scorecam::overlay(shown, map, f.alpha));
  data::write_pgm(dir / "saliency.pgm", scorecam::saliency_image(map));
  scorecam::write_weights_csv(dir / "weights.csv", map);
  json report = {{"image", f.image},       {"predicted", cls.predicted}, {"probs", cls.probs},
                 {"target", target},       {"channels_used", map.channels_used},
                 {"score", scorecam::score_mode_name(opts.score)}};
  if (!f.mask.empty()) {
    const auto raw = data::read_gray(f.mask);
    data::GrayImage mask(mc.image_size, mc.image_size);
    const auto scaled = data::resize_bilinear(raw, mc.image_size);
    for (std::size_t i = 0; i < scaled.size(); ++i) mask.pixels[i] = scaled[i] > 0.0f;
    report["mass_in_mask_box"] = scorecam::mass_fraction(map, data::bounding_box(mask));
  }
  write_json(dir / "explain.json", report);
  out << "predicted " << cls.predicted << ", target " << target << ", "
      << map.channels_used << " channels, wrote " << (dir / "overlay.ppm").string() << "\n";
  return kExitOk;
}

int cmd_tune(RunConfig cfg, std::ostream& out) {
  const ModelFactory factory(cfg);
  const auto dir = prepare_out(cfg);
  const auto k = cfg.num_classes();
  const auto d = load_data(cfg, k);
  const auto plan = plan_for(cfg, d);
  data::write_fold_plan(dir / "fold_plan.tsv", plan);
  const auto result = optim::grid_search(cfg.lr_grid, cfg.wd_grid, [&](double lr, double wd) {
    auto oc = cfg.optim;
    oc.learning_rate = lr;
    oc.weight_decay = wd;
    double total = 0;
    for (std::size_t r = 0; r < cfg.repeats; ++r)
      for (std::size_t f = 0; f < cfg.folds; ++f) {
        const auto train = d.subset(plan.train(r, f));
        const auto val = d.subset(plan.validation[r][f]);
        std::vector<std::size_t> counts(k, 0);
        for (int l : train.labels) ++counts[static_cast<std::size_t>(l)];
        auto model = factory.make();
        total += optim::train_finetune(model, train, val,
                                       optim::compute_class_weights(counts, static_cast<int>(f + 1)),
                                       oc, fold_seed(cfg, r, f))
                     .best_val_accuracy;
      }
    const double score = total / static_cast<double>(cfg.repeats * cfg.folds);
    out << "lr " << fmt(lr) << " wd " << fmt(wd) << " mean val accuracy " << fmt(score) << "\n";
    return score;
  });
  {
    std::ofstream csv(dir / "tune.csv");
    csv << "learning_rate,weight_decay,score\n";
    for (const auto& c : result.cells) {
      csv << fmt(c.learning_rate) << ',' << fmt(c.weight_decay) << ',' << fmt(c.score) << '\n';
    }
  }
  write_json(dir / "tune.json", {{"learning_rate", result.learning_rate},
                                 {"weight_decay", result.weight_decay},
                                 {"score", result.score}});
  out << "best lr " << fmt(result.learning_rate) << " wd " << fmt(result.weight_decay) << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Masked-autoencoder ViT for pediatric kidney ultrasound", "usmae"};
  app.require_subcommand(1);

  SynthFlags synth;
  auto* sc_synth = app.add_subcommand("synth", "generate a synthetic phantom dataset");
  sc_synth->add_option("--n", synth.n, "total images, split 2:1 normal:abnormal");
  sc_synth->add_option("--normal", synth.normal);
  sc_synth->add_option("--mcdk", synth.mcdk);
  sc_synth->add_option("--utd", synth.utd);
  sc_synth->add_option("--size", synth.size);
  sc_synth->add_option("--seed", synth.seed);
  sc_synth->add_option("--annotate", synth.annotate, "share of images with color overlays");
  sc_synth->add_option("--speckle", synth.speckle, "log-normal speckle sigma");
  sc_synth->add_option("--out", synth.out)->required();

  std::string pre_manifest, pre_out;
  auto* sc_pre = app.add_subcommand("preprocess", "remove color annotations, write grayscale");
  sc_pre->add_option("--manifest", pre_manifest)->required();
  sc_pre->add_option("--out", pre_out)->required();

  RunFlags pretrain_flags, finetune_flags, tune_flags;
  auto* sc_pretrain = app.add_subcommand("pretrain", "masked-autoencoder pretraining");
  add_run_flags(*sc_pretrain, pretrain_flags, kCommon | kMask);
  auto* sc_finetune = app.add_subcommand("finetune", "repeated stratified cross-validation");
  add_run_flags(*sc_finetune, finetune_flags, kCommon | kSplit | kMask);
  auto* sc_tune = app.add_subcommand("tune", "grid search over learning rate and weight decay");
  add_run_flags(*sc_tune, tune_flags, kCommon | kSplit | kGrid);

  std::string ev_run, ev_ck, ev_manifest, ev_out;
  auto* sc_eval = app.add_subcommand("evaluate", "metrics for a checkpoint or a finished run");
  sc_eval->add_option("--run", ev_run, "finetune output directory");
  sc_eval->add_option("--checkpoint", ev_ck);
  sc_eval->add_option("--manifest", ev_manifest);
  sc_eval->add_option("--out", ev_out);

  ExplainFlags explain;
  auto* sc_explain = app.add_subcommand("explain", "Score-CAM saliency for one image");
  sc_explain->add_option("--checkpoint", explain.checkpoint)->required();
  sc_explain->add_option("--image", explain.image)->required();
  sc_explain->add_option("--out", explain.out)->required();
  sc_explain->add_option("--target", explain.target, "class index, default the prediction");
  sc_explain->add_option("--budget", explain.budget, "channels scored");
  sc_explain->add_option("--score", explain.score)
      ->check(CLI::IsMember({"difference", "probability", "logit"}));
  sc_explain->add_option("--alpha", explain.alpha)->check(CLI::Range(0.0, 1.0));
  sc_explain->add_option("--mask", explain.mask, "ground-truth mask for the in-box mass");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kExitOk;
    if (app.get_subcommands().empty()) err << app.help();
    return kExitUsage;
  }

  try {
    if (sc_synth->parsed()) return cmd_synth(synth, out);
    if (sc_pre->parsed()) return cmd_preprocess(pre_manifest, pre_out, out);
    if (sc_pretrain->parsed()) return cmd_pretrain(resolve(pretrain_flags), out);
    if (sc_finetune->parsed()) return cmd_finetune(resolve(finetune_flags), out);
    if (sc_tune->parsed()) return cmd_tune(resolve(tune_flags), out);
    if (sc_eval->parsed()) return cmd_evaluate(ev_run, ev_ck, ev_manifest, ev_out, out);
    if (sc_explain->parsed()) return cmd_explain(explain, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace usmae::cli
