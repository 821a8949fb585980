#include "sleepstage/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "sleepstage/config.hpp"
#include "sleepstage/experiment.hpp"
#include "sleepstage/features.hpp"
#include "sleepstage/log.hpp"
#include "sleepstage/report.hpp"
#include "sleepstage/synthgen.hpp"

namespace sleepstage {

namespace {

namespace fs = std::filesystem;

constexpr const char* kVersion = "sleepstage 1.0.0";
constexpr const char* kSubcommands[] = {"synth", "extract", "pretrain", "train", "evaluate", "loocv"};

using Overrides = std::vector<std::pair<std::string, std::string>>;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// `--section.key value` and `--section.key=value` tokens left over by CLI11.
Overrides dotted_overrides(const std::vector<std::string>& extras) {
  Overrides out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const auto& tok = extras[i];
    if (tok.rfind("--", 0) != 0) throw UsageError("unexpected argument '" + tok + "'");
    auto key = tok.substr(2);
    if (const auto eq = key.find('='); eq != std::string::npos) {
      out.emplace_back(key.substr(0, eq), key.substr(eq + 1));
      continue;
    }
    if (i + 1 >= extras.size()) throw UsageError("missing value for '" + tok + "'");
    out.emplace_back(key, extras[++i]);
  }
  return out;
}

LogLevel level_from(const std::string& s) {
  if (s == "debug") return LogLevel::Debug;
  if (s == "warn") return LogLevel::Warn;
  if (s == "error") return LogLevel::Error;
  if (s == "off") return LogLevel::Off;
  return LogLevel::Info;
}

std::vector<RecordingFeatures> load_features(const RunConfig& cfg) {
  if (!fs::is_directory(cfg.data_dir)) throw std::runtime_error("dataset directory not found: " + cfg.data_dir.string());
  const auto paths = list_recordings(cfg.data_dir);
  if (paths.empty()) throw std::runtime_error("no recordings in " + cfg.data_dir.string());
  std::vector<RecordingFeatures> out;
  for (const auto& p : paths) {
    const Recording rec = load_recording(p, cfg.sample_rate_hz, cfg.epoch_len_s);
    log_info("loaded " + rec.id + ": " + std::to_string(rec.num_epochs()) + " epochs");
    out.push_back(features_for(rec));
  }
  return out;
}

std::string lstm_file(ModelKind kind, int seq_len) {
  return std::string(kind == ModelKind::Lstm ? "lstm" : "dbn_lstm") + "_" + std::to_string(seq_len) + "seq.model";
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

void write_resolved(const RunConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  write_text(dir / "resolved.cfg", format_config(cfg));
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  SynthConfig sc;
  sc.recordings = cfg.synth_recordings;
  sc.epochs_per_recording = cfg.synth_epochs;
  sc.fs = cfg.sample_rate_hz;
  sc.epoch_len_s = cfg.epoch_len_s;
  sc.seed = cfg.experiment.seed;
  write_resolved(cfg, cfg.data_dir);
  std::size_t written = 0;
  for (std::size_t k = 0; k < sc.recordings; ++k) {
    const Recording rec = gen_recording(sc, k);
    write_recording(rec, cfg.data_dir / (rec.id + ".csv"));
    ++written;
  }
  out << "wrote " << written << " recordings to " << cfg.data_dir.string() << "\n";
  return 0;
}

int cmd_extract(const RunConfig& cfg, std::ostream& out) {
  if (!fs::is_directory(cfg.data_dir)) throw std::runtime_error("dataset directory not found: " + cfg.data_dir.string());
  write_resolved(cfg, cfg.out_dir);
  for (const auto& p : list_recordings(cfg.data_dir)) {
    const Recording rec = load_recording(p, cfg.sample_rate_hz, cfg.epoch_len_s);
    const auto features = extract_recording_features(rec);
    const auto dest = cfg.out_dir / (rec.id + ".features.csv");
    write_features_csv(dest, rec, features);
    out << dest.string() << "\n";
  }
  return 0;
}

int cmd_pretrain(RunConfig cfg, std::ostream& out) {
  const auto recs = load_features(cfg);
  write_resolved(cfg, cfg.out_dir);
  ExperimentConfig ec = cfg.experiment;
  ec.models = {ModelKind::Dbn};
  ec.dbn.finetune_epochs = 0;  // unsupervised layers only; the head stays at its initial values
  const auto models = fit_models(recs, all_indices(recs.size()), ec, ec.seed);
  models.scaler.save(cfg.out_dir / "scaler.txt");
  models.dbn->save(cfg.out_dir / "dbn.pretrained.model");
  out << "wrote " << (cfg.out_dir / "dbn.pretrained.model").string() << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const auto recs = load_features(cfg);
  write_resolved(cfg, cfg.out_dir);
  const auto& ec = cfg.experiment;
  ec.validate();
  const auto models = fit_models(recs, all_indices(recs.size()), ec, ec.seed);
  models.scaler.save(cfg.out_dir / "scaler.txt");
  if (models.dbn) models.dbn->save(cfg.out_dir / "dbn.model");
  if (models.hmm) models.hmm->save(cfg.out_dir / "hmm.model");
  for (const auto& l : models.lstms) l.model.save(cfg.out_dir / lstm_file(l.kind, l.seq_len));
  out << "models written to " << cfg.out_dir.string() << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const fs::path& model_dir, std::ostream& out) {
  const auto& ec = cfg.experiment;
  ec.validate();
  if (!fs::is_directory(model_dir)) throw std::runtime_error("model directory not found: " + model_dir.string());
  TrainedModels models;
  models.scaler = FeatureScaler::load(model_dir / "scaler.txt");
  const auto columns = report_columns(ec);
  for (auto [kind, seq] : columns) {
    if (kind != ModelKind::Lstm && !models.dbn) models.dbn = DbnModel::load(model_dir / "dbn.model");
    if (kind == ModelKind::DbnHmm) models.hmm = HmmModel::load(model_dir / "hmm.model");
    if (is_sequence_model(kind)) models.lstms.push_back({kind, seq, StackedLstm::load(model_dir / lstm_file(kind, seq))});
  }
  const auto recs = load_features(cfg);
  write_resolved(cfg, cfg.out_dir);
  std::string csv = "recording,model,accuracy,f1\n";
  std::map<std::pair<ModelKind, int>, ConfusionMatrix> pooled;
  for (const auto& r : recs) {
    std::vector<int> truth(r.labels.size());
    for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = stage_index(r.labels[i]);
    for (auto [kind, seq] : columns) {
      const auto pred = predict_recording(models, kind, seq, r.features, ec);
      const auto cm = confusion(pred.predicted, truth);
      pooled[{kind, seq}].merge(cm);
      char buf[64];
      std::snprintf(buf, sizeof buf, ",%.4f,%.4f\n", cm.accuracy(), f1_score(cm, ec.f1));
      csv += r.id + "," + column_label(kind, seq) + buf;
    }
  }
  write_text(cfg.out_dir / "evaluate.csv", csv);
  for (auto [kind, seq] : columns) {
    const auto& cm = pooled[{kind, seq}];
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-16s acc %.4f f1 %.4f\n", column_label(kind, seq).c_str(), cm.accuracy(),
                  f1_score(cm, ec.f1));
    out << buf;
  }
  return 0;
}

int cmd_loocv(const RunConfig& cfg, std::ostream& out) {
  cfg.experiment.validate();
  const auto recs = load_features(cfg);
  write_resolved(cfg, cfg.out_dir);
  const auto result = run_experiment(recs, cfg.experiment);
  write_experiment_outputs(result, cfg.experiment, cfg.out_dir);
  out << format_report(result.summary);
  const bool any_failed =
      std::any_of(result.reports.begin(), result.reports.end(), [](const FoldReport& r) { return r.failed; });
  if (any_failed) log_warn("some folds failed; see folds.csv");
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sleep stage classification: features, DBN, LSTM/HMM decoding, LOOCV evaluation", "sleepstage"};
  app.require_subcommand(1);
  bool show_version = false;
  app.add_flag("--version", show_version, "Print tool and file format versions");

  // Shared options; every one of them is a shortcut for a config key.
  std::optional<std::string> config_file;
  std::map<std::string, std::optional<std::string>> shortcut;
  auto common = [&](CLI::App* sub) {
    sub->allow_extras();
    sub->add_option("--config", config_file, "key = value config file");
    sub->add_option("--seed", shortcut["seed"], "Global seed");
    sub->add_option("--fs", shortcut["data.fs"], "Sample rate (Hz)");
    sub->add_option("--log-level", shortcut["log.level"], "debug|info|warn|error|off");
  };
  auto data_opt = [&](CLI::App* sub) { sub->add_option("--data", shortcut["data.dir"], "Dataset directory"); };
  auto out_opt = [&](CLI::App* sub) { sub->add_option("--out", shortcut["out"], "Output directory"); };
  auto model_opts = [&](CLI::App* sub) {
    sub->add_option("--models", shortcut["experiment.models"], "Comma list of dbn,lstm,dbn+hmm,dbn+lstm");
    sub->add_option("--seq", shortcut["lstm.seq_len"], "Comma list of LSTM sequence lengths");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  common(synth);
  synth->add_option("--recordings", shortcut["synth.recordings"], "Number of recordings");
  synth->add_option("--epochs", shortcut["synth.epochs"], "Epochs per recording");
  synth->add_option("--out", shortcut["data.dir"], "Dataset directory to write");

  auto* extract = app.add_subcommand("extract", "Write <recording>.features.csv for every recording");
  common(extract);
  data_opt(extract);
  out_opt(extract);

  auto* pre = app.add_subcommand("pretrain", "Unsupervised DBN pretraining on a dataset");
  common(pre);
  data_opt(pre);
  out_opt(pre);

  auto* train = app.add_subcommand("train", "Fit all selected models on a dataset");
  common(train);
  data_opt(train);
  out_opt(train);
  model_opts(train);

  auto* evaluate = app.add_subcommand("evaluate", "Score trained models on a dataset");
  common(evaluate);
  data_opt(evaluate);
  out_opt(evaluate);
  model_opts(evaluate);
  std::string model_dir;
  evaluate->add_option("--model-dir", model_dir, "Directory written by train (default: --out)");

  auto* loocv = app.add_subcommand("loocv", "Leave-one-recording-out evaluation");
  common(loocv);
  data_opt(loocv);
  out_opt(loocv);
  model_opts(loocv);
  loocv->add_option("--reps", shortcut["experiment.reps"], "Repetitions per fold");
  loocv->add_option("--jobs", shortcut["experiment.jobs"], "Folds trained concurrently");
  loocv->add_option("--f1", shortcut["experiment.f1"], "macro|weighted");
  bool no_transition_removal = false;
  loocv->add_flag("--no-transition-removal", no_transition_removal, "Keep epochs next to stage changes");

  if (std::find(args.begin(), args.end(), "--version") != args.end()) {
    out << kVersion << "\n"
        << "formats: recording-csv v1, labels-csv v1, features-csv v1, scaler v1, dbn v1, lstm v1, hmm v1, config v1\n";
    return 0;
  }
  if (!args.empty() && args.front().rfind("-", 0) != 0 &&
      std::find(std::begin(kSubcommands), std::end(kSubcommands), args.front()) == std::end(kSubcommands)) {
    err << "unknown subcommand '" << args.front() << "'; valid subcommands: synth, extract, pretrain, train, "
        << "evaluate, loocv\n\n"
        << app.help();
    return 2;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    Overrides overrides = dotted_overrides(sub->remaining());
    for (const auto& [key, value] : shortcut)
      if (value) overrides.emplace_back(key, *value);
    if (no_transition_removal) overrides.emplace_back("experiment.transition_removal", "false");
    const RunConfig cfg =
        parse_config(config_file ? std::optional<fs::path>(*config_file) : std::nullopt, overrides);
    set_log_level(level_from(cfg.log_level));

    const std::string name = sub->get_name();
    if (name == "synth") return cmd_synth(cfg, out);
    if (name == "extract") return cmd_extract(cfg, out);
    if (name == "pretrain") return cmd_pretrain(cfg, out);
    if (name == "train") return cmd_train(cfg, out);
    if (name == "evaluate") return cmd_evaluate(cfg, model_dir.empty() ? cfg.out_dir : fs::path(model_dir), out);
    if (name == "loocv") return cmd_loocv(cfg, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace sleepstage
