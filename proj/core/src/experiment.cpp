#include "sleepstage/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <thread>

#include "sleepstage/log.hpp"
#include "sleepstage/random.hpp"

namespace sleepstage {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Eigen::MatrixXd to_matrix(std::span<const FeatureVector> rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(kNumFeatures), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (std::size_t i = 0; i < kNumFeatures; ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[j][i];
  return m;
}

std::vector<int> to_ints(std::span<const SleepStage> labels) {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = stage_index(labels[i]);
  return out;
}

struct EpochRef {
  std::size_t recording;
  std::size_t index;
};

enum class Role : unsigned char { Unused, Train, Validation };

Eigen::MatrixXd scaled_matrix(const FeatureScaler& scaler, const std::vector<FeatureVector>& features) {
  std::vector<FeatureVector> rows;
  rows.reserve(features.size());
  for (const auto& f : features) rows.push_back(scaler.apply(f));
  return to_matrix(rows);
}

bool needs_dbn(const std::vector<std::pair<ModelKind, int>>& columns) {
  return std::any_of(columns.begin(), columns.end(), [](const auto& c) { return c.first != ModelKind::Lstm; });
}

// Per-epoch input of the sequence models: scaled features for the plain
// LSTM, DBN posteriors (or logits) otherwise.
Eigen::MatrixXd sequence_input(const TrainedModels& models, ModelKind kind, const Eigen::MatrixXd& scaled,
                               const ExperimentConfig& cfg) {
  if (kind == ModelKind::Lstm) return scaled;
  if (!models.dbn) throw std::logic_error("sequence input needs a fitted DBN");
  return cfg.lstm_input == LstmInput::Logits ? dbn_logits(*models.dbn, scaled) : transform(*models.dbn, scaled);
}

void fail(FoldReport& r, const std::string& what) {
  r.failed = true;
  r.error = what;
  r.accuracy = std::numeric_limits<double>::quiet_NaN();
  r.f1 = std::numeric_limits<double>::quiet_NaN();
}

std::vector<FoldReport> run_fold(const std::vector<RecordingFeatures>& recs, const ExperimentConfig& cfg,
                                 const Fold& fold, int rep) {
  const std::uint64_t seed =
      derive_seed(cfg.seed, {static_cast<std::uint64_t>(fold.test), static_cast<std::uint64_t>(rep)});
  const std::string tag = "fold " + std::to_string(fold.test + 1) + " rep " + std::to_string(rep);
  std::vector<FoldReport> out;
  for (auto [kind, seq] : report_columns(cfg)) {
    FoldReport r;
    r.fold = fold.test;
    r.repetition = rep;
    r.model = kind;
    r.seq_len = seq;
    out.push_back(std::move(r));
  }
  TrainedModels models;
  try {
    models = fit_models(recs, fold.train, cfg, seed);
  } catch (const std::exception& e) {
    log_error(tag + ": " + e.what());
    for (auto& r : out) fail(r, e.what());
    return out;
  }
  const auto& test = recs[fold.test];
  for (auto& r : out) {
    try {
      r.wall_times = models.shared_times;
      if (auto it = models.model_times.find({r.model, r.seq_len}); it != models.model_times.end())
        r.wall_times.insert(r.wall_times.end(), it->second.begin(), it->second.end());
      const auto t0 = Clock::now();
      auto pred = predict_recording(models, r.model, r.seq_len, test.features, cfg);
      r.wall_times.emplace_back("predict", seconds_since(t0));
      r.truth = to_ints(test.labels);
      r.predicted = std::move(pred.predicted);
      r.padded = std::move(pred.padded);
      r.confusion = confusion(r.predicted, r.truth);
      r.accuracy = r.confusion.accuracy();
      r.f1 = f1_score(r.confusion, cfg.f1);
      log_info(tag + " " + std::string(model_name(r.model)) +
               (r.seq_len ? " seq " + std::to_string(r.seq_len) : "") + ": acc " + std::to_string(r.accuracy) +
               " f1 " + std::to_string(r.f1));
    } catch (const std::exception& e) {
      log_error(tag + " " + std::string(model_name(r.model)) + ": " + e.what());
      fail(r, e.what());
    }
  }
  return out;
}

}  // namespace

std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Dbn: return "DBN";
    case ModelKind::Lstm: return "LSTM";
    case ModelKind::DbnHmm: return "DBN+HMM";
    case ModelKind::DbnLstm: return "DBN+LSTM";
  }
  return "?";
}

ModelKind parse_model(std::string_view token) {
  std::string t(token);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "dbn") return ModelKind::Dbn;
  if (t == "lstm") return ModelKind::Lstm;
  if (t == "dbn+hmm") return ModelKind::DbnHmm;
  if (t == "dbn+lstm") return ModelKind::DbnLstm;
  throw std::invalid_argument("unknown model '" + std::string(token) + "' (expected dbn, lstm, dbn+hmm, dbn+lstm)");
}

bool is_sequence_model(ModelKind kind) { return kind == ModelKind::Lstm || kind == ModelKind::DbnLstm; }

void ExperimentConfig::validate() const {
  if (models.empty()) throw std::invalid_argument("experiment: no models selected");
  if (repetitions < 1) throw std::invalid_argument("experiment: repetitions must be >= 1");
  if (jobs < 1) throw std::invalid_argument("experiment: jobs must be >= 1");
  if (std::any_of(models.begin(), models.end(), is_sequence_model)) {
    if (seq_lens.empty()) throw std::invalid_argument("experiment: no sequence lengths");
    for (int s : seq_lens)
      if (s < 1) throw std::invalid_argument("experiment: sequence length must be >= 1");
  }
}

RecordingFeatures features_for(const Recording& recording) {
  return {recording.id, extract_recording_features(recording), recording.labels};
}

std::vector<std::pair<ModelKind, int>> report_columns(const ExperimentConfig& cfg) {
  std::vector<std::pair<ModelKind, int>> cols;
  for (ModelKind k : cfg.models) {
    if (is_sequence_model(k)) {
      for (int s : cfg.seq_lens) cols.emplace_back(k, s);
    } else {
      cols.emplace_back(k, 0);
    }
  }
  return cols;
}

std::pair<double, double> mean_and_sample_std(const std::vector<double>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : values)
    if (!std::isnan(v)) sum += v, ++n;
  if (n == 0) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const double mean = sum / static_cast<double>(n);
  if (n < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values)
    if (!std::isnan(v)) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(n - 1))};
}

std::vector<SummaryRow> summarize(const std::vector<FoldReport>& reports, std::size_t num_folds,
                                  const ExperimentConfig& cfg) {
  std::vector<SummaryRow> rows;
  for (auto [kind, seq] : report_columns(cfg)) {
    SummaryRow row;
    row.model = kind;
    row.seq_len = seq;
    for (std::size_t f = 0; f < num_folds; ++f) {
      std::vector<double> acc, f1;
      for (const auto& r : reports) {
        if (r.fold != f || r.model != kind || r.seq_len != seq) continue;
        acc.push_back(r.accuracy);
        f1.push_back(r.f1);
        if (!r.failed) row.confusion.merge(r.confusion);
      }
      row.fold_accuracy.push_back(mean_and_sample_std(acc).first);
      row.fold_f1.push_back(mean_and_sample_std(f1).first);
    }
    std::tie(row.mean_accuracy, row.std_accuracy) = mean_and_sample_std(row.fold_accuracy);
    std::tie(row.mean_f1, row.std_f1) = mean_and_sample_std(row.fold_f1);
    rows.push_back(std::move(row));
  }
  return rows;
}

const StackedLstm* TrainedModels::lstm(ModelKind kind, int seq_len) const {
  for (const auto& l : lstms)
    if (l.kind == kind && l.seq_len == seq_len) return &l.model;
  return nullptr;
}

TrainedModels fit_models(const std::vector<RecordingFeatures>& recs, const std::vector<std::size_t>& train,
                         const ExperimentConfig& cfg, std::uint64_t seed) {
  if (train.empty()) throw std::invalid_argument("fit_models: no training recordings");
  const auto columns = report_columns(cfg);
  TrainedModels models;
  auto t0 = Clock::now();

  // Model-building epochs after optional transition removal; the 5:1 split
  // is drawn per class over the pooled kept epochs.
  std::vector<EpochRef> pool;
  std::vector<SleepStage> pool_labels;
  for (std::size_t r : train) {
    const auto& labels = recs.at(r).labels;
    std::vector<std::size_t> kept;
    if (cfg.transition_removal) {
      kept = kept_after_transition_removal(labels, cfg.transition_margin);
    } else {
      kept.resize(labels.size());
      for (std::size_t i = 0; i < kept.size(); ++i) kept[i] = i;
    }
    for (std::size_t i : kept) {
      pool.push_back({r, i});
      pool_labels.push_back(labels[i]);
    }
  }
  const auto val_mask = balanced_validation_mask(pool_labels, derive_seed(seed, {1}));
  std::map<std::size_t, std::vector<Role>> role;
  for (std::size_t r : train) role[r].assign(recs[r].labels.size(), Role::Unused);
  std::vector<FeatureVector> train_rows;
  for (std::size_t k = 0; k < pool.size(); ++k) {
    role[pool[k].recording][pool[k].index] = val_mask[k] ? Role::Validation : Role::Train;
    if (!val_mask[k]) train_rows.push_back(recs[pool[k].recording].features[pool[k].index]);
  }
  models.scaler = FeatureScaler::fit(train_rows);
  std::map<std::size_t, Eigen::MatrixXd> scaled;
  for (std::size_t r : train) scaled[r] = scaled_matrix(models.scaler, recs[r].features);
  models.shared_times.emplace_back("split_scale", seconds_since(t0));

  auto gather = [&](Role want, const std::map<std::size_t, Eigen::MatrixXd>& source, Eigen::MatrixXd& x,
                    std::vector<int>& y) {
    std::vector<EpochRef> refs;
    for (std::size_t r : train)
      for (std::size_t i = 0; i < role[r].size(); ++i)
        if (role[r][i] == want) refs.push_back({r, i});
    x.resize(source.at(train.front()).rows(), static_cast<Eigen::Index>(refs.size()));
    y.resize(refs.size());
    for (std::size_t k = 0; k < refs.size(); ++k) {
      x.col(static_cast<Eigen::Index>(k)) = source.at(refs[k].recording).col(static_cast<Eigen::Index>(refs[k].index));
      y[k] = stage_index(recs[refs[k].recording].labels[refs[k].index]);
    }
  };

  if (needs_dbn(columns)) {
    Eigen::MatrixXd train_x, val_x;
    std::vector<int> train_y, val_y;
    gather(Role::Train, scaled, train_x, train_y);
    gather(Role::Validation, scaled, val_x, val_y);
    DbnTrainConfig dcfg = cfg.dbn;
    dcfg.seed = derive_seed(seed, {2});
    t0 = Clock::now();
    DbnModel dbn = DbnModel::init(static_cast<Eigen::Index>(kNumFeatures), dcfg.hidden,
                                  static_cast<Eigen::Index>(kNumStages), dcfg.seed);
    dbn = pretrain(std::move(dbn), train_x, dcfg);
    models.shared_times.emplace_back("dbn_pretrain", seconds_since(t0));
    t0 = Clock::now();
    models.dbn = finetune(std::move(dbn), train_x, train_y, val_x, val_y, dcfg);
    models.shared_times.emplace_back("dbn_finetune", seconds_since(t0));
  }

  for (auto [kind, seq] : columns) {
    t0 = Clock::now();
    if (kind == ModelKind::DbnHmm && !models.hmm) {
      // Transitions come from the complete training hypnograms.
      std::vector<std::vector<int>> hypnograms;
      for (std::size_t r : train) hypnograms.push_back(to_ints(recs[r].labels));
      models.hmm = estimate_transitions(hypnograms, cfg.hmm_alpha, static_cast<int>(kNumStages));
      models.model_times[{kind, seq}].emplace_back("hmm_fit", seconds_since(t0));
    }
    if (!is_sequence_model(kind)) continue;
    // Windows run over each recording's kept epochs in their original
    // order, so they span the gaps left by transition removal. A window
    // lands in train or validation with its final epoch.
    std::vector<SequenceWindow> train_w, val_w;
    Eigen::Index in_dim = 0;
    for (std::size_t r : train) {
      const Eigen::MatrixXd input = sequence_input(models, kind, scaled.at(r), cfg);
      in_dim = input.rows();
      std::vector<std::size_t> kept;
      for (std::size_t i = 0; i < role[r].size(); ++i)
        if (role[r][i] != Role::Unused) kept.push_back(i);
      Eigen::MatrixXd kept_input(input.rows(), static_cast<Eigen::Index>(kept.size()));
      std::vector<int> kept_labels(kept.size());
      for (std::size_t k = 0; k < kept.size(); ++k) {
        kept_input.col(static_cast<Eigen::Index>(k)) = input.col(static_cast<Eigen::Index>(kept[k]));
        kept_labels[k] = stage_index(recs[r].labels[kept[k]]);
      }
      for (auto& w : make_windows(kept_input, kept_labels, seq)) {
        w.end_index = kept[w.end_index];
        if (role[r][w.end_index] == Role::Train) train_w.push_back(std::move(w));
        else val_w.push_back(std::move(w));
      }
    }
    if (train_w.empty()) throw std::runtime_error("no training windows for sequence length " + std::to_string(seq));
    LstmTrainConfig lcfg = cfg.lstm;
    lcfg.seq_len = seq;
    lcfg.seed = derive_seed(seed, {3, static_cast<std::uint64_t>(seq), static_cast<std::uint64_t>(kind)});
    StackedLstm model =
        StackedLstm::init(in_dim, lcfg.units, static_cast<Eigen::Index>(kNumStages), seq, lcfg.seed);
    model = sleepstage::train(std::move(model), train_w, val_w, lcfg);
    models.lstms.push_back({kind, seq, std::move(model)});
    models.model_times[{kind, seq}].emplace_back("lstm_train", seconds_since(t0));
  }
  return models;
}

Prediction predict_recording(const TrainedModels& models, ModelKind kind, int seq_len,
                             const std::vector<FeatureVector>& features, const ExperimentConfig& cfg) {
  if (features.empty()) throw std::invalid_argument("predict_recording: empty recording");
  const Eigen::MatrixXd scaled = scaled_matrix(models.scaler, features);
  Prediction out;
  switch (kind) {
    case ModelKind::Dbn:
      if (!models.dbn) throw std::logic_error("DBN not fitted");
      out.predicted = argmax_columns(transform(*models.dbn, scaled));
      break;
    case ModelKind::DbnHmm:
      if (!models.dbn || !models.hmm) throw std::logic_error("DBN+HMM not fitted");
      out.predicted = viterbi(*models.hmm, transform(*models.dbn, scaled).transpose(), cfg.hmm_emission).path;
      break;
    case ModelKind::Lstm:
    case ModelKind::DbnLstm: {
      const StackedLstm* lstm = models.lstm(kind, seq_len);
      if (!lstm) throw std::logic_error(std::string(model_name(kind)) + " not fitted for this sequence length");
      auto pred = predict_sequence(*lstm, sequence_input(models, kind, scaled, cfg));
      out.predicted = std::move(pred.predicted);
      out.padded = std::move(pred.padded);
      break;
    }
  }
  if (out.padded.empty()) out.padded.assign(out.predicted.size(), false);
  return out;
}

ExperimentResult run_experiment(const std::vector<RecordingFeatures>& recordings, const ExperimentConfig& cfg) {
  cfg.validate();
  for (const auto& r : recordings)
    if (r.features.size() != r.labels.size() || r.labels.empty())
      throw std::invalid_argument("recording " + r.id + ": feature/label count mismatch");
  const auto folds = loocv_folds(recordings.size());

  struct Task {
    std::size_t fold;
    int rep;
  };
  std::vector<Task> tasks;
  for (std::size_t f = 0; f < folds.size(); ++f)
    for (int rep = 0; rep < cfg.repetitions; ++rep) tasks.push_back({f, rep});

  std::vector<std::vector<FoldReport>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t; (t = next.fetch_add(1)) < tasks.size();) {
      results[t] = run_fold(recordings, cfg, folds[tasks[t].fold], tasks[t].rep);
    }
  };
  const auto n_threads = static_cast<std::size_t>(std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), tasks.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }

  ExperimentResult result;
  for (const auto& r : recordings) result.recording_ids.push_back(r.id);
  for (auto& batch : results)
    for (auto& r : batch) result.reports.push_back(std::move(r));
  result.summary = summarize(result.reports, folds.size(), cfg);
  return result;
}

}  // namespace sleepstage
