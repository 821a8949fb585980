#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sleepstage/dbn.hpp"
#include "sleepstage/features.hpp"
#include "sleepstage/hmm.hpp"
#include "sleepstage/lstm.hpp"
#include "sleepstage/metrics.hpp"
#include "sleepstage/psg_data.hpp"

namespace sleepstage {

enum class ModelKind { Dbn, Lstm, DbnHmm, DbnLstm };

/// DBN, LSTM, DBN+HMM, DBN+LSTM.
std::string_view model_name(ModelKind kind);
/// Accepts dbn, lstm, dbn+hmm, dbn+lstm (case-insensitive).
ModelKind parse_model(std::string_view token);
bool is_sequence_model(ModelKind kind);

enum class LstmInput { Posterior, Logits };

struct ExperimentConfig {
  std::vector<ModelKind> models = {ModelKind::Dbn, ModelKind::Lstm, ModelKind::DbnHmm, ModelKind::DbnLstm};
  std::vector<int> seq_lens = {5};
  int repetitions = 1;
  bool transition_removal = true;
  std::size_t transition_margin = 1;
  std::uint64_t seed = 42;
  DbnTrainConfig dbn{};
  LstmTrainConfig lstm{};
  double hmm_alpha = 1.0;
  EmissionMode hmm_emission = EmissionMode::ScaledLikelihood;
  LstmInput lstm_input = LstmInput::Posterior;
  F1Mode f1 = F1Mode::Macro;
  int jobs = 1;

  void validate() const;
};

/// Extracted features and labels of one recording: the unit the experiment
/// driver works on.
struct RecordingFeatures {
  std::string id;
  std::vector<FeatureVector> features;
  std::vector<SleepStage> labels;
};

RecordingFeatures features_for(const Recording& recording);

struct FoldReport {
  std::size_t fold = 0;
  int repetition = 0;
  ModelKind model = ModelKind::Dbn;
  int seq_len = 0;  // 0 for models without a sequence window
  double accuracy = 0.0;
  double f1 = 0.0;
  ConfusionMatrix confusion{};
  std::vector<std::pair<std::string, double>> wall_times;  // seconds per phase
  bool failed = false;
  std::string error;
  std::vector<int> truth;
  std::vector<int> predicted;
  std::vector<bool> padded;
};

/// One (model, seq_len) column of the report.
struct SummaryRow {
  ModelKind model = ModelKind::Dbn;
  int seq_len = 0;
  std::vector<double> fold_accuracy;  // mean over repetitions; NaN if every repetition failed
  std::vector<double> fold_f1;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_f1 = 0.0;
  double std_f1 = 0.0;
  ConfusionMatrix confusion{};  // pooled over folds and repetitions
};

struct ExperimentResult {
  std::vector<std::string> recording_ids;
  std::vector<FoldReport> reports;  // ordered by fold, repetition, model, seq_len
  std::vector<SummaryRow> summary;
};

/// Everything fitted on one training set.
struct TrainedModels {
  FeatureScaler scaler;
  std::optional<DbnModel> dbn;
  std::optional<HmmModel> hmm;
  struct Sequence {
    ModelKind kind;
    int seq_len;
    StackedLstm model;
  };
  std::vector<Sequence> lstms;
  std::vector<std::pair<std::string, double>> shared_times;
  std::map<std::pair<ModelKind, int>, std::vector<std::pair<std::string, double>>> model_times;

  const StackedLstm* lstm(ModelKind kind, int seq_len) const;
};

/// Fits the scaler, the DBN, the HMM and one LSTM per sequence column on the
/// given training recordings: transition removal, then a 5:1 per-class
/// train/validation split of the kept epochs.
TrainedModels fit_models(const std::vector<RecordingFeatures>& recordings, const std::vector<std::size_t>& train,
                         const ExperimentConfig& cfg, std::uint64_t seed);

struct Prediction {
  std::vector<int> predicted;
  std::vector<bool> padded;
};

/// Per-epoch labels for one recording with a fitted (model, seq_len) column.
Prediction predict_recording(const TrainedModels& models, ModelKind kind, int seq_len,
                             const std::vector<FeatureVector>& features, const ExperimentConfig& cfg);

/// Columns of the report in output order.
std::vector<std::pair<ModelKind, int>> report_columns(const ExperimentConfig& cfg);

/// Leave-one-recording-out evaluation of every configured model.
ExperimentResult run_experiment(const std::vector<RecordingFeatures>& recordings, const ExperimentConfig& cfg);

/// Fold-level summary: unweighted mean and sample standard deviation of the
/// per-fold values.
std::vector<SummaryRow> summarize(const std::vector<FoldReport>& reports, std::size_t num_folds,
                                  const ExperimentConfig& cfg);

/// Sample mean/std ignoring NaN entries; std is 0 with fewer than two values.
std::pair<double, double> mean_and_sample_std(const std::vector<double>& values);

}  // namespace sleepstage
