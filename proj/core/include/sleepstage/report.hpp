#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sleepstage/experiment.hpp"

namespace sleepstage {

/// "DBN", "LSTM_5seq", "DBN+LSTM_10seq", ...
std::string column_label(ModelKind model, int seq_len);

/// fold rows, then avg and std rows; two columns (acc, f1) per summary row.
/// Failed folds print NA. Contains no timings so reruns compare byte-equal.
std::string format_report(const std::vector<SummaryRow>& summary);

/// Row-percent confusion view with header `actual,WAKE,S1,S2,SWS,REM`.
std::string format_confusion(const ConfusionMatrix& cm);

void write_text(const std::filesystem::path& path, const std::string& text);

/// Step plot of predicted (blue) and true (red) stages plus `<out>.csv` with
/// columns epoch,true,pred. `svg_path` should end in .svg. Throws on empty or
/// unequal inputs and on I/O failure.
void emit_hypnogram(const std::vector<int>& predicted, const std::vector<int>& truth,
                    const std::filesystem::path& svg_path, const std::string& title = {});

/// report.csv, confusion_<col>.csv, folds.csv, predictions.csv, timings.csv and one hypnogram
/// per fold (DBN+LSTM when present, else the first column; repetition 0).
void write_experiment_outputs(const ExperimentResult& result, const ExperimentConfig& cfg,
                              const std::filesystem::path& out_dir);

}  // namespace sleepstage
