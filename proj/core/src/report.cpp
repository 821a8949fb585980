#include "sleepstage/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sleepstage {

namespace {

std::string fixed(double v, int digits = 4) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string file_label(ModelKind model, int seq_len) {
  std::string s = column_label(model, seq_len);
  std::replace(s.begin(), s.end(), '+', '_');
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

std::string column_label(ModelKind model, int seq_len) {
  std::string s(model_name(model));
  if (seq_len > 0) s += "_" + std::to_string(seq_len) + "seq";
  return s;
}

std::string format_report(const std::vector<SummaryRow>& summary) {
  std::ostringstream os;
  os << "fold";
  for (const auto& row : summary) {
    const auto label = column_label(row.model, row.seq_len);
    os << ',' << label << "_acc," << label << "_f1";
  }
  os << '\n';
  const std::size_t folds = summary.empty() ? 0 : summary.front().fold_accuracy.size();
  for (std::size_t f = 0; f < folds; ++f) {
    os << "fold" << f + 1;
    for (const auto& row : summary) os << ',' << fixed(row.fold_accuracy[f]) << ',' << fixed(row.fold_f1[f]);
    os << '\n';
  }
  os << "avg";
  for (const auto& row : summary) os << ',' << fixed(row.mean_accuracy) << ',' << fixed(row.mean_f1);
  os << "\nstd";
  for (const auto& row : summary) os << ',' << fixed(row.std_accuracy) << ',' << fixed(row.std_f1);
  os << '\n';
  return os.str();
}

std::string format_confusion(const ConfusionMatrix& cm) {
  std::ostringstream os;
  os << "actual";
  for (int j = 0; j < static_cast<int>(kNumStages); ++j) os << ',' << stage_name(stage_from_index(j));
  os << '\n';
  const auto pct = cm.row_percent();
  for (int i = 0; i < static_cast<int>(kNumStages); ++i) {
    os << stage_name(stage_from_index(i));
    for (std::size_t j = 0; j < kNumStages; ++j) os << ',' << fixed(pct[static_cast<std::size_t>(i)][j], 2);
    os << '\n';
  }
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void emit_hypnogram(const std::vector<int>& predicted, const std::vector<int>& truth,
                    const std::filesystem::path& svg_path, const std::string& title) {
  if (predicted.empty()) throw std::invalid_argument("emit_hypnogram: empty sequence");
  if (predicted.size() != truth.size()) throw std::invalid_argument("emit_hypnogram: length mismatch");
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] < 0 || predicted[i] >= static_cast<int>(kNumStages) || truth[i] < 0 ||
        truth[i] >= static_cast<int>(kNumStages))
      throw std::invalid_argument("emit_hypnogram: stage index out of range at epoch " + std::to_string(i));
  }

  std::ostringstream csv;
  csv << "epoch,true,pred\n";
  for (std::size_t i = 0; i < predicted.size(); ++i)
    csv << i << ',' << stage_token(stage_from_index(truth[i])) << ',' << stage_token(stage_from_index(predicted[i]))
        << '\n';
  auto csv_path = svg_path;
  csv_path.replace_extension(".csv");
  write_text(csv_path, csv.str());

  // WAKE on top, SWS at the bottom, REM drawn between WAKE and S1 as is
  // customary for hypnograms.
  constexpr double kLevel[kNumStages] = {0, 2, 3, 4, 1};
  constexpr double width = 1000, height = 240, left = 50, top = 20, plot_h = 180;
  const double n = static_cast<double>(predicted.size());
  auto x = [&](double i) { return left + (width - left - 10) * i / n; };
  auto y = [&](int s) { return top + plot_h * kLevel[s] / 4.0; };
  auto trace = [&](const std::vector<int>& seq) {
    std::ostringstream p;
    char buf[64];
    std::snprintf(buf, sizeof buf, "M%.2f,%.2f", x(0), y(seq[0]));
    p << buf;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      std::snprintf(buf, sizeof buf, " H%.2f", x(static_cast<double>(i + 1)));
      p << buf;
      if (i + 1 < seq.size() && seq[i + 1] != seq[i]) {
        std::snprintf(buf, sizeof buf, " V%.2f", y(seq[i + 1]));
        p << buf;
      }
    }
    return p.str();
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  if (!title.empty()) svg << "  <title>" << title << "</title>\n";
  svg << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int s = 0; s < static_cast<int>(kNumStages); ++s)
    svg << "  <text x=\"4\" y=\"" << y(s) + 4 << "\" font-size=\"11\" font-family=\"sans-serif\">"
        << stage_name(stage_from_index(s)) << "</text>\n";
  svg << "  <path id=\"truth\" d=\"" << trace(truth) << "\" fill=\"none\" stroke=\"red\" stroke-width=\"1.5\"/>\n";
  svg << "  <path id=\"prediction\" d=\"" << trace(predicted)
      << "\" fill=\"none\" stroke=\"blue\" stroke-width=\"1\"/>\n";
  svg << "</svg>\n";
  write_text(svg_path, svg.str());
}

void write_experiment_outputs(const ExperimentResult& result, const ExperimentConfig& cfg,
                              const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "report.csv", format_report(result.summary));
  for (const auto& row : result.summary)
    write_text(out_dir / ("confusion_" + file_label(row.model, row.seq_len) + ".csv"), format_confusion(row.confusion));

  std::ostringstream folds, timings;
  folds << "fold,recording,repetition,model,seq_len,accuracy,f1,status\n";
  timings << "fold,repetition,model,seq_len,phase,seconds\n";
  for (const auto& r : result.reports) {
    const auto& id = result.recording_ids.at(r.fold);
    folds << r.fold + 1 << ',' << id << ',' << r.repetition << ',' << model_name(r.model) << ',' << r.seq_len << ','
          << fixed(r.accuracy, 6) << ',' << fixed(r.f1, 6) << ',' << (r.failed ? "failed" : "ok") << '\n';
    for (const auto& [phase, secs] : r.wall_times)
      timings << r.fold + 1 << ',' << r.repetition << ',' << model_name(r.model) << ',' << r.seq_len << ',' << phase
              << ',' << fixed(secs, 3) << '\n';
  }
  write_text(out_dir / "folds.csv", folds.str());

  std::ostringstream preds;
  preds << "fold,repetition,model,seq_len,epoch,true,pred,padded\n";
  for (const auto& r : result.reports) {
    if (r.failed) continue;
    for (std::size_t i = 0; i < r.predicted.size(); ++i)
      preds << r.fold + 1 << ',' << r.repetition << ',' << model_name(r.model) << ',' << r.seq_len << ',' << i << ','
            << stage_token(stage_from_index(r.truth[i])) << ',' << stage_token(stage_from_index(r.predicted[i])) << ','
            << (i < r.padded.size() && r.padded[i] ? 1 : 0) << '\n';
  }
  write_text(out_dir / "predictions.csv", preds.str());
  write_text(out_dir / "timings.csv", timings.str());

  const auto cols = report_columns(cfg);
  if (cols.empty()) return;
  auto chosen = cols.front();
  for (const auto& c : cols)
    if (c.first == ModelKind::DbnLstm) {
      chosen = c;
      break;
    }
  for (const auto& r : result.reports) {
    if (r.repetition != 0 || r.model != chosen.first || r.seq_len != chosen.second || r.failed) continue;
    const auto stem = "hypnogram_fold" + std::to_string(r.fold + 1);
    emit_hypnogram(r.predicted, r.truth, out_dir / (stem + ".svg"),
                   result.recording_ids.at(r.fold) + " " + column_label(r.model, r.seq_len));
  }
}

}  // namespace sleepstage
