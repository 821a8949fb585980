#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sleepstage/metrics.hpp"
#include "sleepstage/report.hpp"

using namespace sleepstage;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// rows are actual classes, entries are counts per predicted class
ConfusionMatrix matrix(std::initializer_list<std::initializer_list<int>> rows) {
  ConfusionMatrix cm;
  int a = 0;
  for (const auto& r : rows) {
    int p = 0;
    for (int n : r) {
      for (int k = 0; k < n; ++k) cm.add(a, p);
      ++p;
    }
    ++a;
  }
  return cm;
}

}  // namespace

TEST(Confusion, PerfectPrediction) {
  const std::vector<int> y = {0, 1, 2, 3, 4, 4, 2};
  const ConfusionMatrix cm = confusion(y, y);
  EXPECT_EQ(cm.total(), 7u);
  EXPECT_EQ(cm.trace(), 7u);
  EXPECT_DOUBLE_EQ(cm.accuracy(), 1.0);
  EXPECT_DOUBLE_EQ(f1_macro(cm), 1.0);
}

TEST(Confusion, AllWakePredictedAsS1) {
  const std::vector<int> truth(6, 0), pred(6, 1);
  const ConfusionMatrix cm = confusion(pred, truth);
  EXPECT_EQ(cm.counts[0][1], 6u);
  EXPECT_DOUBLE_EQ(cm.accuracy(), 0.0);
  EXPECT_DOUBLE_EQ(f1_macro(cm), 0.0);
}

TEST(Confusion, TenItemHandCase) {
  const std::vector<int> truth = {0, 0, 0, 1, 1, 2, 2, 3, 4, 4};
  const std::vector<int> pred = {0, 0, 1, 1, 2, 2, 2, 3, 4, 0};
  const ConfusionMatrix cm = confusion(pred, truth);
  EXPECT_EQ(cm.trace(), 7u);
  EXPECT_DOUBLE_EQ(cm.accuracy(), 0.7);
  EXPECT_DOUBLE_EQ(cm.precision(0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(cm.recall(0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(cm.f1(3), 1.0);
  EXPECT_DOUBLE_EQ(cm.f1(4), 2.0 / 3.0);
  const auto pct = cm.row_percent();
  for (std::size_t r = 0; r < kNumStages; ++r) {
    double s = 0.0;
    for (double v : pct[r]) s += v;
    EXPECT_NEAR(s, 100.0, 1e-9);
  }
  EXPECT_NEAR(pct[0][1], 100.0 / 3.0, 1e-12);
}

TEST(Confusion, RejectsBadInput) {
  const std::vector<int> a = {0, 1}, b = {0}, bad = {0, 5}, none;
  EXPECT_THROW(confusion(a, b), std::invalid_argument);
  EXPECT_THROW(confusion(none, none), std::invalid_argument);
  EXPECT_THROW(confusion(bad, a), std::invalid_argument);
}

TEST(Confusion, EmptyRowsStayZero) {
  const std::vector<int> y = {0, 0, 2};
  const auto pct = confusion(y, y).row_percent();
  for (double v : pct[1]) EXPECT_EQ(v, 0.0);
}

TEST(F1, MacroHandValue) {
  // class 0 perfect (F1 1), class 1 P=R=0.5 (F1 0.5), the rest 0
  const ConfusionMatrix cm = matrix({{4, 0, 0, 0, 0},
                                     {0, 1, 1, 0, 0},
                                     {0, 1, 0, 0, 0},
                                     {0, 0, 0, 0, 1},
                                     {0, 0, 0, 1, 0}});
  EXPECT_DOUBLE_EQ(cm.f1(0), 1.0);
  EXPECT_DOUBLE_EQ(cm.f1(1), 0.5);
  EXPECT_DOUBLE_EQ(cm.f1(2), 0.0);
  EXPECT_NEAR(f1_macro(cm), 0.3, 1e-15);
  EXPECT_DOUBLE_EQ(f1_score(cm, F1Mode::Macro), f1_macro(cm));
}

TEST(F1, WeightedBySupport) {
  const ConfusionMatrix cm = matrix({{4, 0, 0, 0, 0},
                                     {0, 1, 1, 0, 0},
                                     {0, 1, 0, 0, 0},
                                     {0, 0, 0, 0, 1},
                                     {0, 0, 0, 1, 0}});
  // supports 4,2,1,1,1
  EXPECT_NEAR(f1_weighted(cm), (4.0 * 1.0 + 2.0 * 0.5) / 9.0, 1e-15);
  EXPECT_DOUBLE_EQ(f1_score(cm, F1Mode::Weighted), f1_weighted(cm));
}

TEST(Summary, PublishedFoldValuesReproduceAverages) {
  // the published table keeps three decimals and truncates 0.5156
  const auto dbn = mean_and_sample_std({0.473, 0.564, 0.486, 0.569, 0.486});
  EXPECT_NEAR(dbn.first, 0.515, 1e-3);
  EXPECT_NEAR(dbn.second, 0.047, 1e-3);
  const auto hmm = mean_and_sample_std({0.634, 0.793, 0.653, 0.792, 0.756});
  EXPECT_NEAR(hmm.first, 0.726, 1e-3);
  EXPECT_NEAR(hmm.second, 0.077, 1e-3);
}

TEST(Summary, NanEntriesIgnoredAndSingleValueHasZeroStd) {
  const auto r = mean_and_sample_std({0.5, std::nan(""), 0.7});
  EXPECT_NEAR(r.first, 0.6, 1e-15);
  EXPECT_NEAR(r.second, std::sqrt(0.02), 1e-15);
  EXPECT_EQ(mean_and_sample_std({0.4}).second, 0.0);
}

TEST(Report, ColumnLabels) {
  EXPECT_EQ(column_label(ModelKind::Dbn, 0), "DBN");
  EXPECT_EQ(column_label(ModelKind::DbnHmm, 0), "DBN+HMM");
  EXPECT_EQ(column_label(ModelKind::Lstm, 5), "LSTM_5seq");
  EXPECT_EQ(column_label(ModelKind::DbnLstm, 15), "DBN+LSTM_15seq");
}

TEST(Report, TableShape) {
  SummaryRow a;
  a.model = ModelKind::Dbn;
  a.fold_accuracy = {0.5, 0.6, 0.7};
  a.fold_f1 = {0.4, std::nan(""), 0.6};
  a.mean_accuracy = 0.6;
  a.std_accuracy = 0.1;
  a.mean_f1 = 0.5;
  a.std_f1 = std::sqrt(0.02);
  SummaryRow b = a;
  b.model = ModelKind::DbnLstm;
  b.seq_len = 10;
  const auto l = lines_of(format_report({a, b}));
  ASSERT_EQ(l.size(), 6u);
  EXPECT_EQ(l[0], "fold,DBN_acc,DBN_f1,DBN+LSTM_10seq_acc,DBN+LSTM_10seq_f1");
  EXPECT_EQ(l[1].rfind("fold1,0.5000,0.4000,", 0), 0u);
  EXPECT_EQ(l[2], "fold2,0.6000,NA,0.6000,NA");
  EXPECT_EQ(l[4].rfind("avg,0.6000,0.5000", 0), 0u);
  EXPECT_EQ(l[5].rfind("std,0.1000,0.1414", 0), 0u);
}

TEST(Report, ConfusionLayout) {
  const std::vector<int> t = {0, 0, 1}, p = {0, 1, 1};
  const auto l = lines_of(format_confusion(confusion(p, t)));
  ASSERT_EQ(l.size(), 6u);
  EXPECT_EQ(l[0], "actual,WAKE,S1,S2,SWS,REM");
  EXPECT_EQ(l[1], "WAKE,50.00,50.00,0.00,0.00,0.00");
  EXPECT_EQ(l[2], "S1,0.00,100.00,0.00,0.00,0.00");
}

TEST(Hypnogram, WritesSvgAndCsv) {
  const fs::path dir = fs::temp_directory_path() / "hyp_test";
  fs::create_directories(dir);
  const std::vector<int> truth = {0, 2, 3}, pred = {0, 2, 2};
  emit_hypnogram(pred, truth, dir / "h.svg", "fold 1");
  const std::string svg = slurp(dir / "h.svg");
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  const auto rows = lines_of(slurp(dir / "h.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "epoch,true,pred");
  EXPECT_EQ(rows[3], "2,SWS,S2");
  fs::remove_all(dir);
}

TEST(Hypnogram, IdenticalSequencesGiveOverlappingPaths) {
  const fs::path dir = fs::temp_directory_path() / "hyp_same";
  fs::create_directories(dir);
  const std::vector<int> y = {0, 1, 2, 3, 4, 2};
  emit_hypnogram(y, y, dir / "h.svg");
  const std::string svg = slurp(dir / "h.svg");
  auto points = [&](const std::string& color) {
    const auto at = svg.find("stroke=\"" + color + "\"");
    const auto start = svg.rfind(" d=\"", at);
    return svg.substr(start, svg.find('"', start + 4) - start);
  };
  ASSERT_NE(svg.find("stroke=\"red\""), std::string::npos);
  ASSERT_NE(svg.find("stroke=\"blue\""), std::string::npos);
  EXPECT_EQ(points("red"), points("blue"));
  fs::remove_all(dir);
}

TEST(Hypnogram, RejectsBadInput) {
  const fs::path p = fs::temp_directory_path() / "never.svg";
  EXPECT_THROW(emit_hypnogram({}, {}, p), std::invalid_argument);
  EXPECT_THROW(emit_hypnogram({0, 1}, {0}, p), std::invalid_argument);
  EXPECT_THROW(emit_hypnogram({7}, {0}, p), std::invalid_argument);
}
