#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "sleepstage/stage.hpp"

namespace sleepstage {

/// Rows are actual classes, columns predicted classes.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumStages>, kNumStages> counts{};

  void add(int actual, int predicted);
  void merge(const ConfusionMatrix& other);

  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_total(int actual) const;
  std::uint64_t column_total(int predicted) const;

  /// trace / total; 0 for an empty matrix.
  double accuracy() const;

  /// Row-normalized percentages; empty rows stay 0.
  std::array<std::array<double, kNumStages>, kNumStages> row_percent() const;

  double precision(int cls) const;
  double recall(int cls) const;
  /// 2PR/(P+R); 0 when P+R = 0.
  double f1(int cls) const;
};

/// Throws std::invalid_argument on length mismatch, empty input or a label
/// outside 0..4.
ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> actual);

/// Unweighted mean of per-class F1 over all five classes.
double f1_macro(const ConfusionMatrix& cm);

/// Per-class F1 weighted by actual-class support.
double f1_weighted(const ConfusionMatrix& cm);

enum class F1Mode { Macro, Weighted };
double f1_score(const ConfusionMatrix& cm, F1Mode mode);

}  // namespace sleepstage
