#include "sleepstage/metrics.hpp"

#include <stdexcept>
#include <string>

namespace sleepstage {

namespace {
void check_class(int c) {
  if (c < 0 || c >= static_cast<int>(kNumStages)) throw std::invalid_argument("class index out of range: " + std::to_string(c));
}
}  // namespace

void ConfusionMatrix::add(int actual, int predicted) {
  check_class(actual);
  check_class(predicted);
  ++counts[static_cast<std::size_t>(actual)][static_cast<std::size_t>(predicted)];
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  for (std::size_t a = 0; a < kNumStages; ++a)
    for (std::size_t p = 0; p < kNumStages; ++p) counts[a][p] += other.counts[a][p];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (const auto& row : counts)
    for (auto c : row) n += c;
  return n;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t n = 0;
  for (std::size_t k = 0; k < kNumStages; ++k) n += counts[k][k];
  return n;
}

std::uint64_t ConfusionMatrix::row_total(int actual) const {
  std::uint64_t n = 0;
  for (auto c : counts[static_cast<std::size_t>(actual)]) n += c;
  return n;
}

std::uint64_t ConfusionMatrix::column_total(int predicted) const {
  std::uint64_t n = 0;
  for (const auto& row : counts) n += row[static_cast<std::size_t>(predicted)];
  return n;
}

double ConfusionMatrix::accuracy() const {
  const auto n = total();
  return n ? static_cast<double>(trace()) / static_cast<double>(n) : 0.0;
}

std::array<std::array<double, kNumStages>, kNumStages> ConfusionMatrix::row_percent() const {
  std::array<std::array<double, kNumStages>, kNumStages> out{};
  for (std::size_t a = 0; a < kNumStages; ++a) {
    const auto n = row_total(static_cast<int>(a));
    if (!n) continue;
    for (std::size_t p = 0; p < kNumStages; ++p)
      out[a][p] = 100.0 * static_cast<double>(counts[a][p]) / static_cast<double>(n);
  }
  return out;
}

double ConfusionMatrix::precision(int cls) const {
  const auto n = column_total(cls);
  return n ? static_cast<double>(counts[static_cast<std::size_t>(cls)][static_cast<std::size_t>(cls)]) / static_cast<double>(n) : 0.0;
}

double ConfusionMatrix::recall(int cls) const {
  const auto n = row_total(cls);
  return n ? static_cast<double>(counts[static_cast<std::size_t>(cls)][static_cast<std::size_t>(cls)]) / static_cast<double>(n) : 0.0;
}

double ConfusionMatrix::f1(int cls) const {
  const double p = precision(cls), r = recall(cls);
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> actual) {
  if (predicted.size() != actual.size()) throw std::invalid_argument("confusion: length mismatch");
  if (predicted.empty()) throw std::invalid_argument("confusion: empty input");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predicted.size(); ++i) cm.add(actual[i], predicted[i]);
  return cm;
}

double f1_macro(const ConfusionMatrix& cm) {
  double sum = 0.0;
  for (int c = 0; c < static_cast<int>(kNumStages); ++c) sum += cm.f1(c);
  return sum / static_cast<double>(kNumStages);
}

double f1_weighted(const ConfusionMatrix& cm) {
  const auto n = cm.total();
  if (!n) return 0.0;
  double sum = 0.0;
  for (int c = 0; c < static_cast<int>(kNumStages); ++c) sum += cm.f1(c) * static_cast<double>(cm.row_total(c));
  return sum / static_cast<double>(n);
}

double f1_score(const ConfusionMatrix& cm, F1Mode mode) {
  return mode == F1Mode::Macro ? f1_macro(cm) : f1_weighted(cm);
}

}  // namespace sleepstage
