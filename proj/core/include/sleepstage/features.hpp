#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "sleepstage/psg_data.hpp"

namespace sleepstage {

inline constexpr std::size_t kNumFeatures = 28;

using FeatureVector = std::array<double, kNumFeatures>;

/// Column order of a FeatureVector.
enum Feature : std::size_t {
  kEegDelta = 0,
  kEegTheta,
  kEegAlpha,
  kEegBeta,
  kEegGamma,
  kEegMeanFreq,
  kEegSpectralEntropy,
  kEegSignalEntropy,
  kEegKurtosis,
  kEegMedianAbs,
  kEegHiguchi,
  kEegRms,
  kEogLSignalEntropy,
  kEogLKurtosis,
  kEogLMedianAbs,
  kEogLRms,
  kEogRSignalEntropy,
  kEogRKurtosis,
  kEogRMedianAbs,
  kEogRRms,
  kEogCorrelation,
  kEogMovementDensity,
  kEmgMedianAbs,
  kEmgSignalEntropy,
  kEmgKurtosis,
  kEmgRms,
  kEmgEdgeFreq,
  kEmgZeroCrossing,
};

std::string_view feature_name(std::size_t index);

struct Band {
  double lo;
  double hi;
};

inline constexpr std::array<Band, 5> kEegBands = {{{0.5, 4.0}, {4.0, 8.0}, {8.0, 13.0}, {13.0, 20.0}, {20.0, 40.0}}};

/// Mean Welch PSD value over bins with lo <= f < hi. Throws if the band is
/// empty, negative or above Nyquist.
double band_power(std::span<const double> signal, double fs, Band band);

/// Band power share of total power over [0.5, fs/2]. Zero signal -> 0.
double relative_band_power(std::span<const double> signal, double fs, Band band);

/// Normalized Shannon entropy of the PSD over [0.5, fs/2]; in [0,1].
double spectral_entropy(std::span<const double> signal, double fs);

/// Power-weighted mean frequency over [0.5, fs/2].
double spectral_mean_frequency(std::span<const double> signal, double fs);

/// Lowest frequency below which `fraction` of the [0.5, fs/2] power lies.
double spectral_edge_frequency(std::span<const double> signal, double fs, double fraction = 0.95);

/// Higuchi fractal dimension; constant signals return 1.0.
double higuchi_fd(std::span<const double> signal, int k_max);

/// Amplitude-histogram entropy, normalized by log(bins).
double signal_entropy(std::span<const double> signal, int bins = 32);

/// Non-excess kurtosis m4 / m2^2; 0 for zero variance.
double kurtosis(std::span<const double> signal);

double median_abs(std::span<const double> signal);
double rms(std::span<const double> signal);
double pearson_correlation(std::span<const double> a, std::span<const double> b);
double zero_crossing_rate(std::span<const double> signal);

/// Fraction of 1 s sub-windows whose RMS exceeds twice the median sub-window RMS.
double movement_density(std::span<const double> signal, double fs);

FeatureVector extract_features(const Epoch& epoch, double fs);

/// Extracts every epoch of a recording, in order.
std::vector<FeatureVector> extract_recording_features(const Recording& recording);

/// Percentile scaler mapping each feature to [0,1].
class FeatureScaler {
 public:
  static constexpr double kLowPercentile = 0.01;
  static constexpr double kHighPercentile = 0.99;
  static constexpr double kMinHalfSpread = 1e-6;

  FeatureScaler() = default;
  FeatureScaler(FeatureVector low, FeatureVector high);

  /// Fits 1st/99th percentiles; needs at least 2 vectors.
  static FeatureScaler fit(std::span<const FeatureVector> train);

  FeatureVector apply(const FeatureVector& v) const;

  const FeatureVector& low() const { return low_; }
  const FeatureVector& high() const { return high_; }

  void save(const std::filesystem::path& path) const;
  static FeatureScaler load(const std::filesystem::path& path);

 private:
  FeatureVector low_{};
  FeatureVector high_{};
};

inline FeatureScaler fit_scaler(std::span<const FeatureVector> train) { return FeatureScaler::fit(train); }
inline FeatureVector apply_scaler(const FeatureScaler& s, const FeatureVector& v) { return s.apply(v); }

/// `epoch,stage,f00..f27` with 17 significant digits.
void write_features_csv(const std::filesystem::path& path, const Recording& recording,
                        std::span<const FeatureVector> features);

}  // namespace sleepstage
