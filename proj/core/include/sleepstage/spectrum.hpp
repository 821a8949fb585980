#pragma once

#include <span>
#include <vector>

namespace sleepstage {

/// One-sided power spectral density estimate.
struct Psd {
  std::vector<double> freqs;  // Hz, bin k at k * fs / segment_len
  std::vector<double> power;  // per-Hz density
};

inline constexpr std::size_t kWelchSegment = 256;

/// Welch estimate: Hann-windowed 256-sample segments with 50% overlap,
/// averaged. Requires at least 256 samples.
Psd welch_psd(std::span<const double> signal, double fs, std::size_t segment_len = kWelchSegment);

/// Sum of PSD bins with lo <= f < hi. `hi_inclusive` also admits f == hi.
double psd_band_sum(const Psd& psd, double lo, double hi, bool hi_inclusive = false);

}  // namespace sleepstage
