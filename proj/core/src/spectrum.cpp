#include "sleepstage/spectrum.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <unsupported/Eigen/FFT>

namespace sleepstage {

Psd welch_psd(std::span<const double> signal, double fs, std::size_t segment_len) {
  if (!(fs > 0.0)) throw std::invalid_argument("sample rate must be positive");
  if (segment_len < 2 || signal.size() < segment_len)
    throw std::invalid_argument("welch: signal length " + std::to_string(signal.size()) + " < segment length " +
                                std::to_string(segment_len));

  std::vector<double> window(segment_len);
  double window_power = 0.0;
  for (std::size_t i = 0; i < segment_len; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(segment_len));
    window_power += window[i] * window[i];
  }

  const std::size_t hop = segment_len / 2;
  const std::size_t n_bins = segment_len / 2 + 1;
  Psd psd;
  psd.freqs.resize(n_bins);
  psd.power.assign(n_bins, 0.0);
  for (std::size_t k = 0; k < n_bins; ++k) psd.freqs[k] = static_cast<double>(k) * fs / static_cast<double>(segment_len);

  Eigen::FFT<double> fft;
  std::vector<double> segment(segment_len);
  std::vector<std::complex<double>> spectrum;
  std::size_t n_segments = 0;
  for (std::size_t start = 0; start + segment_len <= signal.size(); start += hop) {
    double mean = 0.0;
    for (std::size_t i = 0; i < segment_len; ++i) mean += signal[start + i];
    mean /= static_cast<double>(segment_len);
    for (std::size_t i = 0; i < segment_len; ++i) segment[i] = (signal[start + i] - mean) * window[i];
    fft.fwd(spectrum, segment);
    for (std::size_t k = 0; k < n_bins; ++k) psd.power[k] += std::norm(spectrum[k]);
    ++n_segments;
  }

  const double scale = 1.0 / (fs * window_power * static_cast<double>(n_segments));
  for (std::size_t k = 0; k < n_bins; ++k) {
    const bool edge = (k == 0) || (segment_len % 2 == 0 && k == n_bins - 1);
    psd.power[k] *= scale * (edge ? 1.0 : 2.0);
  }
  return psd;
}

double psd_band_sum(const Psd& psd, double lo, double hi, bool hi_inclusive) {
  double sum = 0.0;
  for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
    const double f = psd.freqs[k];
    if (f >= lo && (f < hi || (hi_inclusive && f <= hi))) sum += psd.power[k];
  }
  return sum;
}

}  // namespace sleepstage
