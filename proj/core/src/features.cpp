#include "sleepstage/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include "sleepstage/spectrum.hpp"

namespace sleepstage {

namespace {

constexpr double kTotalLo = 0.5;

constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "eeg_rel_delta",      "eeg_rel_theta",     "eeg_rel_alpha",    "eeg_rel_beta",      "eeg_rel_gamma",
    "eeg_mean_freq",      "eeg_spec_entropy",  "eeg_sig_entropy",  "eeg_kurtosis",      "eeg_median_abs",
    "eeg_higuchi_fd",     "eeg_rms",           "eogl_sig_entropy", "eogl_kurtosis",     "eogl_median_abs",
    "eogl_rms",           "eogr_sig_entropy",  "eogr_kurtosis",    "eogr_median_abs",   "eogr_rms",
    "eog_correlation",    "eog_movement_density", "emg_median_abs", "emg_sig_entropy",  "emg_kurtosis",
    "emg_rms",            "emg_edge_freq95",   "emg_zero_crossing",
};

void check_band(Band band, double fs) {
  if (!(band.lo >= 0.0) || !(band.lo < band.hi) || band.hi > fs / 2.0 + 1e-12)
    throw std::invalid_argument("band [" + std::to_string(band.lo) + ", " + std::to_string(band.hi) +
                                "] Hz is invalid or above Nyquist " + std::to_string(fs / 2.0));
}

double total_power(const Psd& psd, double fs) { return psd_band_sum(psd, kTotalLo, fs / 2.0, true); }

double relative_from_psd(const Psd& psd, double fs, Band band) {
  const double total = total_power(psd, fs);
  if (!(total > 0.0)) return 0.0;
  return psd_band_sum(psd, band.lo, band.hi) / total;
}

double entropy_from_psd(const Psd& psd, double fs) {
  const double total = total_power(psd, fs);
  std::size_t n_bins = 0;
  double h = 0.0;
  for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
    if (psd.freqs[k] < kTotalLo || psd.freqs[k] > fs / 2.0) continue;
    ++n_bins;
    if (total > 0.0 && psd.power[k] > 0.0) {
      const double p = psd.power[k] / total;
      h -= p * std::log(p);
    }
  }
  if (!(total > 0.0) || n_bins < 2) return 0.0;
  return h / std::log(static_cast<double>(n_bins));
}

double mean_freq_from_psd(const Psd& psd, double fs) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
    if (psd.freqs[k] < kTotalLo || psd.freqs[k] > fs / 2.0) continue;
    num += psd.freqs[k] * psd.power[k];
    den += psd.power[k];
  }
  return den > 0.0 ? num / den : 0.0;
}

double edge_freq_from_psd(const Psd& psd, double fs, double fraction) {
  const double total = total_power(psd, fs);
  if (!(total > 0.0)) return 0.0;
  double cum = 0.0;
  for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
    if (psd.freqs[k] < kTotalLo || psd.freqs[k] > fs / 2.0) continue;
    cum += psd.power[k];
    if (cum >= fraction * total) return psd.freqs[k];
  }
  return fs / 2.0;
}

double percentile_sorted(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::string_view feature_name(std::size_t index) {
  if (index >= kNumFeatures) throw std::out_of_range("feature index");
  return kFeatureNames[index];
}

double band_power(std::span<const double> signal, double fs, Band band) {
  check_band(band, fs);
  const Psd psd = welch_psd(signal, fs);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
    if (psd.freqs[k] >= band.lo && psd.freqs[k] < band.hi) {
      sum += psd.power[k];
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("band contains no frequency bins");
  return sum / static_cast<double>(n);
}

double relative_band_power(std::span<const double> signal, double fs, Band band) {
  check_band(band, fs);
  return relative_from_psd(welch_psd(signal, fs), fs, band);
}

double spectral_entropy(std::span<const double> signal, double fs) {
  return entropy_from_psd(welch_psd(signal, fs), fs);
}

double spectral_mean_frequency(std::span<const double> signal, double fs) {
  return mean_freq_from_psd(welch_psd(signal, fs), fs);
}

double spectral_edge_frequency(std::span<const double> signal, double fs, double fraction) {
  return edge_freq_from_psd(welch_psd(signal, fs), fs, fraction);
}

double higuchi_fd(std::span<const double> signal, int k_max) {
  if (k_max < 2) throw std::invalid_argument("higuchi_fd: k_max must be >= 2");
  const std::size_t n = signal.size();
  if (n < 10 * static_cast<std::size_t>(k_max))
    throw std::invalid_argument("higuchi_fd: signal shorter than 10 * k_max");

  std::vector<double> log_inv_k, log_len;
  for (int k = 1; k <= k_max; ++k) {
    double sum_lm = 0.0;
    for (int m = 0; m < k; ++m) {
      const std::size_t steps = (n - 1 - static_cast<std::size_t>(m)) / static_cast<std::size_t>(k);
      if (steps == 0) continue;
      double len = 0.0;
      for (std::size_t i = 1; i <= steps; ++i)
        len += std::abs(signal[m + i * k] - signal[m + (i - 1) * k]);
      sum_lm += len * static_cast<double>(n - 1) / (static_cast<double>(steps) * k) / k;
    }
    const double lk = sum_lm / k;
    if (!(lk > 0.0)) return 1.0;
    log_inv_k.push_back(std::log(1.0 / k));
    log_len.push_back(std::log(lk));
  }
  const double mx = std::accumulate(log_inv_k.begin(), log_inv_k.end(), 0.0) / log_inv_k.size();
  const double my = std::accumulate(log_len.begin(), log_len.end(), 0.0) / log_len.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < log_inv_k.size(); ++i) {
    sxy += (log_inv_k[i] - mx) * (log_len[i] - my);
    sxx += (log_inv_k[i] - mx) * (log_inv_k[i] - mx);
  }
  return sxy / sxx;
}

double signal_entropy(std::span<const double> signal, int bins) {
  if (signal.empty() || bins < 2) return 0.0;
  const auto [mn_it, mx_it] = std::minmax_element(signal.begin(), signal.end());
  const double mn = *mn_it, mx = *mx_it;
  if (!(mx > mn)) return 0.0;
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  const double width = (mx - mn) / bins;
  for (double x : signal) {
    auto b = static_cast<std::size_t>((x - mn) / width);
    counts[std::min(b, counts.size() - 1)]++;
  }
  double h = 0.0;
  const double n = static_cast<double>(signal.size());
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h / std::log(static_cast<double>(bins));
}

double kurtosis(std::span<const double> signal) {
  if (signal.empty()) return 0.0;
  const double n = static_cast<double>(signal.size());
  const double mean = std::accumulate(signal.begin(), signal.end(), 0.0) / n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : signal) {
    const double d2 = (x - mean) * (x - mean);
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) return 0.0;
  return m4 / (m2 * m2);
}

double median_abs(std::span<const double> signal) {
  if (signal.empty()) return 0.0;
  std::vector<double> a(signal.size());
  std::transform(signal.begin(), signal.end(), a.begin(), [](double x) { return std::abs(x); });
  const std::size_t mid = a.size() / 2;
  std::nth_element(a.begin(), a.begin() + mid, a.end());
  if (a.size() % 2 == 1) return a[mid];
  const double upper = a[mid];
  const double lower = *std::max_element(a.begin(), a.begin() + mid);
  return 0.5 * (lower + upper);
}

double rms(std::span<const double> signal) {
  if (signal.empty()) return 0.0;
  double s = 0.0;
  for (double x : signal) s += x * x;
  return std::sqrt(s / static_cast<double>(signal.size()));
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson_correlation: length mismatch");
  if (a.empty()) return 0.0;
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double zero_crossing_rate(std::span<const double> signal) {
  if (signal.size() < 2) return 0.0;
  std::size_t crossings = 0;
  for (std::size_t i = 1; i < signal.size(); ++i)
    if ((signal[i - 1] < 0.0 && signal[i] > 0.0) || (signal[i - 1] > 0.0 && signal[i] < 0.0)) ++crossings;
  return static_cast<double>(crossings) / static_cast<double>(signal.size() - 1);
}

double movement_density(std::span<const double> signal, double fs) {
  const auto win = static_cast<std::size_t>(std::llround(fs));
  if (win == 0 || signal.size() < win) return 0.0;
  std::vector<double> window_rms;
  for (std::size_t start = 0; start + win <= signal.size(); start += win)
    window_rms.push_back(rms(signal.subspan(start, win)));
  std::vector<double> sorted = window_rms;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  const double median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  const auto above = std::count_if(window_rms.begin(), window_rms.end(), [&](double r) { return r > 2.0 * median; });
  return static_cast<double>(above) / static_cast<double>(window_rms.size());
}

FeatureVector extract_features(const Epoch& epoch, double fs) {
  FeatureVector f{};
  const auto eeg = epoch.channel(Channel::Eeg);
  const auto eog_l = epoch.channel(Channel::EogL);
  const auto eog_r = epoch.channel(Channel::EogR);
  const auto emg = epoch.channel(Channel::Emg);

  const Psd eeg_psd = welch_psd(eeg, fs);
  for (std::size_t b = 0; b < kEegBands.size(); ++b) {
    check_band(kEegBands[b], fs);
    f[kEegDelta + b] = relative_from_psd(eeg_psd, fs, kEegBands[b]);
  }
  f[kEegMeanFreq] = mean_freq_from_psd(eeg_psd, fs);
  f[kEegSpectralEntropy] = entropy_from_psd(eeg_psd, fs);
  f[kEegSignalEntropy] = signal_entropy(eeg);
  f[kEegKurtosis] = kurtosis(eeg);
  f[kEegMedianAbs] = median_abs(eeg);
  f[kEegHiguchi] = higuchi_fd(eeg, 8);
  f[kEegRms] = rms(eeg);

  f[kEogLSignalEntropy] = signal_entropy(eog_l);
  f[kEogLKurtosis] = kurtosis(eog_l);
  f[kEogLMedianAbs] = median_abs(eog_l);
  f[kEogLRms] = rms(eog_l);
  f[kEogRSignalEntropy] = signal_entropy(eog_r);
  f[kEogRKurtosis] = kurtosis(eog_r);
  f[kEogRMedianAbs] = median_abs(eog_r);
  f[kEogRRms] = rms(eog_r);
  f[kEogCorrelation] = pearson_correlation(eog_l, eog_r);
  f[kEogMovementDensity] = 0.5 * (movement_density(eog_l, fs) + movement_density(eog_r, fs));

  const Psd emg_psd = welch_psd(emg, fs);
  f[kEmgMedianAbs] = median_abs(emg);
  f[kEmgSignalEntropy] = signal_entropy(emg);
  f[kEmgKurtosis] = kurtosis(emg);
  f[kEmgRms] = rms(emg);
  f[kEmgEdgeFreq] = edge_freq_from_psd(emg_psd, fs, 0.95);
  f[kEmgZeroCrossing] = zero_crossing_rate(emg);
  return f;
}

std::vector<FeatureVector> extract_recording_features(const Recording& recording) {
  std::vector<FeatureVector> out;
  out.reserve(recording.num_epochs());
  for (const auto& e : segment_epochs(recording)) out.push_back(extract_features(e, recording.sample_rate_hz));
  return out;
}

FeatureScaler::FeatureScaler(FeatureVector low, FeatureVector high) : low_(low), high_(high) {
  for (std::size_t i = 0; i < kNumFeatures; ++i)
    if (!(low_[i] < high_[i])) throw std::invalid_argument("scaler bounds must satisfy low < high");
}

FeatureScaler FeatureScaler::fit(std::span<const FeatureVector> train) {
  if (train.size() < 2) throw std::invalid_argument("fit_scaler needs at least 2 training vectors");
  FeatureVector low{}, high{};
  std::vector<double> column(train.size());
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    for (std::size_t i = 0; i < train.size(); ++i) column[i] = train[i][j];
    std::sort(column.begin(), column.end());
    low[j] = percentile_sorted(column, kLowPercentile);
    high[j] = percentile_sorted(column, kHighPercentile);
    if (!(high[j] > low[j])) {
      const double mid = 0.5 * (low[j] + high[j]);
      low[j] = mid - kMinHalfSpread;
      high[j] = mid + kMinHalfSpread;
    }
  }
  return FeatureScaler(low, high);
}

FeatureVector FeatureScaler::apply(const FeatureVector& v) const {
  FeatureVector out{};
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    const double x = std::clamp(v[j], low_[j], high_[j]);
    out[j] = x >= high_[j] ? 1.0 : (x - low_[j]) / (high_[j] - low_[j]);
  }
  return out;
}

void FeatureScaler::save(const std::filesystem::path& path) const {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw std::runtime_error("cannot write " + path.string());
  std::fprintf(f, "scaler v1 %zu\n", kNumFeatures);
  for (const auto* row : {&low_, &high_}) {
    for (std::size_t j = 0; j < kNumFeatures; ++j) std::fprintf(f, j ? " %.17g" : "%.17g", (*row)[j]);
    std::fputc('\n', f);
  }
  std::fclose(f);
}

FeatureScaler FeatureScaler::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic, version;
  std::size_t n = 0;
  in >> magic >> version >> n;
  if (magic != "scaler" || version != "v1" || n != kNumFeatures)
    throw std::runtime_error(path.string() + ": not a 'scaler v1 28' file");
  FeatureVector low{}, high{};
  for (auto& x : low) in >> x;
  for (auto& x : high) in >> x;
  if (!in) throw std::runtime_error(path.string() + ": truncated scaler file");
  return FeatureScaler(low, high);
}

void write_features_csv(const std::filesystem::path& path, const Recording& recording,
                        std::span<const FeatureVector> features) {
  if (features.size() != recording.num_epochs())
    throw std::invalid_argument("feature count does not match epoch count");
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw std::runtime_error("cannot write " + path.string());
  std::fputs("epoch,stage", f);
  for (std::size_t j = 0; j < kNumFeatures; ++j) std::fprintf(f, ",f%02zu", j);
  std::fputc('\n', f);
  for (std::size_t i = 0; i < features.size(); ++i) {
    std::fprintf(f, "%zu,%s", i, std::string(stage_token(recording.labels[i])).c_str());
    for (double x : features[i]) std::fprintf(f, ",%.17g", x);
    std::fputc('\n', f);
  }
  if (std::fclose(f) != 0) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace sleepstage
