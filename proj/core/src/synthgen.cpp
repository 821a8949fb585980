#include "sleepstage/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <string>

#include "sleepstage/features.hpp"
#include "sleepstage/random.hpp"

namespace sleepstage {

namespace {

// Component frequency ranges per EEG band; delta starts above 0.5 Hz so the
// generated power lands inside the analysis range.
constexpr std::array<Band, 5> kSynthBands = {{{0.8, 3.8}, {4.2, 7.8}, {8.2, 12.8}, {13.2, 19.8}, {20.5, 38.0}}};
constexpr int kComponentsPerBand = 3;
constexpr double kBurstWidthS = 0.15;

}  // namespace

StageProfiles default_profiles() {
  StageProfiles p{};
  //                      delta theta alpha beta gamma   emg  rate   amp  noise corr
  p[0] = StageProfile{{8.0, 6.0, 22.0, 12.0, 6.0}, 25.0, 8.0, 60.0, 3.0, false};   // WAKE
  p[1] = StageProfile{{12.0, 16.0, 8.0, 7.0, 3.0}, 14.0, 3.0, 35.0, 3.0, false};   // S1
  p[2] = StageProfile{{28.0, 14.0, 5.0, 9.0, 2.0}, 10.0, 1.0, 20.0, 3.0, false};   // S2
  p[3] = StageProfile{{60.0, 12.0, 4.0, 3.0, 1.5}, 8.0, 0.5, 15.0, 3.0, false};    // SWS
  p[4] = StageProfile{{11.0, 15.0, 7.0, 8.0, 3.0}, 4.0, 12.0, 55.0, 3.0, true};    // REM
  return p;
}

HypnogramChain HypnogramChain::default_chain() {
  HypnogramChain c;
  c.transition = {{
      {0.90, 0.08, 0.01, 0.00, 0.01},
      {0.05, 0.85, 0.08, 0.00, 0.02},
      {0.01, 0.02, 0.90, 0.04, 0.03},
      {0.01, 0.00, 0.06, 0.93, 0.00},
      {0.02, 0.02, 0.04, 0.00, 0.92},
  }};
  c.initial = SleepStage::Wake;
  return c;
}

void HypnogramChain::validate() const {
  for (std::size_t i = 0; i < kNumStages; ++i) {
    double sum = 0.0;
    for (double p : transition[i]) {
      if (!(p >= 0.0)) throw std::invalid_argument("hypnogram chain: negative transition probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("hypnogram chain: row " + std::to_string(i) + " does not sum to 1");
  }
}

std::vector<SleepStage> gen_hypnogram(const HypnogramChain& chain, std::size_t n_epochs, std::uint64_t seed) {
  if (n_epochs < 1) throw std::invalid_argument("gen_hypnogram: n_epochs must be >= 1");
  chain.validate();
  Rng rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<SleepStage> out;
  out.reserve(n_epochs);
  SleepStage cur = chain.initial;
  out.push_back(cur);
  while (out.size() < n_epochs) {
    const auto& row = chain.transition[static_cast<std::size_t>(stage_index(cur))];
    const double u = uniform(rng);
    double acc = 0.0;
    int next = stage_index(cur);
    for (std::size_t j = 0; j < kNumStages; ++j) {
      acc += row[j];
      if (u < acc && row[j] > 0.0) {
        next = static_cast<int>(j);
        break;
      }
    }
    cur = stage_from_index(next);
    out.push_back(cur);
  }
  return out;
}

EpochSignal gen_epoch_signal(SleepStage stage, const StageProfile& profile, double fs, std::uint64_t seed,
                             double epoch_len_s, const SignalVariability& variability) {
  if (fs < 80.0) throw std::invalid_argument("gen_epoch_signal: fs must be >= 80 Hz");
  const auto n = static_cast<std::size_t>(std::llround(epoch_len_s * fs));
  Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(stage_index(stage))}));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  auto jitter = [&] { return std::exp(variability.amplitude_jitter * gauss(rng)); };
  constexpr double two_pi = 2.0 * std::numbers::pi;

  EpochSignal sig;
  for (auto& ch : sig) ch.assign(n, 0.0);
  auto& eeg = sig[static_cast<std::size_t>(Channel::Eeg)];
  auto& eog_l = sig[static_cast<std::size_t>(Channel::EogL)];
  auto& eog_r = sig[static_cast<std::size_t>(Channel::EogR)];
  auto& emg = sig[static_cast<std::size_t>(Channel::Emg)];

  for (std::size_t b = 0; b < kSynthBands.size(); ++b) {
    const double band_amp = profile.eeg_band_amplitude[b] * jitter();
    const double comp_amp = band_amp / std::sqrt(0.5 * kComponentsPerBand);
    for (int k = 0; k < kComponentsPerBand; ++k) {
      const double f = kSynthBands[b].lo + (kSynthBands[b].hi - kSynthBands[b].lo) * uniform(rng);
      const double phase = two_pi * uniform(rng);
      for (std::size_t i = 0; i < n; ++i) eeg[i] += comp_amp * std::sin(two_pi * f * static_cast<double>(i) / fs + phase);
    }
  }
  for (auto& x : eeg) x += profile.noise_floor * gauss(rng);

  const double emg_amp = profile.emg_scale * jitter();
  for (auto& x : emg) x = emg_amp * gauss(rng);

  // Eye movements: Poisson-timed Gaussian bumps.
  auto add_bursts = [&](std::vector<double>* first, std::vector<double>* second) {
    const double expected = profile.eog_burst_rate * epoch_len_s / 60.0 * jitter();
    std::poisson_distribution<int> count_dist(expected);
    const int count = count_dist(rng);
    const double width = kBurstWidthS * fs;
    for (int k = 0; k < count; ++k) {
      const double center = uniform(rng) * static_cast<double>(n);
      const double amp = profile.eog_burst_amplitude * jitter() * (uniform(rng) < 0.5 ? -1.0 : 1.0);
      const auto lo = static_cast<std::ptrdiff_t>(center - 4.0 * width);
      const auto hi = static_cast<std::ptrdiff_t>(center + 4.0 * width);
      for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(lo, 0); i < std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(n)); ++i) {
        const double z = (static_cast<double>(i) - center) / width;
        const double v = amp * std::exp(-0.5 * z * z);
        (*first)[static_cast<std::size_t>(i)] += v;
        if (second) (*second)[static_cast<std::size_t>(i)] += v;
      }
    }
  };
  if (profile.eog_correlated) {
    add_bursts(&eog_l, &eog_r);
  } else {
    add_bursts(&eog_l, nullptr);
    add_bursts(&eog_r, nullptr);
  }
  for (std::size_t i = 0; i < n; ++i) {
    eog_l[i] += variability.eog_eeg_leak * eeg[i] + profile.noise_floor * gauss(rng);
    eog_r[i] += variability.eog_eeg_leak * eeg[i] + profile.noise_floor * gauss(rng);
  }
  return sig;
}

Recording gen_recording(const SynthConfig& cfg, std::size_t index) {
  const std::uint64_t rec_seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(index)});
  Recording rec;
  char id[32];
  std::snprintf(id, sizeof id, "night%02zu", index + 1);
  rec.id = id;
  rec.sample_rate_hz = cfg.fs;
  rec.epoch_len_s = cfg.epoch_len_s;
  rec.labels = gen_hypnogram(cfg.chain, cfg.epochs_per_recording, derive_seed(rec_seed, {1}));

  Rng gain_rng(derive_seed(rec_seed, {2}));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::array<double, kNumChannels> gain{};
  for (auto& g : gain) g = std::exp(cfg.recording_gain_spread * gauss(gain_rng));

  const std::size_t per_epoch = rec.samples_per_epoch();
  for (auto& ch : rec.channels) ch.reserve(per_epoch * rec.labels.size());
  for (std::size_t e = 0; e < rec.labels.size(); ++e) {
    const SleepStage s = rec.labels[e];
    const auto sig = gen_epoch_signal(s, cfg.profiles[static_cast<std::size_t>(stage_index(s))], cfg.fs,
                                      derive_seed(rec_seed, {3, e}), cfg.epoch_len_s, cfg.variability);
    for (std::size_t c = 0; c < kNumChannels; ++c)
      for (double x : sig[c]) rec.channels[c].push_back(gain[c] * x);
  }
  return rec;
}

std::vector<Recording> gen_dataset(const SynthConfig& cfg) {
  if (cfg.recordings < 1) throw std::invalid_argument("gen_dataset: need at least one recording");
  std::vector<Recording> out;
  out.reserve(cfg.recordings);
  for (std::size_t k = 0; k < cfg.recordings; ++k) out.push_back(gen_recording(cfg, k));
  return out;
}

std::vector<std::filesystem::path> write_dataset(const std::vector<Recording>& recordings,
                                                 const std::filesystem::path& dir, int precision) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (const auto& rec : recordings) {
    auto path = dir / (rec.id + ".csv");
    write_recording(rec, path, precision);
    paths.push_back(std::move(path));
  }
  return paths;
}

}  // namespace sleepstage
