#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "sleepstage/psg_data.hpp"
#include "sleepstage/stage.hpp"

namespace sleepstage {

/// Signal signature of one stage. Amplitudes are RMS-like values in uV.
struct StageProfile {
  std::array<double, 5> eeg_band_amplitude{};  // delta, theta, alpha, beta, gamma
  double emg_scale = 0.0;
  double eog_burst_rate = 0.0;  // bursts per minute
  double eog_burst_amplitude = 0.0;
  double noise_floor = 0.0;
  bool eog_correlated = false;  // shared eye movements across both EOG leads
};

using StageProfiles = std::array<StageProfile, kNumStages>;

/// Stage signatures: delta-dominant SWS, alpha-rich wake with high muscle
/// tone, theta-range S1/REM, REM with atonia and conjugate eye movements.
StageProfiles default_profiles();

struct HypnogramChain {
  std::array<std::array<double, kNumStages>, kNumStages> transition{};
  SleepStage initial = SleepStage::Wake;

  static HypnogramChain default_chain();
  /// Rows sum to 1 and are nonnegative.
  void validate() const;
};

std::vector<SleepStage> gen_hypnogram(const HypnogramChain& chain, std::size_t n_epochs, std::uint64_t seed);

/// Four channels in Channel order, each epoch_len_s * fs samples.
using EpochSignal = std::array<std::vector<double>, kNumChannels>;

struct SignalVariability {
  double amplitude_jitter = 0.25;  // lognormal sigma on per-epoch amplitudes
  double eog_eeg_leak = 0.15;      // fraction of EEG picked up by each EOG lead
};

EpochSignal gen_epoch_signal(SleepStage stage, const StageProfile& profile, double fs, std::uint64_t seed,
                             double epoch_len_s = 30.0, const SignalVariability& variability = {});

struct SynthConfig {
  std::size_t recordings = 5;
  std::size_t epochs_per_recording = 800;
  double fs = 100.0;
  double epoch_len_s = 30.0;
  std::uint64_t seed = 42;
  HypnogramChain chain = HypnogramChain::default_chain();
  StageProfiles profiles = default_profiles();
  SignalVariability variability{};
  double recording_gain_spread = 0.15;  // lognormal sigma of per-recording channel gains
};

/// Recording k is a pure function of (seed, k).
std::vector<Recording> gen_dataset(const SynthConfig& cfg);
Recording gen_recording(const SynthConfig& cfg, std::size_t index);

/// Writes `night01.csv`, `night01.labels.csv`, ... into `dir`.
std::vector<std::filesystem::path> write_dataset(const std::vector<Recording>& recordings,
                                                 const std::filesystem::path& dir, int precision = 9);

}  // namespace sleepstage
