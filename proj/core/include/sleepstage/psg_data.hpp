#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sleepstage/stage.hpp"

namespace sleepstage {

enum class Channel : std::uint8_t { Eeg = 0, EogL = 1, EogR = 2, Emg = 3 };
inline constexpr std::size_t kNumChannels = 4;

/// One night of polysomnography: four equally long channels plus one stage
/// label per epoch.
struct Recording {
  std::string id;
  double sample_rate_hz = 100.0;
  double epoch_len_s = 30.0;
  std::array<std::vector<double>, kNumChannels> channels;
  std::vector<SleepStage> labels;

  std::size_t samples_per_epoch() const;
  std::size_t num_epochs() const { return labels.size(); }
  const std::vector<double>& channel(Channel c) const { return channels[static_cast<std::size_t>(c)]; }
  std::vector<double>& channel(Channel c) { return channels[static_cast<std::size_t>(c)]; }

  /// Throws std::invalid_argument if the channel/label invariants do not hold.
  void validate() const;
};

/// A non-owning view of one 30 s scoring window. The referenced Recording
/// must outlive the Epoch.
struct Epoch {
  const Recording* recording = nullptr;
  std::size_t index = 0;
  std::array<std::span<const double>, kNumChannels> channels;
  SleepStage label = SleepStage::Wake;

  const std::string& recording_id() const { return recording->id; }
  std::span<const double> channel(Channel c) const { return channels[static_cast<std::size_t>(c)]; }
};

struct DatasetSplit {
  std::vector<Epoch> train;
  std::vector<Epoch> validation;
  std::vector<Epoch> test;
};

struct Fold {
  std::size_t test;
  std::vector<std::size_t> train;
};

/// Loader diagnostics. `line()` is 1-based within `file()`; 0 when the
/// problem is not tied to a line.
class PsgError : public std::runtime_error {
 public:
  enum class Kind {
    Io,
    MalformedRow,
    UnknownLabel,
    ChannelLengthMismatch,
    NonIntegralEpochCount,
    LabelCountMismatch,
  };

  PsgError(Kind kind, std::string file, std::size_t line, const std::string& what);

  Kind kind() const { return kind_; }
  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  Kind kind_;
  std::string file_;
  std::size_t line_;
};

/// `<dir>/night.csv` -> `<dir>/night.labels.csv`.
std::filesystem::path labels_path_for(const std::filesystem::path& signal_csv);

/// Reads a signal CSV (`t,eeg,eog_l,eog_r,emg`) and its companion labels
/// file (`epoch,stage`). A channel that ends early leaves its trailing fields
/// empty; that is reported as a channel-length mismatch.
Recording load_recording(const std::filesystem::path& path, double sample_rate_hz = 100.0,
                         double epoch_len_s = 30.0);

/// Writes both CSV files. `precision` is the number of significant digits.
void write_recording(const Recording& rec, const std::filesystem::path& signal_csv, int precision = 9);

/// All signal CSVs in a directory (excluding *.labels.csv / *.features.csv),
/// sorted by filename.
std::vector<std::filesystem::path> list_recordings(const std::filesystem::path& dir);

std::vector<Epoch> segment_epochs(const Recording& recording);

/// Drops `margin` epochs on each side of every label change. The input must
/// be temporally contiguous epochs of one recording.
std::vector<Epoch> remove_transition_epochs(const std::vector<Epoch>& epochs, std::size_t margin = 1);

/// Same rule on a bare label sequence; returns the kept positions.
std::vector<std::size_t> kept_after_transition_removal(std::span<const SleepStage> labels,
                                                       std::size_t margin = 1);

/// Per-class seeded shuffle, then n/6 (floor) to validation and the rest to
/// train. Every class needs at least 6 epochs.
DatasetSplit balanced_split(const std::vector<Epoch>& epochs, std::uint64_t seed);

/// Index-level form of balanced_split used by the experiment driver: returns
/// true for positions assigned to validation.
std::vector<bool> balanced_validation_mask(std::span<const SleepStage> labels, std::uint64_t seed);

std::vector<Fold> loocv_folds(std::size_t num_recordings);

template <class T>
std::vector<Fold> loocv_folds(const std::vector<T>& recordings) {
  return loocv_folds(recordings.size());
}

}  // namespace sleepstage
