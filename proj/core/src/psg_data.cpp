#include "sleepstage/psg_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sleepstage/random.hpp"

namespace sleepstage {

namespace fs = std::filesystem;

PsgError::PsgError(Kind kind, std::string file, std::size_t line, const std::string& what)
    : std::runtime_error(file + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
      kind_(kind),
      file_(std::move(file)),
      line_(line) {}

std::size_t Recording::samples_per_epoch() const {
  return static_cast<std::size_t>(std::llround(epoch_len_s * sample_rate_hz));
}

void Recording::validate() const {
  if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("recording " + id + ": sample rate must be positive");
  if (labels.empty()) throw std::invalid_argument("recording " + id + ": no epochs");
  const std::size_t expected = labels.size() * samples_per_epoch();
  for (const auto& ch : channels) {
    if (ch.size() != expected)
      throw std::invalid_argument("recording " + id + ": channel length " + std::to_string(ch.size()) +
                                  " != " + std::to_string(expected));
  }
}

fs::path labels_path_for(const fs::path& signal_csv) {
  fs::path p = signal_csv;
  p.replace_extension();
  p += ".labels.csv";
  return p;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PsgError(PsgError::Kind::Io, path.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

// Iterates non-empty lines with 1-based numbering.
template <class F>
void for_each_line(const std::string& text, F&& fn) {
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string_view line = trim(std::string_view(text).substr(pos, end - pos));
    if (!line.empty()) fn(line, line_no);
    pos = end + 1;
  }
}

constexpr std::array<std::string_view, 5> kSignalHeader = {"t", "eeg", "eog_l", "eog_r", "emg"};

}  // namespace

Recording load_recording(const fs::path& path, double sample_rate_hz, double epoch_len_s) {
  if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("sample rate must be positive");
  if (!(epoch_len_s > 0.0)) throw std::invalid_argument("epoch length must be positive");
  const std::string file = path.string();
  if (!fs::exists(path)) throw PsgError(PsgError::Kind::Io, file, 0, "file does not exist");

  Recording rec;
  rec.id = path.stem().string();
  rec.sample_rate_hz = sample_rate_hz;
  rec.epoch_len_s = epoch_len_s;

  const std::string text = read_file(path);
  bool header_seen = false;
  // Line on which each channel first had an empty field (0 = still running).
  std::array<std::size_t, kNumChannels> ended_at{};
  std::size_t last_line = 0;

  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    last_line = line_no;
    auto fields = split_fields(line);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() != kSignalHeader.size() || !std::equal(fields.begin(), fields.end(), kSignalHeader.begin()))
        throw PsgError(PsgError::Kind::MalformedRow, file, line_no, "expected header 't,eeg,eog_l,eog_r,emg'");
      return;
    }
    if (fields.size() > kSignalHeader.size())
      throw PsgError(PsgError::Kind::MalformedRow, file, line_no, "too many fields");
    fields.resize(kSignalHeader.size());
    double value = 0.0;
    if (!parse_double(fields[0], value))
      throw PsgError(PsgError::Kind::MalformedRow, file, line_no, "unparsable time value");
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      const std::string_view field = fields[c + 1];
      if (field.empty()) {
        if (!ended_at[c]) ended_at[c] = line_no;
        continue;
      }
      if (ended_at[c])
        throw PsgError(PsgError::Kind::MalformedRow, file, line_no,
                       "channel " + std::string(kSignalHeader[c + 1]) + " resumes after a gap");
      if (!parse_double(field, value))
        throw PsgError(PsgError::Kind::MalformedRow, file, line_no,
                       "unparsable value in column " + std::string(kSignalHeader[c + 1]));
      rec.channels[c].push_back(value);
    }
  });
  if (!header_seen) throw PsgError(PsgError::Kind::MalformedRow, file, 1, "empty file");

  const std::size_t n = rec.channels[0].size();
  for (std::size_t c = 1; c < kNumChannels; ++c) {
    if (rec.channels[c].size() != rec.channels[0].size()) {
      const std::size_t shorter = rec.channels[c].size() < n ? c : 0;
      throw PsgError(PsgError::Kind::ChannelLengthMismatch, file, ended_at[shorter] ? ended_at[shorter] : last_line,
                     "channel " + std::string(kSignalHeader[c + 1]) + " has " + std::to_string(rec.channels[c].size()) +
                         " samples, eeg has " + std::to_string(n));
    }
  }

  const std::size_t per_epoch = rec.samples_per_epoch();
  if (per_epoch == 0 || std::abs(epoch_len_s * sample_rate_hz - static_cast<double>(per_epoch)) > 1e-9)
    throw std::invalid_argument("epoch length x sample rate must be a whole number of samples");
  if (n == 0 || n % per_epoch != 0)
    throw PsgError(PsgError::Kind::NonIntegralEpochCount, file, last_line,
                   std::to_string(n) + " samples is not a whole number of " + std::to_string(per_epoch) +
                       "-sample epochs");
  const std::size_t n_epochs = n / per_epoch;

  const fs::path lpath = labels_path_for(path);
  const std::string lfile = lpath.string();
  if (!fs::exists(lpath)) throw PsgError(PsgError::Kind::Io, lfile, 0, "labels file does not exist");
  const std::string ltext = read_file(lpath);
  bool lheader = false;
  std::size_t llast = 0;
  for_each_line(ltext, [&](std::string_view line, std::size_t line_no) {
    llast = line_no;
    auto fields = split_fields(line);
    if (!lheader) {
      lheader = true;
      if (fields.size() != 2 || fields[0] != "epoch" || fields[1] != "stage")
        throw PsgError(PsgError::Kind::MalformedRow, lfile, line_no, "expected header 'epoch,stage'");
      return;
    }
    if (fields.size() != 2) throw PsgError(PsgError::Kind::MalformedRow, lfile, line_no, "expected 2 fields");
    std::size_t idx = 0;
    auto [ptr, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), idx);
    if (ec != std::errc() || ptr != fields[0].data() + fields[0].size() || idx != rec.labels.size())
      throw PsgError(PsgError::Kind::MalformedRow, lfile, line_no,
                     "epoch index must be " + std::to_string(rec.labels.size()));
    auto stage = parse_stage(fields[1]);
    if (!stage)
      throw PsgError(PsgError::Kind::UnknownLabel, lfile, line_no, "unknown stage label '" + std::string(fields[1]) + "'");
    rec.labels.push_back(*stage);
  });
  if (rec.labels.size() != n_epochs)
    throw PsgError(PsgError::Kind::LabelCountMismatch, lfile, llast,
                   std::to_string(rec.labels.size()) + " labels for " + std::to_string(n_epochs) + " epochs");
  return rec;
}

void write_recording(const Recording& rec, const fs::path& signal_csv, int precision) {
  rec.validate();
  if (signal_csv.has_parent_path()) fs::create_directories(signal_csv.parent_path());
  {
    std::FILE* f = std::fopen(signal_csv.string().c_str(), "wb");
    if (!f) throw PsgError(PsgError::Kind::Io, signal_csv.string(), 0, "cannot write file");
    std::fputs("t,eeg,eog_l,eog_r,emg\n", f);
    const std::size_t n = rec.channels[0].size();
    for (std::size_t i = 0; i < n; ++i) {
      std::fprintf(f, "%.*g,%.*g,%.*g,%.*g,%.*g\n", precision, static_cast<double>(i) / rec.sample_rate_hz,
                   precision, rec.channels[0][i], precision, rec.channels[1][i], precision, rec.channels[2][i],
                   precision, rec.channels[3][i]);
    }
    if (std::fclose(f) != 0) throw PsgError(PsgError::Kind::Io, signal_csv.string(), 0, "write failed");
  }
  const fs::path lpath = labels_path_for(signal_csv);
  std::ofstream out(lpath);
  if (!out) throw PsgError(PsgError::Kind::Io, lpath.string(), 0, "cannot write file");
  out << "epoch,stage\n";
  for (std::size_t i = 0; i < rec.labels.size(); ++i) out << i << ',' << stage_token(rec.labels[i]) << '\n';
  if (!out) throw PsgError(PsgError::Kind::Io, lpath.string(), 0, "write failed");
}

std::vector<fs::path> list_recordings(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw PsgError(PsgError::Kind::Io, dir.string(), 0, "not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    auto ends_with = [&](std::string_view suffix) {
      return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (!ends_with(".csv") || ends_with(".labels.csv") || ends_with(".features.csv")) continue;
    out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Epoch> segment_epochs(const Recording& recording) {
  const std::size_t len = recording.samples_per_epoch();
  std::vector<Epoch> out;
  out.reserve(recording.num_epochs());
  for (std::size_t i = 0; i < recording.num_epochs(); ++i) {
    Epoch e;
    e.recording = &recording;
    e.index = i;
    e.label = recording.labels[i];
    for (std::size_t c = 0; c < kNumChannels; ++c)
      e.channels[c] = std::span<const double>(recording.channels[c]).subspan(i * len, len);
    out.push_back(e);
  }
  return out;
}

std::vector<std::size_t> kept_after_transition_removal(std::span<const SleepStage> labels, std::size_t margin) {
  const std::size_t n = labels.size();
  std::vector<bool> drop(n, false);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (labels[i] == labels[i + 1]) continue;
    for (std::size_t k = 0; k < margin; ++k) {
      if (i >= k) drop[i - k] = true;
      if (i + 1 + k < n) drop[i + 1 + k] = true;
    }
  }
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i)
    if (!drop[i]) kept.push_back(i);
  return kept;
}

std::vector<Epoch> remove_transition_epochs(const std::vector<Epoch>& epochs, std::size_t margin) {
  std::vector<SleepStage> labels;
  labels.reserve(epochs.size());
  for (const auto& e : epochs) labels.push_back(e.label);
  std::vector<Epoch> out;
  for (std::size_t i : kept_after_transition_removal(labels, margin)) out.push_back(epochs[i]);
  return out;
}

std::vector<bool> balanced_validation_mask(std::span<const SleepStage> labels, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kNumStages> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[stage_index(labels[i])].push_back(i);
  std::vector<bool> validation(labels.size(), false);
  Rng rng(seed);
  for (std::size_t c = 0; c < kNumStages; ++c) {
    auto& idx = by_class[c];
    if (idx.size() < 6)
      throw std::invalid_argument("insufficient class support: stage " +
                                  std::string(stage_name(stage_from_index(static_cast<int>(c)))) + " has " +
                                  std::to_string(idx.size()) + " epochs, need at least 6");
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t n_val = idx.size() / 6;
    for (std::size_t k = 0; k < n_val; ++k) validation[idx[k]] = true;
  }
  return validation;
}

DatasetSplit balanced_split(const std::vector<Epoch>& epochs, std::uint64_t seed) {
  std::vector<SleepStage> labels;
  labels.reserve(epochs.size());
  for (const auto& e : epochs) labels.push_back(e.label);
  const auto mask = balanced_validation_mask(labels, seed);
  DatasetSplit split;
  for (std::size_t i = 0; i < epochs.size(); ++i) (mask[i] ? split.validation : split.train).push_back(epochs[i]);
  return split;
}

std::vector<Fold> loocv_folds(std::size_t num_recordings) {
  if (num_recordings < 2) throw std::invalid_argument("leave-one-out needs at least 2 recordings");
  std::vector<Fold> folds;
  for (std::size_t k = 0; k < num_recordings; ++k) {
    Fold f{k, {}};
    for (std::size_t j = 0; j < num_recordings; ++j)
      if (j != k) f.train.push_back(j);
    folds.push_back(std::move(f));
  }
  return folds;
}

}  // namespace sleepstage
