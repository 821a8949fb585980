#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sleepstage/experiment.hpp"

namespace sleepstage {

/// Everything a CLI run needs. Each field has a default; see format_config
/// for the full key list.
struct RunConfig {
  std::filesystem::path data_dir = "data";
  double sample_rate_hz = 100.0;
  double epoch_len_s = 30.0;
  std::filesystem::path out_dir = "out";
  std::size_t synth_recordings = 5;
  std::size_t synth_epochs = 800;
  std::string log_level = "info";
  ExperimentConfig experiment{};
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, std::size_t line, const std::string& what)
      : std::runtime_error(what), key_(std::move(key)), line_(line) {}
  const std::string& key() const { return key_; }
  std::size_t line() const { return line_; }  // 0 for command-line overrides

 private:
  std::string key_;
  std::size_t line_;
};

/// All recognized keys in echo order.
const std::vector<std::string>& config_keys();

/// Sets one key. `line` is only used in diagnostics.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value, std::size_t line = 0);

/// `key = value` lines; `#` starts a comment; blank lines ignored.
void apply_config_text(RunConfig& cfg, std::string_view text);

/// Defaults, then the file (if any), then overrides in order.
RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                       const std::vector<std::pair<std::string, std::string>>& overrides);

/// Every key with its resolved value; parses back to the same config.
std::string format_config(const RunConfig& cfg);

/// Comma-separated helpers shared with the CLI.
std::vector<int> parse_int_list(std::string_view text);
std::vector<ModelKind> parse_model_list(std::string_view text);

}  // namespace sleepstage
