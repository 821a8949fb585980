#include "sleepstage/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <type_traits>

namespace sleepstage {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& v, auto&& fmt) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += fmt(v[i]);
  }
  return s;
}

struct Key {
  std::function<void(RunConfig&, std::string_view)> set;  // throws std::invalid_argument with a reason
  std::function<std::string(const RunConfig&)> get;
};

[[noreturn]] void bad(const char* expected) { throw std::invalid_argument(std::string("expected ") + expected); }

template <class T>
Key number_key(std::function<T&(RunConfig&)> ref, T min_value) {
  return {[ref, min_value](RunConfig& c, std::string_view v) {
            T x{};
            if (!parse_number(v, x)) bad(std::is_integral_v<T> ? "an integer" : "a number");
            if (x < min_value) throw std::invalid_argument("must be >= " + fmt_double(static_cast<double>(min_value)));
            ref(c) = x;
          },
          [ref](const RunConfig& c) {
            const T x = ref(const_cast<RunConfig&>(c));
            if constexpr (std::is_integral_v<T>) return std::to_string(x);
            else return fmt_double(x);
          }};
}

Key bool_key(std::function<bool&(RunConfig&)> ref) {
  return {[ref](RunConfig& c, std::string_view v) {
            v = trim(v);
            if (v == "true" || v == "1" || v == "yes" || v == "on") ref(c) = true;
            else if (v == "false" || v == "0" || v == "no" || v == "off") ref(c) = false;
            else bad("true or false");
          },
          [ref](const RunConfig& c) { return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

Key units_key(std::function<std::vector<Eigen::Index>&(RunConfig&)> ref, std::size_t replicate) {
  return {[ref, replicate](RunConfig& c, std::string_view v) {
            std::vector<Eigen::Index> units;
            for (int u : parse_int_list(v)) {
              if (u < 1) bad("positive layer sizes");
              units.push_back(u);
            }
            if (units.size() == 1 && replicate > 1) units.assign(replicate, units.front());
            ref(c) = units;
          },
          [ref](const RunConfig& c) {
            return join(ref(const_cast<RunConfig&>(c)), [](Eigen::Index u) { return std::to_string(u); });
          }};
}

const std::map<std::string, Key, std::less<>>& table() {
  static const auto* keys = [] {
    auto* m = new std::map<std::string, Key, std::less<>>;
    auto& t = *m;
    t["data.dir"] = {[](RunConfig& c, std::string_view v) {
                       if (trim(v).empty()) bad("a path");
                       c.data_dir = std::string(trim(v));
                     },
                     [](const RunConfig& c) { return c.data_dir.string(); }};
    t["data.fs"] = number_key<double>([](RunConfig& c) -> double& { return c.sample_rate_hz; }, 1e-9);
    t["data.epoch_len"] = number_key<double>([](RunConfig& c) -> double& { return c.epoch_len_s; }, 1e-9);
    t["out"] = {[](RunConfig& c, std::string_view v) {
                  if (trim(v).empty()) bad("a path");
                  c.out_dir = std::string(trim(v));
                },
                [](const RunConfig& c) { return c.out_dir.string(); }};
    t["seed"] = number_key<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.experiment.seed; }, 0);
    t["log.level"] = {[](RunConfig& c, std::string_view v) {
                        v = trim(v);
                        if (v != "debug" && v != "info" && v != "warn" && v != "error" && v != "off")
                          bad("debug, info, warn, error or off");
                        c.log_level = std::string(v);
                      },
                      [](const RunConfig& c) { return c.log_level; }};
    t["synth.recordings"] = number_key<std::size_t>([](RunConfig& c) -> std::size_t& { return c.synth_recordings; }, 1);
    t["synth.epochs"] = number_key<std::size_t>([](RunConfig& c) -> std::size_t& { return c.synth_epochs; }, 1);

    using D = DbnTrainConfig;
    auto dbn = []<class T>(T D::*field) {
      return [field](RunConfig& c) -> T& { return c.experiment.dbn.*field; };
    };
    t["dbn.hidden"] = units_key([](RunConfig& c) -> std::vector<Eigen::Index>& { return c.experiment.dbn.hidden; }, 2);
    t["dbn.rbm_batch"] = number_key<int>(dbn(&D::rbm_batch), 1);
    t["dbn.cd_steps"] = number_key<int>(dbn(&D::cd_steps), 1);
    t["dbn.pretrain_epochs"] = number_key<int>(dbn(&D::pretrain_epochs), 0);
    t["dbn.finetune_epochs"] = number_key<int>(dbn(&D::finetune_epochs), 0);
    t["dbn.finetune_batch"] = number_key<int>(dbn(&D::finetune_batch), 1);
    t["dbn.learning_rate"] = number_key<double>(dbn(&D::learning_rate), 0.0);
    t["dbn.finetune_learning_rate"] = number_key<double>(dbn(&D::finetune_learning_rate), 0.0);
    t["dbn.momentum_initial"] = number_key<double>(dbn(&D::momentum_initial), 0.0);
    t["dbn.momentum_final"] = number_key<double>(dbn(&D::momentum_final), 0.0);
    t["dbn.momentum_switch_epoch"] = number_key<int>(dbn(&D::momentum_switch_epoch), 0);
    t["dbn.weight_decay"] = number_key<double>(dbn(&D::weight_decay), 0.0);
    t["dbn.patience"] = number_key<int>(dbn(&D::patience), 1);

    t["lstm.hidden"] = units_key([](RunConfig& c) -> std::vector<Eigen::Index>& { return c.experiment.lstm.units; }, 1);
    t["lstm.seq_len"] = {[](RunConfig& c, std::string_view v) {
                           auto lens = parse_int_list(v);
                           for (int s : lens)
                             if (s < 1) bad("positive sequence lengths");
                           c.experiment.seq_lens = lens;
                         },
                         [](const RunConfig& c) {
                           return join(c.experiment.seq_lens, [](int s) { return std::to_string(s); });
                         }};
    t["lstm.epochs"] = number_key<int>([](RunConfig& c) -> int& { return c.experiment.lstm.epochs; }, 0);
    t["lstm.batch"] = number_key<int>([](RunConfig& c) -> int& { return c.experiment.lstm.batch; }, 1);
    t["lstm.learning_rate"] =
        number_key<double>([](RunConfig& c) -> double& { return c.experiment.lstm.optimizer.learning_rate; }, 0.0);
    t["lstm.rho"] = number_key<double>([](RunConfig& c) -> double& { return c.experiment.lstm.optimizer.rho; }, 0.0);
    t["lstm.epsilon"] =
        number_key<double>([](RunConfig& c) -> double& { return c.experiment.lstm.optimizer.epsilon; }, 0.0);
    t["lstm.input"] = {[](RunConfig& c, std::string_view v) {
                         v = trim(v);
                         if (v == "posterior") c.experiment.lstm_input = LstmInput::Posterior;
                         else if (v == "logits") c.experiment.lstm_input = LstmInput::Logits;
                         else bad("posterior or logits");
                       },
                       [](const RunConfig& c) {
                         return std::string(c.experiment.lstm_input == LstmInput::Logits ? "logits" : "posterior");
                       }};

    t["hmm.alpha"] = number_key<double>([](RunConfig& c) -> double& { return c.experiment.hmm_alpha; }, 0.0);
    t["hmm.emission"] = {[](RunConfig& c, std::string_view v) {
                           v = trim(v);
                           if (v == "scaled") c.experiment.hmm_emission = EmissionMode::ScaledLikelihood;
                           else if (v == "posterior") c.experiment.hmm_emission = EmissionMode::RawPosterior;
                           else bad("scaled or posterior");
                         },
                         [](const RunConfig& c) {
                           return std::string(c.experiment.hmm_emission == EmissionMode::RawPosterior ? "posterior"
                                                                                                       : "scaled");
                         }};

    t["experiment.models"] = {[](RunConfig& c, std::string_view v) { c.experiment.models = parse_model_list(v); },
                              [](const RunConfig& c) {
                                return join(c.experiment.models, [](ModelKind k) {
                                  std::string s(model_name(k));
                                  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
                                  return s;
                                });
                              }};
    t["experiment.reps"] = number_key<int>([](RunConfig& c) -> int& { return c.experiment.repetitions; }, 1);
    t["experiment.transition_removal"] = bool_key([](RunConfig& c) -> bool& { return c.experiment.transition_removal; });
    t["experiment.transition_margin"] =
        number_key<std::size_t>([](RunConfig& c) -> std::size_t& { return c.experiment.transition_margin; }, 1);
    t["experiment.f1"] = {[](RunConfig& c, std::string_view v) {
                            v = trim(v);
                            if (v == "macro") c.experiment.f1 = F1Mode::Macro;
                            else if (v == "weighted") c.experiment.f1 = F1Mode::Weighted;
                            else bad("macro or weighted");
                          },
                          [](const RunConfig& c) {
                            return std::string(c.experiment.f1 == F1Mode::Weighted ? "weighted" : "macro");
                          }};
    t["experiment.jobs"] = number_key<int>([](RunConfig& c) -> int& { return c.experiment.jobs; }, 1);
    return m;
  }();
  return *keys;
}

}  // namespace

std::vector<int> parse_int_list(std::string_view text) {
  std::vector<int> out;
  for (auto part : split(text, ',')) {
    int v = 0;
    if (!parse_number(part, v)) bad("a comma-separated list of integers");
    out.push_back(v);
  }
  return out;
}

std::vector<ModelKind> parse_model_list(std::string_view text) {
  std::vector<ModelKind> out;
  for (auto part : split(text, ',')) {
    const ModelKind k = parse_model(part);
    if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  }
  return out;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "data.dir", "data.fs", "data.epoch_len", "out", "seed", "log.level", "synth.recordings", "synth.epochs",
      "dbn.hidden", "dbn.rbm_batch", "dbn.cd_steps", "dbn.pretrain_epochs", "dbn.finetune_epochs",
      "dbn.finetune_batch", "dbn.learning_rate", "dbn.finetune_learning_rate", "dbn.momentum_initial",
      "dbn.momentum_final", "dbn.momentum_switch_epoch", "dbn.weight_decay", "dbn.patience", "lstm.hidden",
      "lstm.seq_len", "lstm.epochs", "lstm.batch", "lstm.learning_rate", "lstm.rho", "lstm.epsilon", "lstm.input",
      "hmm.alpha", "hmm.emission", "experiment.models", "experiment.reps", "experiment.transition_removal",
      "experiment.transition_margin", "experiment.f1", "experiment.jobs"};
  return keys;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value, std::size_t line) {
  const std::string where = line ? " (line " + std::to_string(line) + ")" : "";
  const auto it = table().find(key);
  if (it == table().end()) throw ConfigError(std::string(key), line, "unknown config key '" + std::string(key) + "'" + where);
  try {
    it->second.set(cfg, value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(key), line,
                      "bad value '" + std::string(trim(value)) + "' for key '" + std::string(key) + "'" + where + ": " +
                          e.what());
  }
}

void apply_config_text(RunConfig& cfg, std::string_view text) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    auto line = text.substr(start, end - start);
    start = end + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(std::string(line), line_no, "line " + std::to_string(line_no) + ": expected 'key = value'");
    apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no);
  }
}

RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                       const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  if (file) {
    std::ifstream in(*file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config " + file->string());
    std::ostringstream ss;
    ss << in.rdbuf();
    apply_config_text(cfg, ss.str());
  }
  for (const auto& [k, v] : overrides) apply_setting(cfg, k, v, 0);
  return cfg;
}

std::string format_config(const RunConfig& cfg) {
  std::string s;
  for (const auto& key : config_keys()) s += key + " = " + table().at(key).get(cfg) + "\n";
  return s;
}

}  // namespace sleepstage
