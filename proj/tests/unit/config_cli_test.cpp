#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sleepstage/cli.hpp"
#include "sleepstage/config.hpp"

using namespace sleepstage;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(Config, Defaults) {
  const RunConfig c = parse_config(std::nullopt, {});
  EXPECT_EQ(c.sample_rate_hz, 100.0);
  EXPECT_EQ(c.epoch_len_s, 30.0);
  EXPECT_EQ(c.experiment.seed, 42u);
  EXPECT_EQ(c.experiment.dbn.hidden, (std::vector<Eigen::Index>{200, 200}));
  EXPECT_EQ(c.experiment.lstm.units, (std::vector<Eigen::Index>{128, 64, 32}));
  EXPECT_EQ(c.experiment.seq_lens, std::vector<int>{5});
  EXPECT_EQ(c.experiment.models.size(), 4u);
  EXPECT_TRUE(c.experiment.transition_removal);
}

TEST(Config, OverrideBeatsFile) {
  const fs::path p = fs::temp_directory_path() / "precedence.cfg";
  {
    std::ofstream out(p);
    out << "# comment\nlstm.epochs = 10\n\nseed = 7\n";
  }
  const RunConfig from_file = parse_config(p, {});
  EXPECT_EQ(from_file.experiment.lstm.epochs, 10);
  EXPECT_EQ(from_file.experiment.seed, 7u);
  const RunConfig c = parse_config(p, {{"lstm.epochs", "15"}});
  EXPECT_EQ(c.experiment.lstm.epochs, 15);
  EXPECT_EQ(c.experiment.seed, 7u);
  fs::remove(p);
}

TEST(Config, BadValueNamesKeyAndLine) {
  RunConfig c;
  try {
    apply_config_text(c, "seed = 1\nlstm.epochs = banana\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "lstm.epochs");
    EXPECT_EQ(e.line(), 2u);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("lstm.epochs"), std::string::npos);
    EXPECT_NE(msg.find("banana"), std::string::npos);
  }
}

TEST(Config, UnknownKeyRejected) {
  RunConfig c;
  try {
    apply_setting(c, "lstm.epoch", "3", 4);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown config key 'lstm.epoch'"), std::string::npos);
  }
}

TEST(Config, FormatRoundTrip) {
  RunConfig c;
  apply_setting(c, "dbn.hidden", "64");
  apply_setting(c, "lstm.seq_len", "5,10,15");
  apply_setting(c, "experiment.models", "dbn,dbn+lstm");
  apply_setting(c, "hmm.emission", "posterior");
  apply_setting(c, "lstm.learning_rate", "0.0025");
  const std::string text = format_config(c);
  RunConfig back;
  apply_config_text(back, text);
  EXPECT_EQ(format_config(back), text);
  EXPECT_EQ(back.experiment.dbn.hidden, (std::vector<Eigen::Index>{64, 64}));
  EXPECT_EQ(back.experiment.seq_lens, (std::vector<int>{5, 10, 15}));
  EXPECT_EQ(back.experiment.lstm.optimizer.learning_rate, 0.0025);
}

TEST(Config, EveryKeyIsEchoed) {
  const std::string text = format_config(RunConfig{});
  for (const auto& k : config_keys()) EXPECT_NE(text.find(k + " = "), std::string::npos) << k;
}

TEST(Config, ListHelpers) {
  EXPECT_EQ(parse_int_list("5, 10,15"), (std::vector<int>{5, 10, 15}));
  EXPECT_EQ(parse_model_list("DBN+HMM,lstm"), (std::vector<ModelKind>{ModelKind::DbnHmm, ModelKind::Lstm}));
  EXPECT_THROW(parse_model_list("svm"), std::invalid_argument);
}

TEST(Cli, UnknownSubcommandPrintsUsage) {
  const auto r = cli({"frobnicate"});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("frobnicate"), std::string::npos);
  EXPECT_NE((r.err + r.out).find("loocv"), std::string::npos);
}

TEST(Cli, MissingDataDirectoryNamed) {
  const auto r = cli({"extract", "--data", "/nonexistent/psg", "--out", "/tmp/never"});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("/nonexistent/psg"), std::string::npos);
}

TEST(Cli, Version) {
  const auto r = cli({"--version"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("sleepstage 1.0.0"), std::string::npos);
}

TEST(Cli, BadConfigValueIsUsageError) {
  const auto r = cli({"loocv", "--data", "/nonexistent", "--lstm.epochs", "banana"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("lstm.epochs"), std::string::npos);
}
