#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "sleepstage/psg_data.hpp"
#include "sleepstage/random.hpp"

using namespace sleepstage;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("psg_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

Recording make_recording(std::vector<SleepStage> labels, double fs = 100.0) {
  Recording r;
  r.id = "toy";
  r.sample_rate_hz = fs;
  r.labels = std::move(labels);
  const std::size_t n = r.samples_per_epoch() * r.labels.size();
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    r.channels[c].resize(n);
    for (std::size_t i = 0; i < n; ++i) r.channels[c][i] = 0.25 * static_cast<double>(c) + 1e-3 * static_cast<double>(i % 97);
  }
  return r;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l << "\n";
}

std::vector<SleepStage> stages(std::initializer_list<int> idx) {
  std::vector<SleepStage> s;
  for (int i : idx) s.push_back(stage_from_index(i));
  return s;
}

}  // namespace

TEST(Stage, TokensRoundTrip) {
  for (SleepStage s : kAllStages) {
    EXPECT_EQ(parse_stage(stage_token(s)), s);
    EXPECT_EQ(parse_stage(stage_name(s)), s);
  }
  EXPECT_EQ(parse_stage("S3"), SleepStage::Sws);
  EXPECT_FALSE(parse_stage("N4").has_value());
  EXPECT_THROW(stage_from_index(5), std::out_of_range);
}

TEST(LoadRecording, TwoEpochFile) {
  TempDir dir;
  const Recording rec = make_recording(stages({0, 1}));
  write_recording(rec, dir.path() / "night.csv");
  const Recording back = load_recording(dir.path() / "night.csv", 100.0, 30.0);
  EXPECT_EQ(back.id, "night");
  EXPECT_EQ(back.num_epochs(), 2u);
  for (const auto& ch : back.channels) EXPECT_EQ(ch.size(), 6000u);
  EXPECT_EQ(back.labels, rec.labels);
  EXPECT_NEAR(back.channel(Channel::EogR)[123], rec.channel(Channel::EogR)[123], 1e-9);
}

TEST(LoadRecording, ShortEmgColumnIsChannelMismatch) {
  TempDir dir;
  const auto path = dir.path() / "short.csv";
  std::vector<std::string> lines = {"t,eeg,eog_l,eog_r,emg"};
  for (int i = 0; i < 3000; ++i) {
    const std::string t = std::to_string(i * 0.01);
    lines.push_back(i == 2999 ? t + ",1,2,3," : t + ",1,2,3,4");
  }
  write_lines(path, lines);
  write_lines(labels_path_for(path), {"epoch,stage", "0,W"});
  try {
    load_recording(path);
    FAIL() << "expected an error";
  } catch (const PsgError& e) {
    EXPECT_EQ(e.kind(), PsgError::Kind::ChannelLengthMismatch);
    EXPECT_EQ(e.line(), 3001u);
  }
}

TEST(LoadRecording, UnknownLabelNamesRow) {
  TempDir dir;
  const auto path = dir.path() / "bad.csv";
  write_recording(make_recording(stages({0, 2})), path);
  write_lines(labels_path_for(path), {"epoch,stage", "0,W", "1,N4"});
  try {
    load_recording(path);
    FAIL() << "expected an error";
  } catch (const PsgError& e) {
    EXPECT_EQ(e.kind(), PsgError::Kind::UnknownLabel);
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("N4"), std::string::npos);
  }
}

TEST(LoadRecording, PartialEpochRejected) {
  TempDir dir;
  const auto path = dir.path() / "partial.csv";
  std::vector<std::string> lines = {"t,eeg,eog_l,eog_r,emg"};
  for (int i = 0; i < 4500; ++i) lines.push_back("0,1,2,3,4");
  write_lines(path, lines);
  write_lines(labels_path_for(path), {"epoch,stage", "0,W"});
  try {
    load_recording(path);
    FAIL();
  } catch (const PsgError& e) {
    EXPECT_EQ(e.kind(), PsgError::Kind::NonIntegralEpochCount);
  }
}

TEST(LoadRecording, MissingFileIsIoError) {
  try {
    load_recording("/nonexistent/night.csv");
    FAIL();
  } catch (const PsgError& e) {
    EXPECT_EQ(e.kind(), PsgError::Kind::Io);
  }
}

TEST(LoadRecording, ListSkipsCompanionFiles) {
  TempDir dir;
  write_recording(make_recording(stages({0})), dir.path() / "b.csv");
  write_recording(make_recording(stages({0})), dir.path() / "a.csv");
  write_lines(dir.path() / "a.features.csv", {"epoch,stage"});
  const auto list = list_recordings(dir.path());
  ASSERT_EQ(list.size(), 2u);
  EXPECT_EQ(list[0].filename(), "a.csv");
  EXPECT_EQ(list[1].filename(), "b.csv");
}

TEST(SegmentEpochs, OffsetsAndLabels) {
  const Recording rec = make_recording(stages({0, 1}));
  const auto epochs = segment_epochs(rec);
  ASSERT_EQ(epochs.size(), 2u);
  EXPECT_EQ(epochs[1].channel(Channel::Eeg).data(), rec.channel(Channel::Eeg).data() + 3000);
  EXPECT_EQ(epochs[0].label, SleepStage::Wake);
  EXPECT_EQ(epochs[1].label, SleepStage::S1);
  EXPECT_EQ(segment_epochs(make_recording(stages({3}))).size(), 1u);
}

TEST(TransitionRemoval, HandCases) {
  auto kept = [](std::initializer_list<int> l) {
    const auto s = stages(l);
    return kept_after_transition_removal(s, 1);
  };
  EXPECT_EQ(kept({0, 0, 1, 1}), (std::vector<std::size_t>{0, 3}));
  EXPECT_EQ(kept({2, 2, 2}), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_TRUE(kept({0, 1, 0}).empty());
}

TEST(TransitionRemoval, EpochViewMatchesIndexForm) {
  const Recording rec = make_recording(stages({0, 0, 1, 1}));
  const auto kept = remove_transition_epochs(segment_epochs(rec));
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].index, 0u);
  EXPECT_EQ(kept[1].index, 3u);
}

TEST(TransitionRemoval, PropertyNoKeptEpochNearAChange) {
  Rng rng(7);
  std::uniform_int_distribution<int> pick(0, 4), keep(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<SleepStage> labels;
    int cur = pick(rng);
    for (int i = 0; i < 40; ++i) {
      if (keep(rng) == 0) cur = pick(rng);
      labels.push_back(stage_from_index(cur));
    }
    const auto kept = kept_after_transition_removal(labels, 1);
    std::set<std::size_t> k(kept.begin(), kept.end());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const bool near = (i > 0 && labels[i - 1] != labels[i]) || (i + 1 < labels.size() && labels[i + 1] != labels[i]);
      EXPECT_EQ(k.count(i) == 0, near) << "trial " << trial << " index " << i;
    }
  }
}

TEST(BalancedSplit, FiveToOnePerClass) {
  std::vector<SleepStage> labels;
  for (int c = 0; c < 5; ++c)
    for (int i = 0; i < 60; ++i) labels.push_back(stage_from_index(c));
  Recording rec = make_recording(labels);
  const auto split = balanced_split(segment_epochs(rec), 3);
  std::array<int, 5> tr{}, va{};
  for (const auto& e : split.train) ++tr[static_cast<std::size_t>(stage_index(e.label))];
  for (const auto& e : split.validation) ++va[static_cast<std::size_t>(stage_index(e.label))];
  for (int c = 0; c < 5; ++c) {
    EXPECT_EQ(tr[static_cast<std::size_t>(c)], 50);
    EXPECT_EQ(va[static_cast<std::size_t>(c)], 10);
  }
}

TEST(BalancedSplit, DeterministicPerSeed) {
  std::vector<SleepStage> labels;
  for (int i = 0; i < 300; ++i) labels.push_back(stage_from_index(i % 5));
  EXPECT_EQ(balanced_validation_mask(labels, 11), balanced_validation_mask(labels, 11));
  EXPECT_NE(balanced_validation_mask(labels, 11), balanced_validation_mask(labels, 12));
}

TEST(BalancedSplit, RatioWithinOneForOddCounts) {
  for (int n : {6, 7, 11, 13, 29, 61}) {
    std::vector<SleepStage> labels;
    for (int c = 0; c < 5; ++c)
      for (int i = 0; i < n + c; ++i) labels.push_back(stage_from_index(c));
    const auto mask = balanced_validation_mask(labels, static_cast<std::uint64_t>(n));
    std::array<int, 5> va{}, all{};
    for (std::size_t i = 0; i < labels.size(); ++i) {
      ++all[static_cast<std::size_t>(stage_index(labels[i]))];
      if (mask[i]) ++va[static_cast<std::size_t>(stage_index(labels[i]))];
    }
    for (std::size_t c = 0; c < 5; ++c) {
      // validation holds n/6 of the class, within one epoch
      EXPECT_LE(std::abs(6 * va[c] - all[c]), 6) << "n=" << n << " class " << c;
      EXPECT_GE(va[c], 1);
    }
  }
}

TEST(BalancedSplit, InsufficientClassSupport) {
  std::vector<SleepStage> labels;
  for (int c = 0; c < 5; ++c)
    for (int i = 0; i < (c == 2 ? 3 : 20); ++i) labels.push_back(stage_from_index(c));
  try {
    balanced_validation_mask(labels, 1);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("insufficient class support"), std::string::npos);
  }
}

TEST(Loocv, FoldCounts) {
  EXPECT_EQ(loocv_folds(5).size(), 5u);
  EXPECT_EQ(loocv_folds(10).size(), 10u);
  const auto two = loocv_folds(2);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].test, 0u);
  EXPECT_EQ(two[0].train, std::vector<std::size_t>{1});
  EXPECT_EQ(two[1].train, std::vector<std::size_t>{0});
  EXPECT_THROW(loocv_folds(1), std::invalid_argument);
}

TEST(Loocv, EveryRecordingTestedOnce) {
  const auto folds = loocv_folds(7);
  std::set<std::size_t> tested;
  for (const auto& f : folds) {
    EXPECT_TRUE(tested.insert(f.test).second);
    EXPECT_EQ(f.train.size(), 6u);
    EXPECT_EQ(std::count(f.train.begin(), f.train.end(), f.test), 0);
  }
}
