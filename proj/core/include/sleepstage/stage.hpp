#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace sleepstage {

/// Five-class sleep stage code. The integer values are the class indices
/// used by every model and report.
enum class SleepStage : std::uint8_t { Wake = 0, S1 = 1, S2 = 2, Sws = 3, Rem = 4 };

inline constexpr std::size_t kNumStages = 5;

inline constexpr std::array<SleepStage, kNumStages> kAllStages = {
    SleepStage::Wake, SleepStage::S1, SleepStage::S2, SleepStage::Sws, SleepStage::Rem};

constexpr int stage_index(SleepStage s) { return static_cast<int>(s); }
SleepStage stage_from_index(int index);

/// Short label token as used in label files: W, S1, S2, SWS, REM.
std::string_view stage_token(SleepStage s);

/// Report column name: WAKE, S1, S2, SWS, REM.
std::string_view stage_name(SleepStage s);

/// Accepts W/WAKE, S1, S2, SWS, S3 (alias of SWS) and REM, case-sensitive.
std::optional<SleepStage> parse_stage(std::string_view token);

}  // namespace sleepstage
