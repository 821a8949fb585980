#include "sleepstage/stage.hpp"

#include <stdexcept>
#include <string>

namespace sleepstage {

SleepStage stage_from_index(int index) {
  if (index < 0 || index >= static_cast<int>(kNumStages))
    throw std::out_of_range("stage index out of range: " + std::to_string(index));
  return static_cast<SleepStage>(index);
}

std::string_view stage_token(SleepStage s) {
  switch (s) {
    case SleepStage::Wake: return "W";
    case SleepStage::S1: return "S1";
    case SleepStage::S2: return "S2";
    case SleepStage::Sws: return "SWS";
    case SleepStage::Rem: return "REM";
  }
  return "?";
}

std::string_view stage_name(SleepStage s) {
  switch (s) {
    case SleepStage::Wake: return "WAKE";
    case SleepStage::S1: return "S1";
    case SleepStage::S2: return "S2";
    case SleepStage::Sws: return "SWS";
    case SleepStage::Rem: return "REM";
  }
  return "?";
}

std::optional<SleepStage> parse_stage(std::string_view token) {
  if (token == "W" || token == "WAKE") return SleepStage::Wake;
  if (token == "S1") return SleepStage::S1;
  if (token == "S2") return SleepStage::S2;
  if (token == "SWS" || token == "S3") return SleepStage::Sws;
  if (token == "REM") return SleepStage::Rem;
  return std::nullopt;
}

}  // namespace sleepstage
