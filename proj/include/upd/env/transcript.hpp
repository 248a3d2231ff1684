#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "upd/env/env.hpp"

namespace upd::env {

// One line of the event log.
struct StepRecord {
  int t = 0;
  JointAction actions{Action::Stay, Action::Stay};
  double shaping_coeff = 0.0;
  double reward = 0.0;
  EventSet events;
  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

// Header + per-step records; enough to re-simulate an episode exactly.
struct Transcript {
  std::string layout;  // serialize_layout text
  Recipe recipe;
  std::uint64_t seed = 0;
  int horizon = kDefaultHorizon;
  std::vector<StepRecord> steps;
  // Return stated on the end line of a loaded transcript.
  std::optional<double> stated_return;

  double total_return() const;
};

std::string step_record_to_line(const StepRecord& r);
StepRecord step_record_from_line(std::string_view line);

// Line-delimited JSON: {"type":"header",...}, one {"type":"step",...}
// per step, {"type":"end","return":...}.
std::string transcript_to_jsonl(const Transcript& t);
Transcript transcript_from_jsonl(std::string_view text);

void save_transcript(const Transcript& t, const std::string& path);
Transcript load_transcript(const std::string& path);

struct ReplayReport {
  EnvState final_state;
  double recomputed_return = 0.0;
  double logged_return = 0.0;  // stated end-line return, else the step sum
  // First step whose reward or events differ from the log, if any.
  std::optional<int> first_mismatch;
  bool ok() const {
    return !first_mismatch && recomputed_return == logged_return;
  }
};

ReplayReport replay(const Transcript& t);

}  // namespace upd::env
