#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "upd/eval/agents.hpp"

namespace upd::eval {

inline constexpr int kDefaultEpisodes = 32;

class EvalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Returns of one (ego, partner, layout, seat) pairing.
struct EvalCell {
  std::string ego;
  std::string partner;
  std::string layout;
  int seat = 0;  // the ego's seat
  std::vector<double> returns;

  double mean() const;
  double std() const;  // population
};

// Both seats pooled; the mean weights cells by episode count.
struct EvalAggregate {
  std::string ego;
  std::string partner;
  std::string layout;
  int episodes = 0;
  double mean = 0.0;
  double std = 0.0;
};

struct EvalReport {
  std::vector<EvalCell> cells;

  std::vector<EvalAggregate> aggregates() const;
  // Tab-separated: one row per cell plus one "both" row per pairing.
  std::string to_table() const;
  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
};

struct EvalOptions {
  int episodes = kDefaultEpisodes;
  int horizon = env::kDefaultHorizon;
  std::uint64_t seed = 0;
};

// Scripted evaluation suite: Random, Stay, two Biased agents (an
// interact-heavy and a movement-heavy one) and an OnionWorker.
std::vector<std::string> default_suite();

// Sparse-reward episodes (no shaping) with the ego in `seat`. Episode k
// uses env and agent seeds derived from (seed, seat, k), so a cell is a
// pure function of its inputs.
EvalCell evaluate_pairing(Agent& ego, Agent& partner, const env::LevelPtr& level,
                          const std::string& layout_name, int seat, const EvalOptions& opts);

// Both seats with equal episode counts.
std::vector<EvalCell> evaluate_both_seats(Agent& ego, Agent& partner, const env::LevelPtr& level,
                                          const std::string& layout_name, const EvalOptions& opts);

// A single episode; returns the sparse return.
double play_episode(Agent& a0, Agent& a1, const env::LevelPtr& level, std::uint64_t env_seed,
                    int horizon, std::vector<env::JointAction>* actions = nullptr);

}  // namespace upd::eval
