#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "upd/common/random.hpp"
#include "upd/env/env.hpp"

namespace upd::eval {

enum class ScriptedKind { Random, Stay, Biased, OnionWorker, PlateWorker };

std::string scripted_name(ScriptedKind k);
ScriptedKind parse_scripted_kind(const std::string& s);

struct ScriptedAgent {
  ScriptedKind kind = ScriptedKind::Stay;
  std::vector<double> mask;  // Biased only; on the simplex
  Rng rng;
};

ScriptedAgent make_scripted(ScriptedKind kind, std::uint64_t seed, std::vector<double> mask = {});

// Random: uniform. Biased: samples the mask. OnionWorker carries onions to
// pots that still need them. PlateWorker fetches a plate once a pot is
// cooking, collects the soup and serves it. Workers stay when nothing is
// reachable or nothing needs doing.
env::Action scripted_act(ScriptedAgent& agent, const env::EnvState& state, int agent_index);

// One step of shortest-path travel toward any cell satisfying `is_target`
// (a non-floor tile the agent must stand next to and face). Returns
// Interact once adjacent and facing; a turn when adjacent but facing
// elsewhere; nullopt when no target is reachable. Ties break Up < Down <
// Left < Right. The other agent's cell is avoided when a detour exists.
std::optional<env::Action> navigate(const env::EnvState& state, int agent_index,
                                    const std::function<bool(env::Cell)>& is_target);

}  // namespace upd::eval
