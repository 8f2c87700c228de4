#pragma once

#include "viral/sim/types.hpp"

namespace viral::sim {

// Scripted proportional controller toward the current stage's subgoal.
// Stands in for teleoperated demonstrations; pure function of the world.
ActionDelta oracle_action(const WorldState& w);

}  // namespace viral::sim
