#pragma once

#include <utility>
#include <vector>

#include "viral/sim/types.hpp"

namespace viral::sim {

// stage advancement thresholds
inline constexpr double kWalkDistLo = 0.35;
inline constexpr double kWalkDistHi = 0.55;
inline constexpr double kWalkHeadingTol = 0.2;
inline constexpr double kPrePlaceHorizTol = 0.10;
inline constexpr double kPrePlaceHeightBand = 0.10;
inline constexpr double kLiftDone = 0.15;
inline constexpr double kTurnTol = 0.15;
inline constexpr double kPrePlaceHover = 0.05;  // pre-place target above surface
inline constexpr double kLiftGoalHeight = 0.18; // lift goal above surface

// end-effector reach in the vertical plane: distance ahead of the base and
// height above the floor
std::pair<double, double> forward_kinematics(const std::array<double, 2>& q_arm);

// inverse of forward_kinematics; clamps unreachable targets to the boundary
std::array<double, 2> inverse_kinematics(double d_forward, double h);

Vec3 end_effector_world(const WorldState& w);

Shape sample_object_shape(Rng& rng, ObjectMode mode);

WorldState reset_nominal(uint64_t seed, uint64_t env_id, const SceneRanges& ranges,
                         ObjectMode mode);

// uniform draw from the buffer; the caller's stream indexes the draw and the
// returned state continues on that stream
WorldState reset_from_snapshot(const std::vector<DemoSnapshot>& buffer, Rng& rng);

CommandState accumulate_command(const CommandState& cmd, const ActionDelta& delta);

// command accumulation without clamping; feeds the command-overflow penalty
CommandState accumulate_command_unclamped(const CommandState& cmd,
                                          const ActionDelta& delta);

void step(WorldState& w, double dt = kDt);

// applies at most one stage transition; returns true if the stage changed
bool advance_stage(WorldState& w);

StepResult check_termination(const WorldState& w, int horizon = kDefaultHorizon);

// desired base yaw during the turn stage: face the opposite table
double desired_turn_yaw(const WorldState& w);

Vec3 pre_place_target(const WorldState& w);

// world-state sanity used when validating demo snapshots
bool world_invariants_hold(const WorldState& w);

}  // namespace viral::sim
