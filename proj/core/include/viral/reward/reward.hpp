#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "viral/sim/types.hpp"

namespace viral::reward {

// reference arm poses used by the tracking terms (fixed IK targets)
std::array<double, 2> arm_ref_place();
std::array<double, 2> arm_ref_grasp();

inline constexpr double kCloseTarget = 0.85;

// ---- shaped terms ----
double r_walk(double dist_robot_obj);
double r_heading(double heading_err);  // ((err)/pi)^2, penalizing weight
double r_place(double force_proxy, double dist_obj_tray);
double r_hold(double dist_hold_ee);
double r_grasp_dist(double dist_ee_grasp_point);
double r_grasp_z(double h_obj, double h_table);
double r_grasp_goal(const Vec3& p_obj, const Vec3& p_goal);
double r_turn(double yaw, double yaw_desired);
double r_keep_closed(double g);
double r_pose_track(const std::array<double, 2>& q_arm,
                    const std::array<double, 2>& q_ref);

// one row of the stage-gated weighted sum; mask bit i enables stage i
struct GatedWeight {
  double weight = 0.0;
  uint8_t mask = 0;

  bool active(int stage) const { return (mask >> stage) & 1; }
};

enum Term : int {
  kWalk = 0,
  kHeading,
  kPlace,
  kHold,
  kGraspDist,
  kGraspForce,
  kGraspZ,
  kGraspGoal,
  kTurn,
  kPoseTrackPlace,
  kPoseTrackGrasp,
  kKeepClosed,
  kPenDeltaRate,
  kPenDofVel,
  kPenSmoothness,
  kPenCmdOverflow,
  kPenZeroCmd,
  kPenObjSlide,
  kTermination,
  kNumTerms,
};

const char* term_name(Term t);

struct TermWeights {
  std::array<GatedWeight, kNumTerms> rows{};
  std::array<double, 5> stage_weight{1.0, 1.0, 1.0, 1.0, 1.0};

  static TermWeights defaults();
};

struct RewardBreakdown {
  std::array<double, kNumTerms> value{};
  double total = 0.0;

  double operator[](Term t) const { return value[t]; }
};

// raw penalty magnitudes (values are >= 0, weights are negative)
void r_penalties(const sim::WorldState& world, const sim::ActionDelta& delta,
                 const sim::ActionDelta& prev_delta,
                 const sim::CommandState& cmd_candidate,
                 const Vec2& prev_grasp_xy, RewardBreakdown& out);

// stage-gated weighted sum over the breakdown's raw values
double total_reward(int stage, const RewardBreakdown& breakdown,
                    const TermWeights& weights);

// full per-step reward: fills every term from the post-step world and applies
// the gating for the world's current stage
RewardBreakdown compute_breakdown(const sim::WorldState& world,
                                  const sim::ActionDelta& delta,
                                  const sim::ActionDelta& prev_delta,
                                  const sim::CommandState& cmd_candidate,
                                  const Vec2& prev_grasp_xy, bool violation,
                                  const TermWeights& weights);

}  // namespace viral::reward
