#include "viral/reward/reward.hpp"

#include <cmath>

#include "viral/sim/world.hpp"

namespace viral::reward {

namespace {

constexpr uint8_t kAll = 0b11111;

uint8_t mask_range(int lo, int hi) {
  uint8_t m = 0;
  for (int i = lo; i <= hi; ++i) m |= static_cast<uint8_t>(1u << i);
  return m;
}

double sq(double v) { return v * v; }

}  // namespace

std::array<double, 2> arm_ref_place() { return sim::inverse_kinematics(0.35, 0.95); }
std::array<double, 2> arm_ref_grasp() { return sim::inverse_kinematics(0.48, 0.76); }

double r_walk(double dist_robot_obj) {
  return std::exp(-4.0 * sq(dist_robot_obj - 0.45));
}

double r_heading(double heading_err) { return sq(heading_err / kPi); }

double r_place(double force_proxy, double dist_obj_tray) {
  return -force_proxy * (dist_obj_tray < 0.3 ? 1.0 : 0.0);
}

double r_hold(double dist_hold_ee) { return std::exp(-4.0 * dist_hold_ee); }

double r_grasp_dist(double dist_ee_grasp_point) {
  return std::exp(-10.0 * dist_ee_grasp_point);
}

double r_grasp_z(double h_obj, double h_table) {
  return std::min(h_obj - h_table, 0.15);
}

double r_grasp_goal(const Vec3& p_obj, const Vec3& p_goal) {
  return std::exp(-10.0 * (p_obj - p_goal).norm2());
}

double r_turn(double yaw, double yaw_desired) {
  return -std::abs(wrap_angle(yaw - yaw_desired));
}

double r_keep_closed(double g) { return std::exp(-4.0 * sq(g - kCloseTarget)); }

double r_pose_track(const std::array<double, 2>& q_arm,
                    const std::array<double, 2>& q_ref) {
  const double n = std::hypot(q_arm[0] - q_ref[0], q_arm[1] - q_ref[1]);
  return std::exp(-4.0 * n);
}

const char* term_name(Term t) {
  static constexpr const char* kNames[kNumTerms] = {
      "walk",          "heading",       "place",        "hold",
      "grasp_dist",    "grasp_force",   "grasp_z",      "grasp_goal",
      "turn",          "pose_track_place", "pose_track_grasp", "keep_closed",
      "delta_rate",    "dof_vel",       "smoothness",   "cmd_overflow",
      "zero_cmd",      "obj_slide",     "termination",
  };
  return kNames[t];
}

TermWeights TermWeights::defaults() {
  TermWeights w;
  w.rows[kWalk] = {2.0, kAll};
  w.rows[kHeading] = {-10000.0, mask_range(0, 0)};
  w.rows[kPlace] = {10.0, mask_range(0, 1)};
  w.rows[kHold] = {1.0, kAll};
  w.rows[kGraspDist] = {20.0, mask_range(3, 4)};
  w.rows[kGraspForce] = {1.0, mask_range(3, 4)};
  w.rows[kGraspZ] = {200.0, mask_range(3, 4)};
  w.rows[kGraspGoal] = {10.0, mask_range(3, 4)};
  w.rows[kTurn] = {15.0, mask_range(4, 4)};
  w.rows[kPoseTrackPlace] = {5.0, mask_range(0, 2)};
  w.rows[kPoseTrackGrasp] = {25.0, mask_range(3, 4)};
  w.rows[kKeepClosed] = {9.0, static_cast<uint8_t>(mask_range(0, 1) | mask_range(3, 4))};
  w.rows[kPenDeltaRate] = {-0.01, kAll};
  w.rows[kPenDofVel] = {-0.5, kAll};
  w.rows[kPenSmoothness] = {-9.0, kAll};
  w.rows[kPenCmdOverflow] = {-20.0, kAll};
  w.rows[kPenZeroCmd] = {-12.0, mask_range(1, 3)};
  w.rows[kPenObjSlide] = {-1000.0, mask_range(1, 4)};
  w.rows[kTermination] = {-2000.0, kAll};
  return w;
}

void r_penalties(const sim::WorldState& world, const sim::ActionDelta& delta,
                 const sim::ActionDelta& prev_delta,
                 const sim::CommandState& cmd_candidate,
                 const Vec2& prev_grasp_xy, RewardBreakdown& out) {
  const auto d = delta.flat();
  const auto pd = prev_delta.flat();
  double rate = 0.0, smooth = 0.0;
  for (int i = 0; i < sim::ActionDelta::kDim; ++i) {
    rate += sq(d[i]);
    smooth += sq(d[i] - pd[i]);
  }
  out.value[kPenDeltaRate] = rate;
  out.value[kPenSmoothness] = smooth;

  out.value[kPenDofVel] = sq(world.joints.dq_arm[0]) + sq(world.joints.dq_arm[1]) +
                          sq(world.joints.dg);

  double overflow = 0.0;
  overflow += std::max(0.0, std::abs(cmd_candidate.v_cmd[0]) - sim::kMaxCmdVel);
  overflow += std::max(0.0, std::abs(cmd_candidate.v_cmd[1]) - sim::kMaxCmdVel);
  overflow += std::max(0.0, std::abs(cmd_candidate.w_cmd) - sim::kMaxCmdVel);
  out.value[kPenCmdOverflow] = overflow;

  out.value[kPenZeroCmd] = std::abs(world.cmd.v_cmd[0]) +
                           std::abs(world.cmd.v_cmd[1]) + std::abs(world.cmd.w_cmd);

  // low horizontal dragging of the grasp object counts as contact movement
  double slide = 0.0;
  const sim::ObjectState& obj = world.grasp_obj;
  for (int id = 0; id < 2; ++id) {
    const sim::TableGeom& tbl = world.scene.table(id);
    if (tbl.contains_xy(obj.pos.xy()) && obj.pos.z - tbl.height <= 0.02) {
      slide = (obj.pos.xy() - prev_grasp_xy).norm() / sim::kDt;
      break;
    }
  }
  out.value[kPenObjSlide] = slide;
}

double total_reward(int stage, const RewardBreakdown& breakdown,
                    const TermWeights& weights) {
  double sum = 0.0;
  for (int t = 0; t < kNumTerms; ++t) {
    const GatedWeight& row = weights.rows[t];
    if (row.active(stage)) sum += row.weight * breakdown.value[t];
  }
  return weights.stage_weight[stage] * sum;
}

RewardBreakdown compute_breakdown(const sim::WorldState& world,
                                  const sim::ActionDelta& delta,
                                  const sim::ActionDelta& prev_delta,
                                  const sim::CommandState& cmd_candidate,
                                  const Vec2& prev_grasp_xy, bool violation,
                                  const TermWeights& weights) {
  RewardBreakdown out;
  const sim::TableGeom& tbl = world.scene.table(world.active_table);
  const double surface = tbl.height;
  const Vec3 ee = sim::end_effector_world(world);

  const Vec2 base_xy{world.base.x, world.base.y};
  out.value[kWalk] = r_walk((world.grasp_obj.pos.xy() - base_xy).norm());
  out.value[kHeading] = r_heading(wrap_angle(
      bearing_to(world.base, world.grasp_obj.pos.x, world.grasp_obj.pos.y) -
      world.base.yaw));

  const double hold_force = world.hold_obj.attached ? world.joints.g : 0.0;
  const Vec3 tray_pos{world.scene.tray.pose.x, world.scene.tray.pose.y, surface};
  out.value[kPlace] = r_place(hold_force, (world.hold_obj.pos - tray_pos).norm());
  out.value[kHold] = r_hold((world.hold_obj.pos - ee).norm());

  const Vec3 grasp_point{world.grasp_obj.pos.x, world.grasp_obj.pos.y,
                         world.grasp_obj.grasp_point_z()};
  out.value[kGraspDist] = r_grasp_dist((grasp_point - ee).norm());
  out.value[kGraspForce] = world.grasp_obj.attached ? world.joints.g : 0.0;
  out.value[kGraspZ] = r_grasp_z(world.grasp_obj.pos.z, surface);
  out.value[kGraspGoal] = r_grasp_goal(world.grasp_obj.pos, world.lift_goal);
  out.value[kTurn] = r_turn(world.base.yaw, sim::desired_turn_yaw(world));
  out.value[kPoseTrackPlace] = r_pose_track(world.joints.q_arm, arm_ref_place());
  out.value[kPoseTrackGrasp] = r_pose_track(world.joints.q_arm, arm_ref_grasp());
  out.value[kKeepClosed] = r_keep_closed(world.joints.g);

  r_penalties(world, delta, prev_delta, cmd_candidate, prev_grasp_xy, out);
  out.value[kTermination] = violation ? 1.0 : 0.0;

  out.total = total_reward(world.stage, out, weights);
  return out;
}

}  // namespace viral::reward
