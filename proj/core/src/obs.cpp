#include "viral/percept/obs.hpp"

#include <cmath>

#include "viral/sim/world.hpp"

namespace viral::percept {

PrivilegedObs build_privileged(const sim::WorldState& w) {
  PrivilegedObs o{};
  int k = 0;
  auto put = [&](double v) { o[k++] = v; };
  auto put_rel = [&](const Vec2& world_xy, double z) {
    const Vec2 rel = to_body(w.base, world_xy);
    put(rel.x);
    put(rel.y);
    put(z);
  };

  put(w.base_vel[0]);
  put(w.base_vel[1]);
  put(w.base_vel[2]);
  put(std::sin(w.base.yaw));
  put(std::cos(w.base.yaw));
  put(w.joints.q_arm[0]);
  put(w.joints.q_arm[1]);
  put(w.joints.g);
  put(w.joints.dq_arm[0]);
  put(w.joints.dq_arm[1]);
  put(w.joints.dg);
  put((w.hold_obj.attached || w.grasp_obj.attached) ? w.joints.g : 0.0);
  for (double v : w.last_delta.flat()) put(v);
  put(w.cmd.v_cmd[0]);
  put(w.cmd.v_cmd[1]);
  put(w.cmd.w_cmd);
  put(w.cmd.q_arm_tgt[0]);
  put(w.cmd.q_arm_tgt[1]);
  put(w.cmd.g_tgt);
  for (int s = 0; s < 5; ++s) put(w.stage == s ? 1.0 : 0.0);

  const Vec3 ee = sim::end_effector_world(w);
  put_rel(w.grasp_obj.pos.xy(), w.grasp_obj.grasp_point_z());

  // hold object relative to the end effector, rotated into the body frame
  {
    const Vec2 d = w.hold_obj.pos.xy() - ee.xy();
    const double c = std::cos(w.base.yaw), s = std::sin(w.base.yaw);
    put(c * d.x + s * d.y);
    put(-s * d.x + c * d.y);
    put(w.hold_obj.pos.z - ee.z);
  }

  const sim::TableGeom& tbl = w.scene.table(w.active_table);
  put_rel({w.scene.tray.pose.x, w.scene.tray.pose.y}, tbl.height);
  const Vec3 pre = sim::pre_place_target(w);
  put_rel(pre.xy(), pre.z);
  put_rel(w.lift_goal.xy(), w.lift_goal.z);

  {
    const Vec2 rel = to_body(w.base, {tbl.pose.x, tbl.pose.y});
    put(rel.x);
    put(rel.y);
    put(std::sin(tbl.pose.yaw - w.base.yaw));
    put(std::cos(tbl.pose.yaw - w.base.yaw));
  }

  const auto [d_fwd, height] = sim::forward_kinematics(w.joints.q_arm);
  put(d_fwd);
  put(height);
  return o;
}

StudentStateObs build_student_state(const sim::WorldState& w) {
  StudentStateObs o{};
  int k = 0;
  auto put = [&](double v) { o[k++] = v; };
  put(w.base_vel[2]);
  for (double v : w.last_delta.flat()) put(v);
  put(w.cmd.v_cmd[0]);
  put(w.cmd.v_cmd[1]);
  put(w.cmd.w_cmd);
  put(w.cmd.q_arm_tgt[0]);
  put(w.cmd.q_arm_tgt[1]);
  put(w.cmd.g_tgt);
  put(w.joints.q_arm[0]);
  put(w.joints.q_arm[1]);
  put(w.joints.dq_arm[0]);
  put(w.joints.dq_arm[1]);
  return o;
}

}  // namespace viral::percept
