#include "viral/sim/oracle.hpp"

#include <cmath>

#include "viral/sim/world.hpp"

namespace viral::sim {

namespace {

constexpr double kStandoff = 0.45;
constexpr double kCloseGrip = 0.85;

struct Targets {
  double vx = 0.0;
  double vy = 0.0;
  double w = 0.0;
  std::array<double, 2> q_arm{};
  double g = kCloseGrip;
};

double servo(double err, double gain, double limit) {
  return clamp(gain * err, -limit, limit);
}

// arm target reaching toward a world xy point at a given height, limited to
// the kinematic envelope ahead of the base
std::array<double, 2> reach(const WorldState& w, const Vec2& target_xy, double h) {
  const double d = to_body(w.base, target_xy).x;
  return inverse_kinematics(clamp(d, 0.15, 0.60), h);
}

// joint-space interpolation can dip several centimeters below the commanded
// height, so stay at a clearance height until horizontally aligned and only
// then descend onto the target
std::array<double, 2> reach_clear(const WorldState& w, const Vec2& target_xy,
                                  double target_h, double surface) {
  const Vec3 ee = end_effector_world(w);
  const double horiz_err = (ee.xy() - target_xy).norm();
  const double safe_h = std::max(target_h, surface + 0.16);
  return reach(w, target_xy, horiz_err > 0.06 ? safe_h : target_h);
}

Targets stage_targets(const WorldState& w) {
  Targets tg;
  const TableGeom& tbl = w.scene.table(w.active_table);
  const double surface = tbl.height;
  const Vec3 ee = end_effector_world(w);
  const std::array<double, 2> carry = inverse_kinematics(0.35, 0.95);

  switch (w.stage) {
    case 0: {  // walk to the standoff band facing the table
      const double dist =
          (Vec2{tbl.pose.x, tbl.pose.y} - Vec2{w.base.x, w.base.y}).norm();
      const double herr = wrap_angle(bearing_to(w.base, tbl.pose.x, tbl.pose.y) -
                                     w.base.yaw);
      tg.w = servo(herr, 2.0, kMaxCmdVel);
      tg.vx = std::abs(herr) < 0.6 ? servo(dist - kStandoff, 1.2, kMaxCmdVel) : 0.0;
      tg.q_arm = carry;
      tg.g = kCloseGrip;
      break;
    }
    case 1: {  // hover the held object over the tray
      const Vec3 target = pre_place_target(w);
      const double herr =
          wrap_angle(bearing_to(w.base, target.x, target.y) - w.base.yaw);
      const double dist = (target.xy() - Vec2{w.base.x, w.base.y}).norm();
      tg.w = servo(herr, 1.5, 0.3);
      tg.vx = servo(dist - 0.46, 0.8, 0.15);
      tg.q_arm = reach_clear(w, target.xy(), target.z, surface);
      tg.g = kCloseGrip;
      break;
    }
    case 2: {  // open once centered enough for the object to fit the tray
      const Vec3 target = pre_place_target(w);
      const double herr =
          wrap_angle(bearing_to(w.base, target.x, target.y) - w.base.yaw);
      const double dist = (target.xy() - Vec2{w.base.x, w.base.y}).norm();
      tg.w = servo(herr, 1.5, 0.3);
      tg.vx = servo(dist - 0.46, 0.8, 0.15);
      tg.q_arm = reach_clear(w, target.xy(), target.z, surface);
      const double margin =
          w.scene.tray.radius - w.hold_obj.grasp_radius - 0.02;
      const double center_err = (ee.xy() - target.xy()).norm();
      tg.g = (w.hold_obj.attached && center_err > margin) ? kCloseGrip : 0.0;
      break;
    }
    case 3: {  // reach the grasp point, close, then lift straight up
      if (!w.grasp_obj.attached) {
        const Vec2 obj_xy = w.grasp_obj.pos.xy();
        const double gz = w.grasp_obj.grasp_point_z();
        const double herr =
            wrap_angle(bearing_to(w.base, obj_xy.x, obj_xy.y) - w.base.yaw);
        const double dist = (obj_xy - Vec2{w.base.x, w.base.y}).norm();
        tg.w = servo(herr, 1.5, 0.3);
        tg.vx = servo(dist - 0.46, 0.8, 0.15);
        tg.q_arm = reach_clear(w, obj_xy, gz, surface);
        const bool ready = (ee.xy() - obj_xy).norm() <= 0.03 &&
                           std::abs(ee.z - gz) <= 0.02;
        tg.g = ready ? kCloseGrip : 0.0;
      } else {
        tg.q_arm = reach(w, w.lift_goal.xy(), w.lift_goal.z + 0.02);
        tg.g = kCloseGrip;
      }
      break;
    }
    case 4: {  // rotate in place toward the opposite table
      const double herr = wrap_angle(desired_turn_yaw(w) - w.base.yaw);
      tg.w = servo(herr, 2.0, kMaxCmdVel);
      tg.q_arm = carry;
      tg.g = kCloseGrip;
      break;
    }
    default:
      break;
  }
  (void)surface;
  return tg;
}

}  // namespace

ActionDelta oracle_action(const WorldState& w) {
  const Targets tg = stage_targets(w);
  ActionDelta d;
  d.dv[0] = clamp(tg.vx - w.cmd.v_cmd[0], -0.1, 0.1);
  d.dv[1] = clamp(tg.vy - w.cmd.v_cmd[1], -0.1, 0.1);
  d.dw = clamp(tg.w - w.cmd.w_cmd, -0.1, 0.1);
  d.dq_arm[0] = clamp(tg.q_arm[0] - w.cmd.q_arm_tgt[0], -0.05, 0.05);
  d.dq_arm[1] = clamp(tg.q_arm[1] - w.cmd.q_arm_tgt[1], -0.05, 0.05);
  d.dg = clamp(tg.g - w.cmd.g_tgt, -0.1, 0.1);
  return d;
}

}  // namespace viral::sim
