#include "viral/sim/world.hpp"

#include <algorithm>
#include <cmath>

#include "viral/errors.hpp"

namespace viral::sim {

namespace {

struct ShapeSpec {
  const char* name;
  double grasp_radius;
  double grasp_height;
};

// grasp heights span more than the attach tolerance, so a policy that never
// reads the observed grasp height cannot pick up every shape
constexpr ShapeSpec kShapeTable[kNumShapes] = {
    {"cylinder", 0.030, 0.060}, {"box", 0.040, 0.080},
    {"capsule", 0.035, 0.110},  {"disc", 0.055, 0.050},
    {"bar", 0.050, 0.070},      {"cone", 0.045, 0.100},
    {"ring", 0.060, 0.055},     {"block", 0.055, 0.090},
    {"peg", 0.030, 0.120},      {"puck", 0.045, 0.050},
};

constexpr double kTableAX = 2.1;
constexpr double kTableBX = -2.1;

double table_surface(const WorldState& w, int table_id) {
  return w.scene.table(table_id).height;
}

bool object_in_tray(const WorldState& w, const ObjectState& obj) {
  if (obj.attached) return false;
  if (!obj.resting_table || *obj.resting_table != w.active_table) return false;
  const double d = (obj.pos.xy() - Vec2{w.scene.tray.pose.x, w.scene.tray.pose.y}).norm();
  return d + obj.grasp_radius <= w.scene.tray.radius;
}

// tray seat + grasp-object spawn relative to a table, shared by nominal
// resets and the cycle wrap
void seat_tray_and_object(WorldState& w, int table_id, ObjectMode mode) {
  const TableGeom& tbl = w.scene.table(table_id);
  const double tray_local_x = w.rng.uniform(-0.04, 0.04);
  const double tray_local_y = w.rng.uniform(-0.25, 0.25);
  const Vec2 tray_world = to_world(tbl.pose, {tray_local_x, tray_local_y});
  w.scene.tray.pose = {tray_world.x, tray_world.y, 0.0};

  ObjectState& obj = w.grasp_obj;
  obj.shape_id = sample_object_shape(w.rng, mode);
  obj.grasp_radius = shape_grasp_radius(obj.shape_id);
  obj.attached = false;
  obj.resting_table = table_id;
  const double side = w.rng.bernoulli(0.5) ? 1.0 : -1.0;
  double obj_local_y = tray_local_y + side * w.rng.uniform(0.18, 0.28);
  obj_local_y = clamp(obj_local_y, -tbl.width * 0.5 + 0.08, tbl.width * 0.5 - 0.08);
  const double obj_local_x = tray_local_x + w.rng.uniform(-0.06, 0.06);
  const Vec2 obj_world = to_world(tbl.pose, {obj_local_x, obj_local_y});
  obj.pos = {obj_world.x, obj_world.y, tbl.height};

  w.lift_goal = {obj.pos.x, obj.pos.y, tbl.height + kLiftGoalHeight};
}

void settle_released(const WorldState& w, ObjectState& obj) {
  obj.attached = false;
  obj.resting_table.reset();
  for (int id = 0; id < 2; ++id) {
    if (w.scene.table(id).contains_xy(obj.pos.xy())) {
      obj.pos.z = table_surface(w, id);
      obj.resting_table = id;
      return;
    }
  }
  obj.pos.z = 0.0;
}

}  // namespace

const char* shape_name(Shape s) { return kShapeTable[static_cast<int>(s)].name; }

double shape_grasp_radius(Shape s) {
  return kShapeTable[static_cast<int>(s)].grasp_radius;
}

double shape_grasp_height(Shape s) {
  return kShapeTable[static_cast<int>(s)].grasp_height;
}

std::pair<double, double> forward_kinematics(const std::array<double, 2>& q) {
  const double d = kArmBaseForward + kLink1 * std::cos(q[0]) +
                   kLink2 * std::cos(q[0] + q[1]);
  const double h = kArmBaseHeight + kLink1 * std::sin(q[0]) +
                   kLink2 * std::sin(q[0] + q[1]);
  return {d, h};
}

std::array<double, 2> inverse_kinematics(double d_forward, double h) {
  double dx = d_forward - kArmBaseForward;
  double dz = h - kArmBaseHeight;
  double r = std::hypot(dx, dz);
  const double r_max = kLink1 + kLink2 - 1e-6;
  const double r_min = kLink1 - kLink2 + 1e-6;
  if (r > r_max) {
    dx *= r_max / r;
    dz *= r_max / r;
    r = r_max;
  } else if (r < r_min) {
    if (r < 1e-12) {
      dx = r_min;
      dz = 0.0;
    } else {
      dx *= r_min / r;
      dz *= r_min / r;
    }
    r = r_min;
  }
  const double c2 = clamp((r * r - kLink1 * kLink1 - kLink2 * kLink2) /
                              (2.0 * kLink1 * kLink2),
                          -1.0, 1.0);
  const double q2 = -std::acos(c2);  // elbow-up branch
  const double q1 = std::atan2(dz, dx) -
                    std::atan2(kLink2 * std::sin(q2), kLink1 + kLink2 * c2);
  return {wrap_angle(q1), wrap_angle(q2)};
}

Vec3 end_effector_world(const WorldState& w) {
  const auto [d, h] = forward_kinematics(w.joints.q_arm);
  const Vec2 xy = to_world(w.base, {d, 0.0});
  return {xy.x, xy.y, h};
}

Shape sample_object_shape(Rng& rng, ObjectMode mode) {
  if (mode == ObjectMode::kSingle) {
    rng.next_u64();  // keep stream length independent of the mode
    return Shape::kCylinder;
  }
  return static_cast<Shape>(rng.uniform_index(kNumShapes));
}

WorldState reset_nominal(uint64_t seed, uint64_t env_id, const SceneRanges& ranges,
                         ObjectMode mode) {
  if (!ranges.valid()) throw ConfigError("reset_nominal: invalid scene ranges");

  WorldState w;
  w.rng = Rng(seed, env_id);
  w.object_mode = mode;

  auto sample_table = [&](double cx) {
    TableGeom t;
    t.height = w.rng.uniform(ranges.height_lo, ranges.height_hi);
    t.depth = w.rng.uniform(ranges.depth_lo, ranges.depth_hi);
    t.width = w.rng.uniform(ranges.width_lo, ranges.width_hi);
    t.thickness = w.rng.uniform(ranges.thickness_lo, ranges.thickness_hi);
    t.pose = {cx, w.rng.uniform(-0.15, 0.15), w.rng.uniform(-0.08, 0.08)};
    return t;
  };
  w.scene.table_a = sample_table(kTableAX);
  w.scene.table_b = sample_table(kTableBX);
  w.scene.floor_half_extent = 3.5;

  w.active_table = 0;
  seat_tray_and_object(w, 0, mode);

  // spawn facing the grasp table from the corridor between the tables
  const TableGeom& tbl = w.scene.table_a;
  const double toward = std::atan2(w.scene.table_b.pose.y - tbl.pose.y,
                                   w.scene.table_b.pose.x - tbl.pose.x);
  const double bearing = toward + w.rng.uniform(-0.25, 0.25);
  const double dist = w.rng.uniform(ranges.spawn_dist_lo, ranges.spawn_dist_hi);
  w.base.x = tbl.pose.x + dist * std::cos(bearing);
  w.base.y = tbl.pose.y + dist * std::sin(bearing);
  w.base.yaw = wrap_angle(bearing_to(w.base, tbl.pose.x, tbl.pose.y) +
                          w.rng.uniform(-ranges.spawn_face_err, ranges.spawn_face_err));
  w.base_vel = {0.0, 0.0, 0.0};

  const std::array<double, 2> carry = inverse_kinematics(0.35, 0.95);
  w.joints.q_arm = carry;
  w.joints.dq_arm = {0.0, 0.0};
  w.joints.g = 0.85;
  w.joints.dg = 0.0;
  w.cmd.v_cmd = {0.0, 0.0};
  w.cmd.w_cmd = 0.0;
  w.cmd.q_arm_tgt = carry;
  w.cmd.g_tgt = 0.85;
  w.last_delta = {};

  w.hold_obj.shape_id = sample_object_shape(w.rng, mode);
  w.hold_obj.grasp_radius = shape_grasp_radius(w.hold_obj.shape_id);
  w.hold_obj.attached = true;
  w.hold_obj.resting_table.reset();
  w.hold_obj.pos = end_effector_world(w);

  w.stage = 0;
  w.cycle_count = 0;
  w.t = 0;
  return w;
}

WorldState reset_from_snapshot(const std::vector<DemoSnapshot>& buffer, Rng& rng) {
  if (buffer.empty())
    throw ConfigError("reset_from_snapshot: empty demonstration buffer");
  const uint64_t idx = rng.uniform_index(buffer.size());
  WorldState w = buffer[idx].state;
  w.rng = rng;
  return w;
}

CommandState accumulate_command_unclamped(const CommandState& cmd,
                                          const ActionDelta& delta) {
  CommandState out = cmd;
  out.v_cmd[0] += delta.dv[0];
  out.v_cmd[1] += delta.dv[1];
  out.w_cmd += delta.dw;
  out.q_arm_tgt[0] += delta.dq_arm[0];
  out.q_arm_tgt[1] += delta.dq_arm[1];
  out.g_tgt += delta.dg;
  return out;
}

CommandState accumulate_command(const CommandState& cmd, const ActionDelta& delta) {
  CommandState out = accumulate_command_unclamped(cmd, delta);
  out.v_cmd[0] = clamp(out.v_cmd[0], -kMaxCmdVel, kMaxCmdVel);
  out.v_cmd[1] = clamp(out.v_cmd[1], -kMaxCmdVel, kMaxCmdVel);
  out.w_cmd = clamp(out.w_cmd, -kMaxCmdVel, kMaxCmdVel);
  out.q_arm_tgt[0] = clamp(out.q_arm_tgt[0], -kPi, kPi);
  out.q_arm_tgt[1] = clamp(out.q_arm_tgt[1], -kPi, kPi);
  out.g_tgt = clamp(out.g_tgt, 0.0, 1.0);
  return out;
}

void step(WorldState& w, double dt) {
  // first-order command tracking, then pose integration with the new
  // velocities rotated by the pre-step yaw
  const double alpha = dt / kTauVel;
  w.base_vel[0] += alpha * (w.cmd.v_cmd[0] - w.base_vel[0]);
  w.base_vel[1] += alpha * (w.cmd.v_cmd[1] - w.base_vel[1]);
  w.base_vel[2] += alpha * (w.cmd.w_cmd - w.base_vel[2]);

  const double c = std::cos(w.base.yaw), s = std::sin(w.base.yaw);
  w.base.x += dt * (c * w.base_vel[0] - s * w.base_vel[1]);
  w.base.y += dt * (s * w.base_vel[0] + c * w.base_vel[1]);
  w.base.yaw = wrap_angle(w.base.yaw + dt * w.base_vel[2]);

  for (int i = 0; i < 2; ++i) {
    const double rate = clamp((w.cmd.q_arm_tgt[i] - w.joints.q_arm[i]) / kTauJoint,
                              -kMaxArmRate, kMaxArmRate);
    w.joints.q_arm[i] += dt * rate;
    w.joints.dq_arm[i] = rate;
  }
  const double g_rate = clamp((w.cmd.g_tgt - w.joints.g) / kTauJoint,
                              -kMaxGripRate, kMaxGripRate);
  w.joints.g = clamp(w.joints.g + dt * g_rate, 0.0, 1.0);
  w.joints.dg = g_rate;

  const Vec3 ee = end_effector_world(w);

  ObjectState* attached = nullptr;
  if (w.hold_obj.attached) attached = &w.hold_obj;
  if (w.grasp_obj.attached) attached = &w.grasp_obj;

  if (attached != nullptr) {
    attached->pos = ee;
    if (w.joints.g <= kGripDetach) settle_released(w, *attached);
  } else if (w.joints.g >= kGripAttach) {
    ObjectState* best = nullptr;
    double best_d = kAttachHorizDist;
    for (ObjectState* obj : {&w.hold_obj, &w.grasp_obj}) {
      const double dh = (obj->pos.xy() - ee.xy()).norm();
      if (dh <= best_d && std::abs(ee.z - obj->grasp_point_z()) <= kAttachHeightGap) {
        best = obj;
        best_d = dh;
      }
    }
    if (best != nullptr) {
      best->attached = true;
      best->resting_table.reset();
      best->pos = ee;
    }
  }

  w.t += 1;
}

double desired_turn_yaw(const WorldState& w) {
  const TableGeom& other = w.scene.table(1 - w.active_table);
  return bearing_to(w.base, other.pose.x, other.pose.y);
}

Vec3 pre_place_target(const WorldState& w) {
  const double surface = table_surface(w, w.active_table);
  return {w.scene.tray.pose.x, w.scene.tray.pose.y, surface + kPrePlaceHover};
}

bool advance_stage(WorldState& w) {
  const TableGeom& tbl = w.scene.table(w.active_table);
  const double surface = tbl.height;
  const Vec3 ee = end_effector_world(w);

  switch (w.stage) {
    case 0: {
      const double dist = (Vec2{tbl.pose.x, tbl.pose.y} - Vec2{w.base.x, w.base.y}).norm();
      const double herr =
          std::abs(wrap_angle(bearing_to(w.base, tbl.pose.x, tbl.pose.y) - w.base.yaw));
      if (dist >= kWalkDistLo && dist <= kWalkDistHi && herr < kWalkHeadingTol) {
        w.stage = 1;
        return true;
      }
      return false;
    }
    case 1: {
      const Vec3 target = pre_place_target(w);
      const double dh = (ee.xy() - target.xy()).norm();
      if (dh <= kPrePlaceHorizTol && ee.z >= surface &&
          ee.z <= surface + kPrePlaceHeightBand) {
        w.stage = 2;
        return true;
      }
      return false;
    }
    case 2:
      if (object_in_tray(w, w.hold_obj)) {
        w.stage = 3;
        return true;
      }
      return false;
    case 3:
      if (w.grasp_obj.attached && w.grasp_obj.pos.z - surface >= kLiftDone) {
        w.stage = 4;
        return true;
      }
      return false;
    case 4:
      if (std::abs(wrap_angle(w.base.yaw - desired_turn_yaw(w))) < kTurnTol) {
        // cycle wrap: the carried object becomes the next hold object and the
        // placed one respawns as the grasp target on the opposite table
        w.cycle_count += 1;
        std::swap(w.hold_obj, w.grasp_obj);
        w.active_table = 1 - w.active_table;
        seat_tray_and_object(w, w.active_table, w.object_mode);
        w.stage = 0;
        return true;
      }
      return false;
    default:
      return false;
  }
}

StepResult check_termination(const WorldState& w, int horizon) {
  const double fe = w.scene.floor_half_extent;
  if (std::abs(w.base.x) > fe || std::abs(w.base.y) > fe) return StepResult::kViolation;
  for (const ObjectState* obj : {&w.hold_obj, &w.grasp_obj}) {
    if (!obj->attached && !obj->resting_table && obj->pos.z <= 1e-9)
      return StepResult::kViolation;
  }
  const Vec3 ee = end_effector_world(w);
  for (int id = 0; id < 2; ++id) {
    const TableGeom& tbl = w.scene.table(id);
    if (tbl.contains_xy(ee.xy()) && ee.z < tbl.height) return StepResult::kViolation;
  }
  if (w.cycle_count >= 1) return StepResult::kSuccess;
  if (w.t >= horizon) return StepResult::kTimeout;
  return StepResult::kRunning;
}

bool world_invariants_hold(const WorldState& w) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!(finite(w.base.x) && finite(w.base.y) && finite(w.base.yaw))) return false;
  if (w.stage < 0 || w.stage > 4) return false;
    if (w.joints.g < -1e-12 || w.joints.g > 1.0 + 1e-12) return false;
  if (std::abs(w.cmd.v_cmd[0]) > kMaxCmdVel + 1e-12 ||
      std::abs(w.cmd.v_cmd[1]) > kMaxCmdVel + 1e-12 ||
      std::abs(w.cmd.w_cmd) > kMaxCmdVel + 1e-12)
    return false;
  if (w.cmd.g_tgt < -1e-12 || w.cmd.g_tgt > 1.0 + 1e-12) return false;
  if (w.hold_obj.attached && w.grasp_obj.attached) return false;
  for (const ObjectState* obj : {&w.hold_obj, &w.grasp_obj}) {
    if (!finite(obj->pos.x) || !finite(obj->pos.y) || !finite(obj->pos.z)) return false;
    if (obj->attached && obj->resting_table) return false;
    if (obj->resting_table) {
      const double surface = w.scene.table(*obj->resting_table).height;
      if (std::abs(obj->pos.z - surface) > 1e-9) return false;
    }
  }
  return true;
}

}  // namespace viral::sim
