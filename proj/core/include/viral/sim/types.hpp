#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "viral/geometry.hpp"
#include "viral/rng.hpp"

namespace viral::sim {

inline constexpr double kDt = 0.02;          // control step, 50 Hz
inline constexpr int kDefaultHorizon = 1500; // 30 s
inline constexpr double kTauVel = 0.2;       // base velocity tracking constant
inline constexpr double kTauJoint = 0.1;     // joint target tracking constant

// arm geometry: two links in the vertical plane, shoulder 0.1 m ahead of the
// base axis and 1.0 m above the floor
inline constexpr double kArmBaseForward = 0.1;
inline constexpr double kArmBaseHeight = 1.0;
inline constexpr double kLink1 = 0.30;
inline constexpr double kLink2 = 0.25;

inline constexpr double kMaxArmRate = 3.0;   // rad/s
inline constexpr double kMaxGripRate = 2.0;  // 1/s
inline constexpr double kMaxCmdVel = 0.5;    // m/s and rad/s
inline constexpr double kGripAttach = 0.7;
inline constexpr double kGripDetach = 0.3;
inline constexpr double kAttachHorizDist = 0.05;
inline constexpr double kAttachHeightGap = 0.04;

struct JointState {
  std::array<double, 2> q_arm{};   // rad
  std::array<double, 2> dq_arm{};  // rad/s
  double g = 0.0;                  // gripper closure in [0, 1]
  double dg = 0.0;                 // closure rate
};

// accumulated command for the underlying body-tracking layer
struct CommandState {
  std::array<double, 2> v_cmd{};      // body-frame m/s, |.| <= 0.5
  double w_cmd = 0.0;                 // rad/s, |.| <= 0.5
  std::array<double, 2> q_arm_tgt{};  // rad, [-pi, pi]
  double g_tgt = 0.0;                 // [0, 1]
};

// per-step action increments; the policy emits these through tanh scaling
struct ActionDelta {
  std::array<double, 2> dv{};      // |.| <= 0.1
  double dw = 0.0;                 // |.| <= 0.1
  std::array<double, 2> dq_arm{};  // |.| <= 0.05
  double dg = 0.0;                 // |.| <= 0.1

  static constexpr int kDim = 6;
  std::array<double, kDim> flat() const {
    return {dv[0], dv[1], dw, dq_arm[0], dq_arm[1], dg};
  }
  static ActionDelta from_flat(const std::array<double, kDim>& f) {
    return {{f[0], f[1]}, f[2], {f[3], f[4]}, f[5]};
  }
  static std::array<double, kDim> bounds() {
    return {0.1, 0.1, 0.1, 0.05, 0.05, 0.1};
  }
};

enum class Shape : int32_t {
  kCylinder = 0,
  kBox,
  kCapsule,
  kDisc,
  kBar,
  kCone,
  kRing,
  kBlock,
  kPeg,
  kPuck,
};
inline constexpr int kNumShapes = 10;

const char* shape_name(Shape s);

// footprint radius used for tray fit and rendering, [0.03, 0.06]
double shape_grasp_radius(Shape s);
// height of the grasp point above the resting position; shapes differ enough
// that a policy must read the observed grasp height to generalize
double shape_grasp_height(Shape s);

struct ObjectState {
  Vec3 pos{};                // when resting, z is the table surface height
  Shape shape_id = Shape::kCylinder;
  double grasp_radius = 0.03;
  bool attached = false;
  std::optional<int> resting_table;  // 0 = table_a, 1 = table_b

  // graspable height for a resting object; an attached object tracks the
  // end-effector position exactly
  double grasp_point_z() const {
    return attached ? pos.z : pos.z + shape_grasp_height(shape_id);
  }
};

struct TableGeom {
  Pose2 pose{};
  double width = 1.5;       // along local y
  double depth = 0.72;      // along local x
  double height = 0.66;     // top surface above floor
  double thickness = 0.038; // slab, rendering only

  bool contains_xy(const Vec2& p) const {
    const Vec2 local = to_body(pose, p);
    return std::abs(local.x) <= depth * 0.5 && std::abs(local.y) <= width * 0.5;
  }
};

struct TrayGeom {
  Pose2 pose{};
  double radius = 0.12;
};

struct SceneLayout {
  TableGeom table_a{};
  TableGeom table_b{};
  TrayGeom tray{};
  double floor_half_extent = 3.5;

  const TableGeom& table(int id) const { return id == 0 ? table_a : table_b; }
};

// sampling ranges for reset_nominal; defaults match the training
// randomization table
struct SceneRanges {
  double height_lo = 0.65, height_hi = 0.6775;
  double depth_lo = 0.7, depth_hi = 0.75;
  double width_lo = 1.4, width_hi = 1.6;
  double thickness_lo = 0.035, thickness_hi = 0.04;
  double spawn_dist_lo = 1.2, spawn_dist_hi = 1.8;
  double spawn_face_err = 0.3;

  bool valid() const {
    return height_lo >= 0.65 - 1e-12 && height_hi <= 0.6775 + 1e-12 &&
           depth_lo >= 0.7 - 1e-12 && depth_hi <= 0.75 + 1e-12 &&
           width_lo >= 1.4 - 1e-12 && width_hi <= 1.6 + 1e-12 &&
           thickness_lo >= 0.035 - 1e-12 && thickness_hi <= 0.04 + 1e-12 &&
           height_lo <= height_hi && depth_lo <= depth_hi &&
           width_lo <= width_hi && thickness_lo <= thickness_hi &&
           spawn_dist_lo <= spawn_dist_hi && spawn_dist_lo > 0.0;
  }
};

enum class ObjectMode { kSingle, kMulti };

struct WorldState {
  Pose2 base{};
  std::array<double, 3> base_vel{};  // body-frame vx, vy and yaw rate
  JointState joints{};
  CommandState cmd{};
  ActionDelta last_delta{};
  ObjectState hold_obj{};   // carried at reset, to be placed in the tray
  ObjectState grasp_obj{};  // rests on the active table, to be picked up
  SceneLayout scene{};
  int stage = 0;            // 0 walk, 1 pre-place, 2 place, 3 grasp, 4 turn
  int cycle_count = 0;
  int t = 0;
  int active_table = 0;     // table currently holding tray + grasp object
  Vec3 lift_goal{};         // fixed target above the grasp object spawn
  ObjectMode object_mode = ObjectMode::kSingle;
  Rng rng{};
};

struct DemoSnapshot {
  WorldState state{};  // rng stream excluded from serialization
  int demo_id = 0;
  int source_step = 0;
};

enum class StepResult { kRunning, kSuccess, kViolation, kTimeout };

}  // namespace viral::sim
