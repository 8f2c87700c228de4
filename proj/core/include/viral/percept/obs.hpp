#pragma once

#include <array>

#include "viral/sim/types.hpp"

namespace viral::percept {

inline constexpr int kPrivilegedDim = 50;
inline constexpr int kStudentStateDim = 17;

using PrivilegedObs = std::array<double, kPrivilegedDim>;
using StudentStateObs = std::array<double, kStudentStateDim>;

// full-state teacher observation; relative quantities in the robot body frame
PrivilegedObs build_privileged(const sim::WorldState& w);

// deployable proprioception only; reads no object, tray, or table state
StudentStateObs build_student_state(const sim::WorldState& w);

}  // namespace viral::percept
