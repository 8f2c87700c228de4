#pragma once

#include <vector>

#include "viral/rng.hpp"

namespace viral::sysid {

inline constexpr double kBaseInertia = 0.01;  // fixed; armature adds to it
inline constexpr double kPrimitiveDt = 0.002;
inline constexpr double kPrimitiveDuration = 6.0;
inline constexpr double kPrimitivePeriod = 1.0;

struct FingerParams {
  double armature = 0.001;   // kg m^2
  double stiffness = 1.0;    // N m / rad
  double damping = 0.1;      // N m s / rad

  bool valid() const {
    return armature >= 0.0 && stiffness > 0.0 && damping >= 0.0;
  }
};

// grasp-release primitive: square wave between 1 and 0 rad, closure first
struct Primitive {
  double dt = kPrimitiveDt;
  double duration = kPrimitiveDuration;
  double period = kPrimitivePeriod;

  int length() const { return static_cast<int>(duration / dt + 0.5); }
  double target(int step) const {
    const double t = step * dt;
    const int half = static_cast<int>(t / (period * 0.5));
    return (half % 2 == 0) ? 1.0 : 0.0;
  }
};

struct Trajectory {
  std::vector<double> q;
  double dt = kPrimitiveDt;
};

struct DivergedError {
  int step = 0;
};

// semi-implicit Euler of (I0 + a) qdd = k (q_tgt - q) - d qd, q(0)=qd(0)=0;
// returns false and sets diverged_step on non-finite state
bool simulate_finger(const FingerParams& params, const Primitive& primitive,
                     Trajectory& out, int* diverged_step = nullptr);

// synthetic hardware trace: hidden-parameter simulation plus seeded Gaussian
// measurement noise
Trajectory generate_real(const FingerParams& hidden, double noise_std,
                         const Primitive& primitive, uint64_t seed);

double rmse(const Trajectory& a, const Trajectory& b);

struct FitResult {
  FingerParams params;
  double rmse_before = 0.0;
  double rmse_after = 0.0;
  int evaluations = 0;
};

// derivative-free coordinate descent in log-parameter space; multiplicative
// steps start at x2 and shrink to x1.05 under a fixed evaluation budget
FitResult fit(const FingerParams& initial, const Trajectory& real,
              const Primitive& primitive, int eval_budget = 200);

}  // namespace viral::sysid
