#include "viral/sysid/finger.hpp"

#include <cmath>
#include <limits>

#include "viral/errors.hpp"

namespace viral::sysid {

bool simulate_finger(const FingerParams& params, const Primitive& primitive,
                     Trajectory& out, int* diverged_step) {
  const int n = primitive.length();
  out.q.assign(n, 0.0);
  out.dt = primitive.dt;
  const double inertia = kBaseInertia + params.armature;
  double q = 0.0, qd = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = primitive.target(i);
    const double qdd = (params.stiffness * (u - q) - params.damping * qd) / inertia;
    qd += primitive.dt * qdd;
    q += primitive.dt * qd;
    if (!std::isfinite(q) || !std::isfinite(qd)) {
      if (diverged_step != nullptr) *diverged_step = i;
      return false;
    }
    out.q[i] = q;
  }
  return true;
}

Trajectory generate_real(const FingerParams& hidden, double noise_std,
                         const Primitive& primitive, uint64_t seed) {
  Trajectory traj;
  int step = 0;
  if (!simulate_finger(hidden, primitive, traj, &step))
    throw NumericError("generate_real: hidden parameters diverge at step " +
                       std::to_string(step));
  Rng rng(seed, 0x5f1d);
  for (double& v : traj.q) v += rng.normal(0.0, noise_std);
  return traj;
}

double rmse(const Trajectory& a, const Trajectory& b) {
  if (a.q.size() != b.q.size())
    throw NumericError("rmse: trajectory length mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < a.q.size(); ++i) {
    const double d = a.q[i] - b.q[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.q.size()));
}

namespace {

double score(const FingerParams& p, const Trajectory& real,
             const Primitive& primitive, int& evals) {
  ++evals;
  Trajectory sim;
  if (!simulate_finger(p, primitive, sim, nullptr))
    return std::numeric_limits<double>::infinity();
  return rmse(sim, real);
}

}  // namespace

FitResult fit(const FingerParams& initial, const Trajectory& real,
              const Primitive& primitive, int eval_budget) {
  if (static_cast<int>(real.q.size()) != primitive.length())
    throw NumericError("fit: real trajectory does not match the primitive length");

  FitResult result;
  result.params = initial;
  int evals = 0;
  double best = score(initial, real, primitive, evals);
  result.rmse_before = best;
  result.rmse_after = best;
  if (eval_budget <= 0) return result;

  double lp[3] = {std::log(std::max(initial.armature, 1e-9)),
                  std::log(initial.stiffness), std::log(std::max(initial.damping, 1e-9))};
  auto to_params = [](const double* v) {
    return FingerParams{std::exp(v[0]), std::exp(v[1]), std::exp(v[2])};
  };

  double step = std::log(2.0);
  const double step_min = std::log(1.05);
  while (evals < eval_budget && step >= step_min - 1e-12) {
    bool improved = false;
    for (int c = 0; c < 3 && evals < eval_budget; ++c) {
      for (double dir : {1.0, -1.0}) {
        if (evals >= eval_budget) break;
        double cand[3] = {lp[0], lp[1], lp[2]};
        cand[c] += dir * step;
        const double sc = score(to_params(cand), real, primitive, evals);
        if (sc < best) {
          best = sc;
          lp[c] = cand[c];
          improved = true;
          break;
        }
      }
    }
    if (!improved) {
      if (step <= step_min + 1e-12) break;
      step = std::max(step * 0.5, step_min);
    }
  }

  result.params = to_params(lp);
  result.rmse_after = best;
  result.evaluations = evals;
  return result;
}

}  // namespace viral::sysid
