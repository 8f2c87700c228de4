#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "viral/nn/param.hpp"
#include "viral/rng.hpp"

namespace viral::nn {

// central finite differences on a random coordinate subset; compares against
// the provided analytic gradient and reports the max relative error
inline double finite_diff_check(
    const std::function<double(const ParamVector&)>& loss_fn,
    const ParamVector& params, const ParamVector& analytic_grad, Rng& rng,
    int n_coords = 64, double h = 1e-5) {
  ParamVector work = params;
  double max_rel = 0.0;
  const size_t n = params.size();
  for (int c = 0; c < n_coords; ++c) {
    const size_t i = n_coords >= static_cast<int>(n)
                         ? static_cast<size_t>(c) % n
                         : rng.uniform_index(n);
    const double saved = work.data[i];
    work.data[i] = saved + h;
    const double fp = loss_fn(work);
    work.data[i] = saved - h;
    const double fm = loss_fn(work);
    work.data[i] = saved;
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = analytic_grad.data[i];
    const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
    max_rel = std::max(max_rel, std::abs(numeric - analytic) / scale);
  }
  return max_rel;
}

}  // namespace viral::nn
