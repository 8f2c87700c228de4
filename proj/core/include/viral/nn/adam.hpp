#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "viral/nn/param.hpp"

namespace viral::nn {

struct AdamState {
  std::vector<double> m, v;
  int64_t t = 0;

  explicit AdamState(size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

// standard bias-corrected Adam
inline void adam_step(ParamVector& params, const ParamVector& grads, AdamState& st,
                      double lr, double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8) {
  st.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
  for (size_t i = 0; i < params.data.size(); ++i) {
    const double g = grads.data[i];
    st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * g;
    st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * g * g;
    const double mhat = st.m[i] / bc1;
    const double vhat = st.v[i] / bc2;
    params.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace viral::nn
