#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "viral/nn/param.hpp"
#include "viral/rng.hpp"

namespace viral::nn {

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }
inline double elu_grad(double pre) { return pre > 0.0 ? 1.0 : std::exp(pre); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Linear {
  int in = 0, out = 0;
  size_t w_off = 0, b_off = 0;

  void build(ParamVector& p, const std::string& name, int in_dim, int out_dim);
  void init(ParamVector& p, Rng& rng, double scale = 1.0) const;
  void forward(const ParamVector& p, const double* x, double* y) const;
  void backward(const ParamVector& p, ParamVector& g, const double* x,
                const double* dy, double* dx) const;
};

// 3x3 convolution, stride 2, padding 1, channel-major layout [c][h][w]
struct Conv2d {
  int cin = 0, cout = 0, h_in = 0, w_in = 0, h_out = 0, w_out = 0;
  size_t w_off = 0, b_off = 0;

  void build(ParamVector& p, const std::string& name, int cin_, int cout_,
             int h, int w);
  void init(ParamVector& p, Rng& rng) const;
  void forward(const ParamVector& p, const double* x, double* y) const;
  void backward(const ParamVector& p, ParamVector& g, const double* x,
                const double* dy, double* dx) const;

  int out_size() const { return cout * h_out * w_out; }
  int in_size() const { return cin * h_in * w_in; }
};

// gated recurrent cell; hidden state reset to zero on episode reset
struct GRUCell {
  int in = 0, hidden = 0;
  size_t wz_off = 0, uz_off = 0, bz_off = 0;
  size_t wr_off = 0, ur_off = 0, br_off = 0;
  size_t wn_off = 0, un_off = 0, bn_off = 0;

  struct StepCache {
    std::vector<double> x, h_prev, z, r, n, un_h;
  };

  void build(ParamVector& p, const std::string& name, int in_dim, int hidden_dim);
  void init(ParamVector& p, Rng& rng) const;
  void forward(const ParamVector& p, const double* x, const double* h_prev,
               double* h_out, StepCache* cache) const;
  // accumulates dh_prev and dx contributions; dx may be null
  void backward(const ParamVector& p, ParamVector& g, const StepCache& cache,
                const double* dh, double* dx, double* dh_prev) const;
};

}  // namespace viral::nn
