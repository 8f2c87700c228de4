#pragma once

#include <array>
#include <string>
#include <vector>

#include "viral/nn/layers.hpp"

namespace viral::nn {

struct MLPSpec {
  int input = 0;
  std::vector<int> hidden;
  int output = 0;
};

// ELU between layers, linear output
struct MLP {
  MLPSpec spec;
  std::vector<Linear> layers;

  struct Cache {
    std::vector<std::vector<double>> acts;  // input of each layer
    std::vector<std::vector<double>> pre;   // pre-activation of hidden layers
  };

  void build(ParamVector& p, const std::string& name, const MLPSpec& s);
  void init(ParamVector& p, Rng& rng, double last_scale = 1.0) const;
  void forward(const ParamVector& p, const double* x, double* y,
               Cache* cache = nullptr) const;
  void backward(const ParamVector& p, ParamVector& g, const Cache& cache,
                const double* dy, double* dx = nullptr) const;
};

struct EncoderSpec {
  int image_size = 64;
  std::array<int, 3> channels{8, 16, 32};
  int feature_dim = 128;
};

// 3 stride-2 convs -> flatten -> linear features; input is channel-major
struct ConvEncoder {
  EncoderSpec spec;
  Conv2d c1, c2, c3;
  Linear fc;

  struct Cache {
    std::vector<double> in, p1, a1, p2, a2, p3, a3;
  };

  void build(ParamVector& p, const std::string& name, const EncoderSpec& s);
  void init(ParamVector& p, Rng& rng) const;
  void forward(const ParamVector& p, const double* img, double* feat,
               Cache* cache = nullptr) const;
  void backward(const ParamVector& p, ParamVector& g, const Cache& cache,
                const double* dfeat) const;
};

// cheap baseline: 8x8 patch means per channel -> linear features
struct PatchMeanEncoder {
  int image_size = 64, patch = 8, feature_dim = 128;
  Linear fc;

  struct Cache {
    std::vector<double> pooled;
  };

  void build(ParamVector& p, const std::string& name, int feature_dim_);
  void init(ParamVector& p, Rng& rng) const;
  void forward(const ParamVector& p, const double* img, double* feat,
               Cache* cache = nullptr) const;
  void backward(const ParamVector& p, ParamVector& g, const Cache& cache,
                const double* dfeat) const;

  int pooled_dim() const { return 3 * (image_size / patch) * (image_size / patch); }
};

// ---- squashed Gaussian action math ----

inline constexpr double kLogStdInit = -0.6931471805599453;  // ln 0.5

// stable log(1 - tanh(z)^2) = 2 (log 2 - |z| - log(1 + exp(-2|z|)))
inline double log_one_minus_tanh_sq(double z) {
  const double a = std::abs(z);
  return 2.0 * (0.6931471805599453 - a - std::log1p(std::exp(-2.0 * a)));
}

// diagonal Gaussian sample z squashed through tanh and scaled per dimension
double squashed_log_prob(const double* mu, const double* log_std, const double* z,
                         const double* scale, int dim);
double gaussian_entropy(const double* log_std, int dim);

struct GaussianPolicy {
  MLP mean;
  size_t log_std_off = 0;
  int action_dim = 0;

  void build(ParamVector& p, const std::string& name, const MLPSpec& s);
  void init(ParamVector& p, Rng& rng) const;
  void forward_mean(const ParamVector& p, const double* obs, double* mu,
                    MLP::Cache* cache = nullptr) const;
};

}  // namespace viral::nn
