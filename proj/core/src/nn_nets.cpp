#include "viral/nn/nets.hpp"

#include "viral/errors.hpp"

namespace viral::nn {

void MLP::build(ParamVector& p, const std::string& name, const MLPSpec& s) {
  if (s.input < 1 || s.output < 1) throw ConfigError("MLP: dims must be >= 1");
  for (int h : s.hidden)
    if (h < 1) throw ConfigError("MLP: hidden widths must be >= 1");
  spec = s;
  layers.clear();
  int prev = s.input;
  for (size_t i = 0; i < s.hidden.size(); ++i) {
    Linear l;
    l.build(p, name + ".l" + std::to_string(i), prev, s.hidden[i]);
    layers.push_back(l);
    prev = s.hidden[i];
  }
  Linear out;
  out.build(p, name + ".out", prev, s.output);
  layers.push_back(out);
}

void MLP::init(ParamVector& p, Rng& rng, double last_scale) const {
  for (size_t i = 0; i < layers.size(); ++i)
    layers[i].init(p, rng, i + 1 == layers.size() ? last_scale : 1.0);
}

void MLP::forward(const ParamVector& p, const double* x, double* y,
                  Cache* cache) const {
  const size_t n_hidden = layers.size() - 1;
  std::vector<double> cur(x, x + spec.input);
  if (cache != nullptr) {
    cache->acts.assign(layers.size(), {});
    cache->pre.assign(n_hidden, {});
  }
  for (size_t i = 0; i < n_hidden; ++i) {
    if (cache != nullptr) cache->acts[i] = cur;
    std::vector<double> pre(layers[i].out);
    layers[i].forward(p, cur.data(), pre.data());
    if (cache != nullptr) cache->pre[i] = pre;
    cur.resize(pre.size());
    for (size_t k = 0; k < pre.size(); ++k) cur[k] = elu(pre[k]);
  }
  if (cache != nullptr) cache->acts[n_hidden] = cur;
  layers.back().forward(p, cur.data(), y);
}

void MLP::backward(const ParamVector& p, ParamVector& g, const Cache& cache,
                   const double* dy, double* dx) const {
  const size_t n_hidden = layers.size() - 1;
  std::vector<double> grad(dy, dy + spec.output);
  for (size_t li = layers.size(); li-- > 0;) {
    const Linear& l = layers[li];
    std::vector<double> din(l.in);
    l.backward(p, g, cache.acts[li].data(), grad.data(), din.data());
    if (li == 0) {
      if (dx != nullptr)
        for (int i = 0; i < l.in; ++i) dx[i] = din[i];
      return;
    }
    // through the ELU that produced acts[li]
    const std::vector<double>& pre = cache.pre[li - 1];
    grad.resize(din.size());
    for (size_t k = 0; k < din.size(); ++k) grad[k] = din[k] * elu_grad(pre[k]);
  }
  (void)n_hidden;
}

void ConvEncoder::build(ParamVector& p, const std::string& name,
                        const EncoderSpec& s) {
  spec = s;
  c1.build(p, name + ".c1", 3, s.channels[0], s.image_size, s.image_size);
  c2.build(p, name + ".c2", s.channels[0], s.channels[1], c1.h_out, c1.w_out);
  c3.build(p, name + ".c3", s.channels[1], s.channels[2], c2.h_out, c2.w_out);
  fc.build(p, name + ".fc", c3.out_size(), s.feature_dim);
}

void ConvEncoder::init(ParamVector& p, Rng& rng) const {
  c1.init(p, rng);
  c2.init(p, rng);
  c3.init(p, rng);
  fc.init(p, rng);
}

void ConvEncoder::forward(const ParamVector& p, const double* img, double* feat,
                          Cache* cache) const {
  std::vector<double> p1(c1.out_size()), a1(c1.out_size());
  std::vector<double> p2(c2.out_size()), a2(c2.out_size());
  std::vector<double> p3(c3.out_size()), a3(c3.out_size());
  c1.forward(p, img, p1.data());
  for (size_t i = 0; i < p1.size(); ++i) a1[i] = elu(p1[i]);
  c2.forward(p, a1.data(), p2.data());
  for (size_t i = 0; i < p2.size(); ++i) a2[i] = elu(p2[i]);
  c3.forward(p, a2.data(), p3.data());
  for (size_t i = 0; i < p3.size(); ++i) a3[i] = elu(p3[i]);
  fc.forward(p, a3.data(), feat);
  if (cache != nullptr) {
    cache->in.assign(img, img + c1.in_size());
    cache->p1 = std::move(p1);
    cache->a1 = std::move(a1);
    cache->p2 = std::move(p2);
    cache->a2 = std::move(a2);
    cache->p3 = std::move(p3);
    cache->a3 = std::move(a3);
  }
}

void ConvEncoder::backward(const ParamVector& p, ParamVector& g,
                           const Cache& cache, const double* dfeat) const {
  std::vector<double> da3(c3.out_size());
  fc.backward(p, g, cache.a3.data(), dfeat, da3.data());
  std::vector<double> dp3(c3.out_size());
  for (size_t i = 0; i < da3.size(); ++i) dp3[i] = da3[i] * elu_grad(cache.p3[i]);
  std::vector<double> da2(c2.out_size());
  c3.backward(p, g, cache.a2.data(), dp3.data(), da2.data());
  std::vector<double> dp2(c2.out_size());
  for (size_t i = 0; i < da2.size(); ++i) dp2[i] = da2[i] * elu_grad(cache.p2[i]);
  std::vector<double> da1(c1.out_size());
  c2.backward(p, g, cache.a1.data(), dp2.data(), da1.data());
  std::vector<double> dp1(c1.out_size());
  for (size_t i = 0; i < da1.size(); ++i) dp1[i] = da1[i] * elu_grad(cache.p1[i]);
  c1.backward(p, g, cache.in.data(), dp1.data(), nullptr);
}

void PatchMeanEncoder::build(ParamVector& p, const std::string& name,
                             int feature_dim_) {
  feature_dim = feature_dim_;
  fc.build(p, name + ".fc", pooled_dim(), feature_dim);
}

void PatchMeanEncoder::init(ParamVector& p, Rng& rng) const { fc.init(p, rng); }

void PatchMeanEncoder::forward(const ParamVector& p, const double* img, double* feat,
                               Cache* cache) const {
  const int grid = image_size / patch;
  std::vector<double> pooled(pooled_dim(), 0.0);
  const double inv = 1.0 / (patch * patch);
  for (int ch = 0; ch < 3; ++ch) {
    const double* map = img + static_cast<size_t>(ch) * image_size * image_size;
    for (int gy = 0; gy < grid; ++gy)
      for (int gx = 0; gx < grid; ++gx) {
        double acc = 0.0;
        for (int y = 0; y < patch; ++y)
          for (int x = 0; x < patch; ++x)
            acc += map[(gy * patch + y) * image_size + gx * patch + x];
        pooled[(ch * grid + gy) * grid + gx] = acc * inv;
      }
  }
  fc.forward(p, pooled.data(), feat);
  if (cache != nullptr) cache->pooled = std::move(pooled);
}

void PatchMeanEncoder::backward(const ParamVector& p, ParamVector& g,
                                const Cache& cache, const double* dfeat) const {
  fc.backward(p, g, cache.pooled.data(), dfeat, nullptr);
}

double squashed_log_prob(const double* mu, const double* log_std, const double* z,
                         const double* scale, int dim) {
  double lp = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double std = std::exp(log_std[i]);
    const double u = (z[i] - mu[i]) / std;
    lp += -0.5 * u * u - log_std[i] - 0.9189385332046727;  // 0.5 log(2 pi)
    lp -= std::log(scale[i]) + log_one_minus_tanh_sq(z[i]);
  }
  return lp;
}

double gaussian_entropy(const double* log_std, int dim) {
  double ent = 0.0;
  for (int i = 0; i < dim; ++i) ent += log_std[i] + 1.4189385332046727;
  return ent;
}

void GaussianPolicy::build(ParamVector& p, const std::string& name,
                           const MLPSpec& s) {
  action_dim = s.output;
  mean.build(p, name + ".mean", s);
  log_std_off = p.allocate(name + ".log_std", s.output);
}

void GaussianPolicy::init(ParamVector& p, Rng& rng) const {
  mean.init(p, rng, 0.01);
  double* ls = p.at(log_std_off);
  for (int i = 0; i < action_dim; ++i) ls[i] = kLogStdInit;
}

void GaussianPolicy::forward_mean(const ParamVector& p, const double* obs,
                                  double* mu, MLP::Cache* cache) const {
  mean.forward(p, obs, mu, cache);
}

}  // namespace viral::nn
