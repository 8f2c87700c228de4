#include "viral/nn/layers.hpp"

namespace viral::nn {

namespace {

double xavier_limit(int fan_in, int fan_out) {
  return std::sqrt(6.0 / (fan_in + fan_out));
}

}  // namespace

void Linear::build(ParamVector& p, const std::string& name, int in_dim, int out_dim) {
  in = in_dim;
  out = out_dim;
  w_off = p.allocate(name + ".w", static_cast<size_t>(in) * out);
  b_off = p.allocate(name + ".b", out);
}

void Linear::init(ParamVector& p, Rng& rng, double scale) const {
  const double lim = xavier_limit(in, out) * scale;
  double* w = p.at(w_off);
  for (int i = 0; i < in * out; ++i) w[i] = rng.uniform(-lim, lim);
  double* b = p.at(b_off);
  for (int i = 0; i < out; ++i) b[i] = 0.0;
}

void Linear::forward(const ParamVector& p, const double* x, double* y) const {
  const double* w = p.at(w_off);
  const double* b = p.at(b_off);
  for (int o = 0; o < out; ++o) {
    double acc = b[o];
    const double* row = w + static_cast<size_t>(o) * in;
    for (int i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

void Linear::backward(const ParamVector& p, ParamVector& g, const double* x,
                      const double* dy, double* dx) const {
  const double* w = p.at(w_off);
  double* gw = g.at(w_off);
  double* gb = g.at(b_off);
  if (dx != nullptr)
    for (int i = 0; i < in; ++i) dx[i] = 0.0;
  for (int o = 0; o < out; ++o) {
    const double d = dy[o];
    gb[o] += d;
    const double* row = w + static_cast<size_t>(o) * in;
    double* grow = gw + static_cast<size_t>(o) * in;
    for (int i = 0; i < in; ++i) grow[i] += d * x[i];
    if (dx != nullptr)
      for (int i = 0; i < in; ++i) dx[i] += row[i] * d;
  }
}

void Conv2d::build(ParamVector& p, const std::string& name, int cin_, int cout_,
                   int h, int w) {
  cin = cin_;
  cout = cout_;
  h_in = h;
  w_in = w;
  h_out = (h + 2 - 3) / 2 + 1;
  w_out = (w + 2 - 3) / 2 + 1;
  w_off = p.allocate(name + ".w", static_cast<size_t>(cout) * cin * 9);
  b_off = p.allocate(name + ".b", cout);
}

void Conv2d::init(ParamVector& p, Rng& rng) const {
  const double lim = xavier_limit(cin * 9, cout * 9);
  double* w = p.at(w_off);
  for (int i = 0; i < cout * cin * 9; ++i) w[i] = rng.uniform(-lim, lim);
  double* b = p.at(b_off);
  for (int i = 0; i < cout; ++i) b[i] = 0.0;
}

void Conv2d::forward(const ParamVector& p, const double* x, double* y) const {
  const double* w = p.at(w_off);
  const double* b = p.at(b_off);
  for (int co = 0; co < cout; ++co) {
    double* ymap = y + static_cast<size_t>(co) * h_out * w_out;
    for (int oy = 0; oy < h_out; ++oy)
      for (int ox = 0; ox < w_out; ++ox) ymap[oy * w_out + ox] = b[co];
    for (int ci = 0; ci < cin; ++ci) {
      const double* xmap = x + static_cast<size_t>(ci) * h_in * w_in;
      const double* ker = w + (static_cast<size_t>(co) * cin + ci) * 9;
      for (int oy = 0; oy < h_out; ++oy) {
        const int iy0 = oy * 2 - 1;
        for (int ox = 0; ox < w_out; ++ox) {
          const int ix0 = ox * 2 - 1;
          double acc = 0.0;
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = iy0 + ky;
            if (iy < 0 || iy >= h_in) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = ix0 + kx;
              if (ix < 0 || ix >= w_in) continue;
              acc += ker[ky * 3 + kx] * xmap[iy * w_in + ix];
            }
          }
          ymap[oy * w_out + ox] += acc;
        }
      }
    }
  }
}

void Conv2d::backward(const ParamVector& p, ParamVector& g, const double* x,
                      const double* dy, double* dx) const {
  const double* w = p.at(w_off);
  double* gw = g.at(w_off);
  double* gb = g.at(b_off);
  if (dx != nullptr)
    for (int i = 0; i < in_size(); ++i) dx[i] = 0.0;
  for (int co = 0; co < cout; ++co) {
    const double* dmap = dy + static_cast<size_t>(co) * h_out * w_out;
    for (int oy = 0; oy < h_out; ++oy)
      for (int ox = 0; ox < w_out; ++ox) gb[co] += dmap[oy * w_out + ox];
    for (int ci = 0; ci < cin; ++ci) {
      const double* xmap = x + static_cast<size_t>(ci) * h_in * w_in;
      const double* ker = w + (static_cast<size_t>(co) * cin + ci) * 9;
      double* gker = gw + (static_cast<size_t>(co) * cin + ci) * 9;
      double* dxmap = dx == nullptr ? nullptr : dx + static_cast<size_t>(ci) * h_in * w_in;
      for (int oy = 0; oy < h_out; ++oy) {
        const int iy0 = oy * 2 - 1;
        for (int ox = 0; ox < w_out; ++ox) {
          const int ix0 = ox * 2 - 1;
          const double d = dmap[oy * w_out + ox];
          if (d == 0.0) continue;
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = iy0 + ky;
            if (iy < 0 || iy >= h_in) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = ix0 + kx;
              if (ix < 0 || ix >= w_in) continue;
              gker[ky * 3 + kx] += d * xmap[iy * w_in + ix];
              if (dxmap != nullptr) dxmap[iy * w_in + ix] += d * ker[ky * 3 + kx];
            }
          }
        }
      }
    }
  }
}

void GRUCell::build(ParamVector& p, const std::string& name, int in_dim,
                    int hidden_dim) {
  in = in_dim;
  hidden = hidden_dim;
  const size_t ih = static_cast<size_t>(in) * hidden;
  const size_t hh = static_cast<size_t>(hidden) * hidden;
  wz_off = p.allocate(name + ".wz", ih);
  uz_off = p.allocate(name + ".uz", hh);
  bz_off = p.allocate(name + ".bz", hidden);
  wr_off = p.allocate(name + ".wr", ih);
  ur_off = p.allocate(name + ".ur", hh);
  br_off = p.allocate(name + ".br", hidden);
  wn_off = p.allocate(name + ".wn", ih);
  un_off = p.allocate(name + ".un", hh);
  bn_off = p.allocate(name + ".bn", hidden);
}

void GRUCell::init(ParamVector& p, Rng& rng) const {
  const double lim_w = xavier_limit(in, hidden);
  const double lim_u = xavier_limit(hidden, hidden);
  for (size_t off : {wz_off, wr_off, wn_off}) {
    double* w = p.at(off);
    for (int i = 0; i < in * hidden; ++i) w[i] = rng.uniform(-lim_w, lim_w);
  }
  for (size_t off : {uz_off, ur_off, un_off}) {
    double* u = p.at(off);
    for (int i = 0; i < hidden * hidden; ++i) u[i] = rng.uniform(-lim_u, lim_u);
  }
  for (size_t off : {bz_off, br_off, bn_off}) {
    double* b = p.at(off);
    for (int i = 0; i < hidden; ++i) b[i] = 0.0;
  }
}

namespace {

void matvec_acc(const double* m, const double* v, int rows, int cols, double* out) {
  for (int r = 0; r < rows; ++r) {
    double acc = 0.0;
    const double* row = m + static_cast<size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) acc += row[c] * v[c];
    out[r] += acc;
  }
}

void matvec_t_acc(const double* m, const double* v, int rows, int cols, double* out) {
  for (int r = 0; r < rows; ++r) {
    const double d = v[r];
    if (d == 0.0) continue;
    const double* row = m + static_cast<size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) out[c] += row[c] * d;
  }
}

void outer_acc(double* m, const double* dy, const double* x, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double d = dy[r];
    if (d == 0.0) continue;
    double* row = m + static_cast<size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) row[c] += d * x[c];
  }
}

}  // namespace

void GRUCell::forward(const ParamVector& p, const double* x, const double* h_prev,
                      double* h_out, StepCache* cache) const {
  std::vector<double> az(hidden, 0.0), ar(hidden, 0.0), an(hidden, 0.0),
      un_h(hidden, 0.0);
  for (int i = 0; i < hidden; ++i) {
    az[i] = p.at(bz_off)[i];
    ar[i] = p.at(br_off)[i];
    an[i] = p.at(bn_off)[i];
  }
  matvec_acc(p.at(wz_off), x, hidden, in, az.data());
  matvec_acc(p.at(uz_off), h_prev, hidden, hidden, az.data());
  matvec_acc(p.at(wr_off), x, hidden, in, ar.data());
  matvec_acc(p.at(ur_off), h_prev, hidden, hidden, ar.data());
  matvec_acc(p.at(un_off), h_prev, hidden, hidden, un_h.data());
  matvec_acc(p.at(wn_off), x, hidden, in, an.data());

  std::vector<double> z(hidden), r(hidden), n(hidden);
  for (int i = 0; i < hidden; ++i) {
    z[i] = sigmoid(az[i]);
    r[i] = sigmoid(ar[i]);
    n[i] = std::tanh(an[i] + r[i] * un_h[i]);
    h_out[i] = (1.0 - z[i]) * n[i] + z[i] * h_prev[i];
  }
  if (cache != nullptr) {
    cache->x.assign(x, x + in);
    cache->h_prev.assign(h_prev, h_prev + hidden);
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->n = std::move(n);
    cache->un_h = std::move(un_h);
  }
}

void GRUCell::backward(const ParamVector& p, ParamVector& g, const StepCache& cache,
                       const double* dh, double* dx, double* dh_prev) const {
  std::vector<double> daz(hidden), dar(hidden), dan(hidden), dan_r(hidden);
  for (int i = 0; i < hidden; ++i) {
    const double z = cache.z[i], r = cache.r[i], n = cache.n[i];
    const double dn = dh[i] * (1.0 - z);
    const double dz = dh[i] * (cache.h_prev[i] - n);
    dan[i] = dn * (1.0 - n * n);
    daz[i] = dz * z * (1.0 - z);
    const double dr = dan[i] * cache.un_h[i];
    dar[i] = dr * r * (1.0 - r);
    dan_r[i] = dan[i] * r;
    dh_prev[i] += dh[i] * z;
  }

  outer_acc(g.at(wz_off), daz.data(), cache.x.data(), hidden, in);
  outer_acc(g.at(uz_off), daz.data(), cache.h_prev.data(), hidden, hidden);
  outer_acc(g.at(wr_off), dar.data(), cache.x.data(), hidden, in);
  outer_acc(g.at(ur_off), dar.data(), cache.h_prev.data(), hidden, hidden);
  outer_acc(g.at(wn_off), dan.data(), cache.x.data(), hidden, in);
  outer_acc(g.at(un_off), dan_r.data(), cache.h_prev.data(), hidden, hidden);
  for (int i = 0; i < hidden; ++i) {
    g.at(bz_off)[i] += daz[i];
    g.at(br_off)[i] += dar[i];
    g.at(bn_off)[i] += dan[i];
  }

  if (dx != nullptr) {
    matvec_t_acc(p.at(wz_off), daz.data(), hidden, in, dx);
    matvec_t_acc(p.at(wr_off), dar.data(), hidden, in, dx);
    matvec_t_acc(p.at(wn_off), dan.data(), hidden, in, dx);
  }
  matvec_t_acc(p.at(uz_off), daz.data(), hidden, hidden, dh_prev);
  matvec_t_acc(p.at(ur_off), dar.data(), hidden, hidden, dh_prev);
  matvec_t_acc(p.at(un_off), dan_r.data(), hidden, hidden, dh_prev);
}

}  // namespace viral::nn
