#include "viral/percept/augment.hpp"

#include <cmath>

#include "viral/geometry.hpp"

namespace viral::percept {

namespace {

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

void clamp_frame(Frame& f) {
  for (double& v : f.px) v = clamp(v, 0.0, 1.0);
}

void apply_gaussian_blur(Frame& f, int kernel, double sigma) {
  const int half = kernel / 2;
  std::array<double, 5> k{};
  double sum = 0.0;
  for (int i = -half; i <= half; ++i) {
    k[i + half] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + half];
  }
  for (int i = 0; i < kernel; ++i) k[i] /= sum;

  // separable passes with replicated borders
  Frame tmp;
  for (int r = 0; r < kFrameSize; ++r)
    for (int c = 0; c < kFrameSize; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int i = -half; i <= half; ++i) {
          const int cc = clampi(c + i, 0, kFrameSize - 1);
          acc += k[i + half] * f.at(r, cc, ch);
        }
        tmp.at(r, c, ch) = acc;
      }
  for (int r = 0; r < kFrameSize; ++r)
    for (int c = 0; c < kFrameSize; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int i = -half; i <= half; ++i) {
          const int rr = clampi(r + i, 0, kFrameSize - 1);
          acc += k[i + half] * tmp.at(rr, c, ch);
        }
        f.at(r, c, ch) = acc;
      }
}

}  // namespace

std::array<double, 3> rgb_to_hsv(double r, double g, double b) {
  const double mx = std::max(r, std::max(g, b));
  const double mn = std::min(r, std::min(g, b));
  const double d = mx - mn;
  double h = 0.0;
  if (d > 0.0) {
    if (mx == r)
      h = std::fmod((g - b) / d, 6.0);
    else if (mx == g)
      h = (b - r) / d + 2.0;
    else
      h = (r - g) / d + 4.0;
    h /= 6.0;
    if (h < 0.0) h += 1.0;
  }
  const double s = mx > 0.0 ? d / mx : 0.0;
  return {h, s, mx};
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0.0, g = 0.0, b = 0.0;
  if (hp < 1.0) {
    r = c; g = x;
  } else if (hp < 2.0) {
    r = x; g = c;
  } else if (hp < 3.0) {
    g = c; b = x;
  } else if (hp < 4.0) {
    g = x; b = c;
  } else if (hp < 5.0) {
    r = x; b = c;
  } else {
    r = c; b = x;
  }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

Frame randomize_frame(const Frame& frame, const VisualTheme& theme,
                      const RandomizationConfig& cfg, Rng& rng,
                      EffectTrace* trace) {
  Frame f = frame;
  EffectTrace local;
  EffectTrace& tr = trace != nullptr ? *trace : local;
  tr = EffectTrace{};

  for (int i = 0; i < kFramePixels; ++i)
    for (int ch = 0; ch < 3; ++ch)
      f.px[i * 3 + ch] *= theme.light_scale * theme.tint[ch];
  clamp_frame(f);

  if (rng.bernoulli(cfg.p_brightness)) {
    tr.brightness = true;
    tr.brightness_f = rng.uniform(cfg.brightness_lo, cfg.brightness_hi);
    for (double& v : f.px) v *= tr.brightness_f;
    clamp_frame(f);
  }
  if (rng.bernoulli(cfg.p_contrast)) {
    tr.contrast = true;
    tr.contrast_f = rng.uniform(cfg.contrast_lo, cfg.contrast_hi);
    for (double& v : f.px) v = 0.5 + (v - 0.5) * tr.contrast_f;
    clamp_frame(f);
  }
  if (rng.bernoulli(cfg.p_hue)) {
    tr.hue = true;
    tr.hue_shift = rng.uniform(cfg.hue_lo, cfg.hue_hi);
    for (int i = 0; i < kFramePixels; ++i) {
      auto hsv = rgb_to_hsv(f.px[i * 3], f.px[i * 3 + 1], f.px[i * 3 + 2]);
      auto rgb = hsv_to_rgb(hsv[0] + tr.hue_shift, hsv[1], hsv[2]);
      f.px[i * 3] = rgb[0];
      f.px[i * 3 + 1] = rgb[1];
      f.px[i * 3 + 2] = rgb[2];
    }
    clamp_frame(f);
  }
  if (rng.bernoulli(cfg.p_saturation)) {
    tr.saturation = true;
    tr.saturation_f = rng.uniform(cfg.saturation_lo, cfg.saturation_hi);
    for (int i = 0; i < kFramePixels; ++i) {
      auto hsv = rgb_to_hsv(f.px[i * 3], f.px[i * 3 + 1], f.px[i * 3 + 2]);
      auto rgb =
          hsv_to_rgb(hsv[0], viral::clamp(hsv[1] * tr.saturation_f, 0.0, 1.0), hsv[2]);
      f.px[i * 3] = rgb[0];
      f.px[i * 3 + 1] = rgb[1];
      f.px[i * 3 + 2] = rgb[2];
    }
    clamp_frame(f);
  }
  if (rng.bernoulli(cfg.p_noise)) {
    tr.noise = true;
    tr.noise_sigma = rng.uniform(cfg.noise_lo, cfg.noise_hi);
    for (double& v : f.px) v += rng.normal(0.0, tr.noise_sigma);
    clamp_frame(f);
  }
  if (rng.bernoulli(cfg.p_blur)) {
    tr.blur = true;
    tr.blur_kernel = rng.bernoulli(0.5) ? 3 : 5;
    tr.blur_sigma = rng.uniform(cfg.blur_sigma_lo, cfg.blur_sigma_hi);
    apply_gaussian_blur(f, tr.blur_kernel, tr.blur_sigma);
    clamp_frame(f);
  }
  return f;
}

}  // namespace viral::percept
