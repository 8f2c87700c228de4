#pragma once

#include <array>
#include <vector>

#include "viral/rng.hpp"

namespace viral::percept {

inline constexpr int kFrameSize = 64;
inline constexpr double kPixelsPerMeter = 32.0;
inline constexpr int kFramePixels = kFrameSize * kFrameSize;

// egocentric RGB frame, values kept in [0, 1] through the whole pipeline
struct Frame {
  std::vector<double> px = std::vector<double>(kFramePixels * 3, 0.0);

  double& at(int row, int col, int ch) {
    return px[(row * kFrameSize + col) * 3 + ch];
  }
  double at(int row, int col, int ch) const {
    return px[(row * kFrameSize + col) * 3 + ch];
  }
  bool operator==(const Frame& o) const { return px == o.px; }
};

// top-down window fixed to the robot: 2 m forward, +-1 m lateral; extrinsic
// offsets shift and rotate the window, delay is in frames
struct CameraModel {
  double dx = 0.0;
  double dy = 0.0;
  double dyaw = 0.0;
  int delay = 0;
};

// per-episode appearance; per-frame effects are drawn inside randomize_frame
struct VisualTheme {
  double light_scale = 1.0;
  std::array<double, 3> tint{1.0, 1.0, 1.0};
  int floor_palette = 0;
  int table_palette = 0;
  int object_palette = 0;
};

struct RandomizationConfig {
  bool enabled = true;
  double p_brightness = 0.25, brightness_lo = 0.7, brightness_hi = 2.0;
  double p_contrast = 0.25, contrast_lo = 0.5, contrast_hi = 1.5;
  double p_hue = 0.5, hue_lo = -0.1, hue_hi = 0.1;
  double p_saturation = 0.25, saturation_lo = 0.5, saturation_hi = 2.0;
  double p_noise = 0.25, noise_lo = 0.0, noise_hi = 0.15;
  double p_blur = 0.25, blur_sigma_lo = 0.1, blur_sigma_hi = 1.5;
  double light_lo = 800.0, light_hi = 2000.0;  // mapped to scale [0.4, 1.0]
  double tint_lo = 0.8, tint_hi = 1.2;
  double cam_dx = 0.02, cam_dy = 0.05, cam_dyaw = 0.05;
  int delay_max = 2;
};

inline constexpr int kPaletteSize = 8;

// maps dome intensity to a brightness scale: 800 -> 0.4, 2000 -> 1.0
double light_intensity_to_scale(double intensity, const RandomizationConfig& cfg);

// one theme + camera per episode; disabled config yields the canonical theme
std::pair<VisualTheme, CameraModel> sample_theme(const RandomizationConfig& cfg,
                                                 Rng& rng);

// delivers frames delayed by CameraModel::delay steps; the first frames
// repeat the initial one
class LatencyBuffer {
 public:
  explicit LatencyBuffer(int delay = 0) : delay_(delay) {}

  const Frame& push(const Frame& frame) {
    ring_.push_back(frame);
    if (static_cast<int>(ring_.size()) > delay_ + 1) ring_.erase(ring_.begin());
    return ring_.front();
  }

  void reset(int delay) {
    delay_ = delay;
    ring_.clear();
  }

  int delay() const { return delay_; }

 private:
  int delay_ = 0;
  std::vector<Frame> ring_;
};

}  // namespace viral::percept
