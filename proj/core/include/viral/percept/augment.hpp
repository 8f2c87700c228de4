#pragma once

#include <array>

#include "viral/percept/camera.hpp"

namespace viral::percept {

// in-repo RGB<->HSV so hue/saturation shifts are bit-reproducible
std::array<double, 3> rgb_to_hsv(double r, double g, double b);
std::array<double, 3> hsv_to_rgb(double h, double s, double v);

// which effects fired and with what parameters; filled when requested
struct EffectTrace {
  bool brightness = false, contrast = false, hue = false, saturation = false,
       noise = false, blur = false;
  double brightness_f = 0.0, contrast_f = 0.0, hue_shift = 0.0, saturation_f = 0.0,
         noise_sigma = 0.0, blur_sigma = 0.0;
  int blur_kernel = 0;
};

// per-frame visual randomization in fixed order: theme tint/intensity,
// brightness, contrast (pivot 0.5), hue, saturation, Gaussian noise,
// Gaussian blur; every stage clamps back into [0, 1]
Frame randomize_frame(const Frame& frame, const VisualTheme& theme,
                      const RandomizationConfig& cfg, Rng& rng,
                      EffectTrace* trace = nullptr);

}  // namespace viral::percept
