#include "viral/percept/camera.hpp"

namespace viral::percept {

double light_intensity_to_scale(double intensity, const RandomizationConfig& cfg) {
  const double t = (intensity - cfg.light_lo) / (cfg.light_hi - cfg.light_lo);
  return 0.4 + 0.6 * t;
}

std::pair<VisualTheme, CameraModel> sample_theme(const RandomizationConfig& cfg,
                                                 Rng& rng) {
  VisualTheme theme;
  CameraModel cam;
  if (!cfg.enabled) return {theme, cam};

  theme.light_scale =
      light_intensity_to_scale(rng.uniform(cfg.light_lo, cfg.light_hi), cfg);
  for (int i = 0; i < 3; ++i) theme.tint[i] = rng.uniform(cfg.tint_lo, cfg.tint_hi);
  theme.floor_palette = static_cast<int>(rng.uniform_index(kPaletteSize));
  theme.table_palette = static_cast<int>(rng.uniform_index(kPaletteSize));
  theme.object_palette = static_cast<int>(rng.uniform_index(kPaletteSize));
  cam.dx = rng.uniform(-cfg.cam_dx, cfg.cam_dx);
  cam.dy = rng.uniform(-cfg.cam_dy, cfg.cam_dy);
  cam.dyaw = rng.uniform(-cfg.cam_dyaw, cfg.cam_dyaw);
  cam.delay = static_cast<int>(rng.uniform_index(cfg.delay_max + 1));
  return {theme, cam};
}

}  // namespace viral::percept
