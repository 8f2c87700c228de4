#pragma once

#include <string>

#include "viral/percept/camera.hpp"
#include "viral/sim/types.hpp"

namespace viral::percept {

// egocentric top-down rasterization: robot at the bottom center, forward up,
// 32 px/m. Draw order: floor, tables, tray, objects, end-effector marker.
// Object and marker brightness rises linearly with height above the table so
// lift progress is visible.
Frame rasterize(const sim::WorldState& w, const CameraModel& camera,
                const VisualTheme& theme = VisualTheme{});

// binary PPM (P6, maxval 255, row-major, RGB interleaved)
void write_ppm(const std::string& path, const Frame& frame);

}  // namespace viral::percept
