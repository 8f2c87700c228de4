#include "viral/percept/raster.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "viral/errors.hpp"
#include "viral/sim/world.hpp"

namespace viral::percept {

namespace {

struct Rgb {
  double r, g, b;
};

constexpr Rgb kFloorPalette[kPaletteSize] = {
    {0.24, 0.22, 0.20}, {0.32, 0.28, 0.22}, {0.18, 0.24, 0.20}, {0.28, 0.20, 0.26},
    {0.22, 0.26, 0.30}, {0.30, 0.30, 0.24}, {0.16, 0.18, 0.24}, {0.26, 0.24, 0.28},
};
constexpr Rgb kTablePalette[kPaletteSize] = {
    {0.55, 0.40, 0.24}, {0.62, 0.48, 0.30}, {0.48, 0.34, 0.22}, {0.58, 0.44, 0.34},
    {0.52, 0.42, 0.28}, {0.66, 0.52, 0.34}, {0.44, 0.32, 0.26}, {0.60, 0.46, 0.26},
};
constexpr Rgb kObjectPalette[kPaletteSize] = {
    {0.85, 0.25, 0.20}, {0.20, 0.55, 0.85}, {0.30, 0.75, 0.30}, {0.85, 0.70, 0.20},
    {0.70, 0.30, 0.75}, {0.20, 0.70, 0.65}, {0.85, 0.45, 0.15}, {0.60, 0.60, 0.85},
};
constexpr Rgb kTrayColor{0.12, 0.12, 0.14};
constexpr Rgb kMarkerColor{0.95, 0.95, 0.95};

bool shape_contains(sim::Shape shape, double radius, const Vec2& d) {
  using sim::Shape;
  const double ax = std::abs(d.x), ay = std::abs(d.y);
  switch (shape) {
    case Shape::kCylinder:
      return d.norm() <= radius;
    case Shape::kBox:
      return ax <= radius && ay <= radius;
    case Shape::kCapsule: {
      const double rx = 1.6 * radius, ry = 0.8 * radius;
      return (d.x * d.x) / (rx * rx) + (d.y * d.y) / (ry * ry) <= 1.0;
    }
    case Shape::kDisc:
      return d.norm() <= 1.2 * radius;
    case Shape::kBar:
      return ax <= 2.2 * radius && ay <= 0.6 * radius;
    case Shape::kCone:
      return d.x >= -radius && d.x <= radius && ay <= 0.5 * (radius - d.x);
    case Shape::kRing: {
      const double n = d.norm();
      return n <= radius && n >= 0.55 * radius;
    }
    case Shape::kBlock:
      return ax <= 1.1 * radius && ay <= 1.1 * radius;
    case Shape::kPeg:
      return d.norm() <= 0.6 * radius;
    case Shape::kPuck:
      return d.norm() <= 1.1 * radius;
  }
  return false;
}

// brightness factor for height-above-table coding
double lift_brightness(double z, double surface) {
  return 0.55 + 3.0 * clamp(z - surface, 0.0, 0.15);
}

}  // namespace

Frame rasterize(const sim::WorldState& w, const CameraModel& camera,
                const VisualTheme& theme) {
  Frame f;
  const Vec2 cam_pos = to_world(w.base, {camera.dx, camera.dy});
  const double cam_yaw = w.base.yaw + camera.dyaw;
  const double cy = std::cos(cam_yaw), sy = std::sin(cam_yaw);

  const Vec3 ee = sim::end_effector_world(w);
  const double active_surface = w.scene.table(w.active_table).height;

  const Rgb floor_c = kFloorPalette[theme.floor_palette];
  const Rgb table_c = kTablePalette[theme.table_palette];
  const Rgb object_c = kObjectPalette[theme.object_palette];

  for (int row = 0; row < kFrameSize; ++row) {
    const double x_cam = (kFrameSize - 0.5 - row) / kPixelsPerMeter;
    for (int col = 0; col < kFrameSize; ++col) {
      const double y_cam = (kFrameSize * 0.5 - 0.5 - col) / kPixelsPerMeter;
      const Vec2 p{cam_pos.x + cy * x_cam - sy * y_cam,
                   cam_pos.y + sy * x_cam + cy * y_cam};

      Rgb c = floor_c;
      for (int id = 0; id < 2; ++id) {
        if (w.scene.table(id).contains_xy(p)) {
          c = table_c;
          break;
        }
      }
      if ((p - Vec2{w.scene.tray.pose.x, w.scene.tray.pose.y}).norm() <=
          w.scene.tray.radius)
        c = kTrayColor;
      for (const sim::ObjectState* obj : {&w.grasp_obj, &w.hold_obj}) {
        if (shape_contains(obj->shape_id, obj->grasp_radius, p - obj->pos.xy())) {
          const double surface = obj->resting_table
                                     ? w.scene.table(*obj->resting_table).height
                                     : active_surface;
          const double k = lift_brightness(obj->pos.z, surface);
          c = {object_c.r * k, object_c.g * k, object_c.b * k};
        }
      }
      if ((p - ee.xy()).norm() <= 0.045) {
        const double k = lift_brightness(ee.z, active_surface);
        c = {kMarkerColor.r * k, kMarkerColor.g * k, kMarkerColor.b * k};
      }

      f.at(row, col, 0) = clamp(c.r, 0.0, 1.0);
      f.at(row, col, 1) = clamp(c.g, 0.0, 1.0);
      f.at(row, col, 2) = clamp(c.b, 0.0, 1.0);
    }
  }
  return f;
}

void write_ppm(const std::string& path, const Frame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open PPM for writing: " + path);
  out << "P6\n" << kFrameSize << " " << kFrameSize << "\n255\n";
  for (int i = 0; i < kFramePixels * 3; ++i) {
    const double v = clamp(frame.px[i], 0.0, 1.0);
    const unsigned char byte = static_cast<unsigned char>(std::lround(v * 255.0));
    out.put(static_cast<char>(byte));
  }
  if (!out) throw IoError("write failure on PPM: " + path);
}

}  // namespace viral::percept
