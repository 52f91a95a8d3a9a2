#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "canopy/geom.hpp"

namespace canopy {

struct CameraSpec {
  Iso3 pose = Iso3::Identity();  // camera frame: +x right, +y up, +z forward
  double fov = 1.0;              // vertical field of view, radians
  int width = 64;
  int height = 64;
  double near = 0.05;  // meters
  double far = 2.0;

  void validate() const;
};

// Planar-layout image: five w*h planes in order R, G, B, alpha, depth.
// Depth is camera-space z in meters; pixels that hit nothing carry `far`.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // 5 * width * height

  static constexpr int kChannels = 5;
  static Frame zeros(int w, int h);
  float& at(int plane, int x, int y) {
    return data[static_cast<size_t>(plane) * width * height +
                static_cast<size_t>(y) * width + x];
  }
  float at(int plane, int x, int y) const {
    return data[static_cast<size_t>(plane) * width * height +
                static_cast<size_t>(y) * width + x];
  }
  size_t plane_size() const { return static_cast<size_t>(width) * height; }
};

struct OcclusionStats {
  long long fruit_pixels_total = 0;  // fruit footprint with the plant hidden
  long long occluded_pixels = 0;     // footprint pixels the plant covers
  long long visible_pixels = 0;
  bool out_of_view() const { return fruit_pixels_total == 0; }
  double occluded_fraction() const {
    return fruit_pixels_total > 0
               ? static_cast<double>(occluded_pixels) / fruit_pixels_total
               : 0.0;
  }
};

struct SceneCapsule {
  Capsule shape;
  Vec3 color;
  bool plant = false;
};

struct SceneDisc {
  Iso3 frame;  // +z is the disc normal; x/y are the ellipse axes
  double semi_major = 0.0;
  double semi_minor = 0.0;
  Vec3 color;
  bool plant = false;
};

struct SceneSphere {
  Vec3 center;
  double radius = 0.0;
  Vec3 color;
};

struct SceneWall {
  Vec3 point;
  Vec3 normal;
  Vec3 color;
};

struct Scene {
  std::vector<SceneCapsule> capsules;
  std::vector<SceneDisc> discs;
  std::optional<SceneSphere> fruit;
  SceneWall wall{Vec3(0, 0.6, 0), Vec3(0, -1, 0), Vec3(0.6, 0.6, 0.6)};
};

// Depth-buffered flat-shaded rasterization. Every primitive is scanned over
// a conservative screen bound and resolved with an analytic per-pixel ray
// test, so coverage is exact. `include_plant` = false hides plant-flagged
// primitives (the occlusion footprint pass).
Frame render(const Scene& scene, const CameraSpec& cam, double lighting = 1.0,
             bool include_plant = true);

// Two-pass exact pixel statistics for the fruit. Throws if the scene has no
// fruit.
OcclusionStats occlusion_stats(const Scene& scene, const CameraSpec& cam);

// Gaussian perturbation of the depth plane (valid pixels only, clamped to
// [near, far]); rgb and alpha untouched. sigma = 0 returns the input bitwise.
Frame add_depth_noise(const Frame& frame, double sigma, std::uint64_t seed,
                      const CameraSpec& cam);

// I/O: flat binary dump (int32 width/height/channels header, then f32
// planes, all little-endian) and PPM for eyeballing.
void write_frame(const Frame& frame, const std::string& path);
Frame read_frame(const std::string& path);
void write_ppm(const Frame& frame, const std::string& path);

}  // namespace canopy
