#include "canopy/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "canopy/rng.hpp"

namespace canopy {

namespace {

struct RayGrid {
  Vec3 origin;
  std::vector<Vec3> dirs;  // world-space, z-depth parameterized
  int w = 0, h = 0;
  const Vec3& dir(int x, int y) const { return dirs[static_cast<size_t>(y) * w + x]; }
};

RayGrid make_rays(const CameraSpec& cam) {
  RayGrid g;
  g.w = cam.width;
  g.h = cam.height;
  g.origin = cam.pose.translation();
  g.dirs.resize(static_cast<size_t>(cam.width) * cam.height);
  const double f = (cam.height / 2.0) / std::tan(cam.fov / 2.0);
  const Mat3 rot = cam.pose.linear();
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      double xc = (x + 0.5 - cam.width / 2.0) / f;
      double yc = (cam.height / 2.0 - (y + 0.5)) / f;
      // unit z in camera space: the ray parameter equals camera-space depth
      g.dirs[static_cast<size_t>(y) * g.w + x] = rot * Vec3(xc, yc, 1.0);
    }
  }
  return g;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// nearest t in [near, far] or +inf
double ray_sphere(const Vec3& o, const Vec3& d, const Vec3& c, double r,
                  double tmin, double tmax) {
  Vec3 m = o - c;
  double a = d.dot(d);
  double b = 2.0 * m.dot(d);
  double cc = m.dot(m) - r * r;
  double disc = b * b - 4.0 * a * cc;
  if (disc < 0.0) return kInf;
  double sq = std::sqrt(disc);
  double t = (-b - sq) / (2.0 * a);
  if (t < tmin) t = (-b + sq) / (2.0 * a);
  return (t >= tmin && t <= tmax) ? t : kInf;
}

double ray_capsule(const Vec3& o, const Vec3& d, const Capsule& cap,
                   double tmin, double tmax) {
  double best = std::min(ray_sphere(o, d, cap.a, cap.radius, tmin, tmax),
                         ray_sphere(o, d, cap.b, cap.radius, tmin, tmax));
  Vec3 ab = cap.b - cap.a;
  double len = ab.norm();
  if (len > 1e-12) {
    Vec3 axis = ab / len;
    Vec3 m = o - cap.a;
    Vec3 dp = d - d.dot(axis) * axis;
    Vec3 mp = m - m.dot(axis) * axis;
    double a = dp.dot(dp);
    if (a > 1e-30) {
      double b = 2.0 * mp.dot(dp);
      double cc = mp.dot(mp) - cap.radius * cap.radius;
      double disc = b * b - 4.0 * a * cc;
      if (disc >= 0.0) {
        double sq = std::sqrt(disc);
        for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
          if (t < tmin || t > tmax || t >= best) continue;
          double s = (m + t * d).dot(axis);
          if (s >= 0.0 && s <= len) best = t;
        }
      }
    }
  }
  return best;
}

double ray_disc(const Vec3& o, const Vec3& d, const SceneDisc& disc,
                double tmin, double tmax) {
  Vec3 n = disc.frame.linear().col(2);
  double denom = d.dot(n);
  if (std::abs(denom) < 1e-14) return kInf;
  double t = (disc.frame.translation() - o).dot(n) / denom;
  if (t < tmin || t > tmax) return kInf;
  Vec3 w = o + t * d - disc.frame.translation();
  double u = w.dot(disc.frame.linear().col(0)) / disc.semi_major;
  double v = w.dot(disc.frame.linear().col(1)) / disc.semi_minor;
  return (u * u + v * v <= 1.0) ? t : kInf;
}

double ray_plane(const Vec3& o, const Vec3& d, const Vec3& p, const Vec3& n,
                 double tmin, double tmax) {
  double denom = d.dot(n);
  if (std::abs(denom) < 1e-14) return kInf;
  double t = (p - o).dot(n) / denom;
  return (t >= tmin && t <= tmax) ? t : kInf;
}

struct PixelBounds {
  int x0, y0, x1, y1;  // inclusive
  bool empty() const { return x0 > x1 || y0 > y1; }
};

// Conservative screen bounds from a world-space AABB. Perspective projection
// maps convex sets to convex sets for geometry strictly in front of the
// camera, so the projected corner hull bounds the projected primitive; any
// corner closer than `near` falls back to the full viewport.
PixelBounds project_bounds(const Vec3& lo, const Vec3& hi,
                           const CameraSpec& cam) {
  const double f = (cam.height / 2.0) / std::tan(cam.fov / 2.0);
  const Iso3 inv = cam.pose.inverse();
  double px0 = kInf, py0 = kInf, px1 = -kInf, py1 = -kInf;
  for (int i = 0; i < 8; ++i) {
    Vec3 corner(i & 1 ? hi.x() : lo.x(), i & 2 ? hi.y() : lo.y(),
                i & 4 ? hi.z() : lo.z());
    Vec3 c = inv * corner;
    if (c.z() < cam.near) return PixelBounds{0, 0, cam.width - 1, cam.height - 1};
    double sx = f * c.x() / c.z() + cam.width / 2.0 - 0.5;
    double sy = cam.height / 2.0 - f * c.y() / c.z() - 0.5;
    px0 = std::min(px0, sx);
    px1 = std::max(px1, sx);
    py0 = std::min(py0, sy);
    py1 = std::max(py1, sy);
  }
  PixelBounds b;
  b.x0 = std::max(0, static_cast<int>(std::floor(px0)) - 1);
  b.y0 = std::max(0, static_cast<int>(std::floor(py0)) - 1);
  b.x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(px1)) + 1);
  b.y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(py1)) + 1);
  return b;
}

struct Buffers {
  std::vector<double> depth;
  std::vector<Vec3> color;
  std::vector<std::uint8_t> is_fruit;
};

template <typename Intersect>
void scan(const RayGrid& rays, const CameraSpec& cam, const PixelBounds& b,
          const Vec3& color, bool fruit, Buffers& buf, Intersect&& hit) {
  for (int y = b.y0; y <= b.y1; ++y) {
    for (int x = b.x0; x <= b.x1; ++x) {
      size_t idx = static_cast<size_t>(y) * cam.width + x;
      double t = hit(rays.origin, rays.dir(x, y));
      if (t < buf.depth[idx]) {
        buf.depth[idx] = t;
        buf.color[idx] = color;
        buf.is_fruit[idx] = fruit ? 1 : 0;
      }
    }
  }
}

}  // namespace

void CameraSpec::validate() const {
  if (width < 8 || height < 8)
    throw std::invalid_argument("camera: width and height must be >= 8");
  if (!(near > 0.0 && near < far))
    throw std::invalid_argument("camera: need 0 < near < far");
  if (!(fov > 1e-6 && fov < 3.14))
    throw std::invalid_argument("camera: fov out of range");
}

Frame Frame::zeros(int w, int h) {
  Frame f;
  f.width = w;
  f.height = h;
  f.data.assign(static_cast<size_t>(kChannels) * w * h, 0.0f);
  return f;
}

Frame render(const Scene& scene, const CameraSpec& cam, double lighting,
             bool include_plant) {
  cam.validate();
  const RayGrid rays = make_rays(cam);
  const size_t npix = static_cast<size_t>(cam.width) * cam.height;

  Buffers buf;
  buf.depth.assign(npix, kInf);
  buf.color.assign(npix, Vec3::Zero());
  buf.is_fruit.assign(npix, 0);

  const double tn = cam.near, tf = cam.far;
  const PixelBounds full{0, 0, cam.width - 1, cam.height - 1};

  // wall first (background everywhere)
  scan(rays, cam, full, scene.wall.color, false, buf,
       [&](const Vec3& o, const Vec3& d) {
         return ray_plane(o, d, scene.wall.point, scene.wall.normal, tn, tf);
       });

  for (const SceneCapsule& c : scene.capsules) {
    if (c.plant && !include_plant) continue;
    Vec3 lo = c.shape.a.cwiseMin(c.shape.b).array() - c.shape.radius;
    Vec3 hi = c.shape.a.cwiseMax(c.shape.b).array() + c.shape.radius;
    scan(rays, cam, project_bounds(lo, hi, cam), c.color, false, buf,
         [&](const Vec3& o, const Vec3& d) {
           return ray_capsule(o, d, c.shape, tn, tf);
         });
  }

  for (const SceneDisc& disc : scene.discs) {
    if (disc.plant && !include_plant) continue;
    Vec3 ctr = disc.frame.translation();
    Vec3 lo = ctr.array() - disc.semi_major;
    Vec3 hi = ctr.array() + disc.semi_major;
    scan(rays, cam, project_bounds(lo, hi, cam), disc.color, false, buf,
         [&](const Vec3& o, const Vec3& d) {
           return ray_disc(o, d, disc, tn, tf);
         });
  }

  if (scene.fruit) {
    const SceneSphere& s = *scene.fruit;
    Vec3 lo = s.center.array() - s.radius;
    Vec3 hi = s.center.array() + s.radius;
    scan(rays, cam, project_bounds(lo, hi, cam), s.color, true, buf,
         [&](const Vec3& o, const Vec3& d) {
           return ray_sphere(o, d, s.center, s.radius, tn, tf);
         });
  }

  Frame frame = Frame::zeros(cam.width, cam.height);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      size_t idx = static_cast<size_t>(y) * cam.width + x;
      Vec3 rgb = Vec3::Zero();
      if (buf.depth[idx] != kInf)
        rgb = (buf.color[idx] * lighting).cwiseMax(0.0).cwiseMin(1.0);
      frame.at(0, x, y) = static_cast<float>(rgb.x());
      frame.at(1, x, y) = static_cast<float>(rgb.y());
      frame.at(2, x, y) = static_cast<float>(rgb.z());
      frame.at(3, x, y) = buf.is_fruit[idx] ? 1.0f : 0.0f;
      frame.at(4, x, y) =
          static_cast<float>(buf.depth[idx] == kInf ? cam.far : buf.depth[idx]);
    }
  }
  return frame;
}

OcclusionStats occlusion_stats(const Scene& scene, const CameraSpec& cam) {
  if (!scene.fruit)
    throw std::invalid_argument("occlusion_stats: scene has no fruit");
  Frame footprint = render(scene, cam, 1.0, /*include_plant=*/false);
  Frame full = render(scene, cam, 1.0, /*include_plant=*/true);
  OcclusionStats st;
  const size_t n = footprint.plane_size();
  const float* fp = footprint.data.data() + 3 * n;
  const float* fl = full.data.data() + 3 * n;
  for (size_t i = 0; i < n; ++i) {
    if (fp[i] > 0.5f) {
      ++st.fruit_pixels_total;
      if (fl[i] > 0.5f) ++st.visible_pixels;
    }
  }
  st.occluded_pixels = st.fruit_pixels_total - st.visible_pixels;
  return st;
}

Frame add_depth_noise(const Frame& frame, double sigma, std::uint64_t seed,
                      const CameraSpec& cam) {
  if (sigma < 0.0) throw std::invalid_argument("depth noise: sigma must be >= 0");
  if (sigma == 0.0) return frame;
  Frame out = frame;
  Rng rng(Rng::mix(seed ^ 0x6e6f697365ull));
  float* depth = out.data.data() + 4 * out.plane_size();
  for (size_t i = 0; i < out.plane_size(); ++i) {
    if (depth[i] >= static_cast<float>(cam.far)) continue;  // background
    double v = depth[i] + sigma * rng.normal();
    depth[i] = static_cast<float>(std::clamp(v, cam.near, cam.far));
  }
  return out;
}

void write_frame(const Frame& frame, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  std::int32_t hdr[3] = {frame.width, frame.height, Frame::kChannels};
  f.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  f.write(reinterpret_cast<const char*>(frame.data.data()),
          static_cast<std::streamsize>(frame.data.size() * sizeof(float)));
  if (!f) throw std::runtime_error("short write: " + path);
}

Frame read_frame(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for read: " + path);
  std::int32_t hdr[3];
  f.read(reinterpret_cast<char*>(hdr), sizeof(hdr));
  if (!f || hdr[2] != Frame::kChannels || hdr[0] <= 0 || hdr[1] <= 0)
    throw std::runtime_error("bad frame header: " + path);
  Frame frame = Frame::zeros(hdr[0], hdr[1]);
  f.read(reinterpret_cast<char*>(frame.data.data()),
         static_cast<std::streamsize>(frame.data.size() * sizeof(float)));
  if (!f) throw std::runtime_error("truncated frame file: " + path);
  return frame;
}

void write_ppm(const Frame& frame, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "P6\n" << frame.width << " " << frame.height << "\n255\n";
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        float v = std::clamp(frame.at(c, x, y), 0.0f, 1.0f);
        f.put(static_cast<char>(std::lround(v * 255.0f)));
      }
    }
  }
}

}  // namespace canopy
