#include "canopy/geom.hpp"

#include <algorithm>
#include <cmath>

namespace canopy {

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b,
                              Vec3* closest) {
  Vec3 ab = b - a;
  double denom = ab.squaredNorm();
  double t = denom > 0.0 ? (p - a).dot(ab) / denom : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  Vec3 c = a + t * ab;
  if (closest) *closest = c;
  return (p - c).norm();
}

// Ericson, "Real-Time Collision Detection", closest points of two segments.
double segment_segment_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2,
                                const Vec3& q2, Vec3* c1_out, Vec3* c2_out) {
  const Vec3 d1 = q1 - p1;
  const Vec3 d2 = q2 - p2;
  const Vec3 r = p1 - p2;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  const double eps = 1e-30;

  double s = 0.0, t = 0.0;
  if (a <= eps && e <= eps) {
    // both degenerate to points
  } else if (a <= eps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= eps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      if (denom > eps) {
        s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
      }
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  Vec3 c1 = p1 + s * d1;
  Vec3 c2 = p2 + t * d2;
  if (c1_out) *c1_out = c1;
  if (c2_out) *c2_out = c2;
  return (c1 - c2).norm();
}

double capsule_distance(const Capsule& x, const Capsule& y) {
  return segment_segment_distance(x.a, x.b, y.a, y.b) - x.radius - y.radius;
}

Mat3 rot_x(double a) {
  Mat3 m;
  double c = std::cos(a), s = std::sin(a);
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Mat3 rot_y(double a) {
  Mat3 m;
  double c = std::cos(a), s = std::sin(a);
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Mat3 rot_z(double a) {
  Mat3 m;
  double c = std::cos(a), s = std::sin(a);
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

Mat3 rot_axis(const Vec3& axis, double a) {
  return Eigen::AngleAxisd(a, axis.normalized()).toRotationMatrix();
}

Iso3 make_pose(const Vec3& xyz, const Vec3& rpy) {
  Iso3 p = Iso3::Identity();
  p.linear() = rot_z(rpy.z()) * rot_y(rpy.y()) * rot_x(rpy.x());
  p.translation() = xyz;
  return p;
}

}  // namespace canopy
