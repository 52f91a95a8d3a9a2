#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace canopy {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;
using Iso3 = Eigen::Isometry3d;

struct Capsule {
  Vec3 a;
  Vec3 b;
  double radius;
};

// Distance from point p to segment [a, b]; optionally returns the closest
// point on the segment.
double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b,
                              Vec3* closest = nullptr);

// Closest distance between segments [p1,q1] and [p2,q2]; optionally returns
// the closest points on each.
double segment_segment_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2,
                                const Vec3& q2, Vec3* c1 = nullptr,
                                Vec3* c2 = nullptr);

// Surface-to-surface distance (negative when overlapping).
double capsule_distance(const Capsule& x, const Capsule& y);

// Pose from translation + roll/pitch/yaw (XYZ extrinsic: Rz(yaw)*Ry(pitch)*Rx(roll)).
Iso3 make_pose(const Vec3& xyz, const Vec3& rpy);

Mat3 rot_x(double a);
Mat3 rot_y(double a);
Mat3 rot_z(double a);
Mat3 rot_axis(const Vec3& axis, double a);

}  // namespace canopy
