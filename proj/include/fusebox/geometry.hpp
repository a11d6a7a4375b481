// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fusebox::geom {

/// A point in the ego/LiDAR frame: x forward, y left, z up, meters.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

inline Point3 operator+(const Point3& a, const Point3& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}
inline Point3 operator-(const Point3& a, const Point3& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}
inline Point3 operator*(const Point3& a, double s) {
  return {a.x * s, a.y * s, a.z * s};
}
inline double dot(const Point3& a, const Point3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}
inline double squared_norm(const Point3& a) { return dot(a, a); }
inline double norm(const Point3& a) { return std::sqrt(squared_norm(a)); }

/// Squared Euclidean distance. Filtering and its brute-force reference both
/// go through this exact expression so their tie-breaking is bit-identical.
inline double dist2(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

/// Normalizes an angle to [-pi, pi).
double normalize_angle(double a);

/// Pinhole camera: 3x3 row-major intrinsics (zero skew), rigid 4x4 row-major
/// camera-to-ego transform, image size in pixels.
struct CameraModel {
  std::string name;
  std::array<double, 9> intrinsics{};        // [fx 0 cx; 0 fy cy; 0 0 1]
  std::array<double, 16> ego_from_camera{};  // row-major rigid transform
  int width = 0;
  int height = 0;

  double fx() const { return intrinsics[0]; }
  double fy() const { return intrinsics[4]; }
  double cx() const { return intrinsics[2]; }
  double cy() const { return intrinsics[5]; }

  /// Camera center in the ego frame.
  Point3 position() const {
    return {ego_from_camera[3], ego_from_camera[7], ego_from_camera[11]};
  }
  /// Column `c` of the rotation part: the camera axis (x/y/z for c=0/1/2)
  /// expressed in the ego frame. Column 2 is the principal axis.
  Point3 axis(int c) const {
    return {ego_from_camera[0 + c], ego_from_camera[4 + c],
            ego_from_camera[8 + c]};
  }

  /// Throws CalibrationError if the model violates its invariants:
  /// fx,fy > 0; principal point inside the image; zero skew; pinhole bottom
  /// row; rotation orthonormal within 1e-6 with positive determinant;
  /// homogeneous row [0 0 0 1].
  void validate() const;
};

/// Continuous pixel coordinates plus camera-frame planar depth (z, not
/// Euclidean range).
struct ImagePoint {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

/// Projects an ego-frame point into the image. Empty if the point is not
/// strictly in front of the camera or falls outside [0,width) x [0,height).
std::optional<ImagePoint> project_to_image(const Point3& p,
                                           const CameraModel& cam);

/// Inverse of project_to_image for a pixel and planar depth.
/// Throws std::invalid_argument when depth <= 0.
Point3 backproject(double u, double v, double depth, const CameraModel& cam);

/// Yaw-oriented rectangle in the BEV plane. Canonical form keeps
/// length >= width (length runs along the heading) and yaw in [-pi, pi).
struct BevBox {
  double cx = 0.0;
  double cy = 0.0;
  double length = 0.0;
  double width = 0.0;
  double yaw = 0.0;

  /// Corner positions in counterclockwise order.
  std::array<std::array<double, 2>, 4> corners() const;
};

/// Builds a canonical BevBox from extents measured along a heading and its
/// perpendicular; swaps the axes when needed so that length >= width.
BevBox make_canonical_bev(double cx, double cy, double extent_along,
                          double extent_across, double heading);

/// Yaw-oriented 3D box.
struct Box3D {
  Point3 center;
  double length = 0.0;
  double width = 0.0;
  double height = 0.0;
  double yaw = 0.0;
  int class_id = 0;
  double score = 0.0;
  std::string instance_id;  // empty when absent

  BevBox bev() const { return {center.x, center.y, length, width, yaw}; }
  double z_top() const { return center.z + height / 2.0; }
  double z_bottom() const { return center.z - height / 2.0; }
};

/// Area of the intersection of two rotated rectangles (Sutherland-Hodgman
/// clipping; slivers below 1e-12 m^2 count as zero).
double bev_intersection_area(const BevBox& a, const BevBox& b);

/// Rotated-rectangle IoU in [0,1].
double bev_iou(const BevBox& a, const BevBox& b);

/// Volume IoU: BEV intersection area times the vertical overlap
/// max(0, min(topA,topB) - max(botA,botB)), over the volume union.
double iou3d(const Box3D& a, const Box3D& b);

/// Indices of the points inside the oriented box; boundary points count as
/// inside with a 1e-9 m tolerance.
std::vector<std::size_t> points_in_box(std::span<const Point3> points,
                                       const Box3D& box);

}  // namespace fusebox::geom
