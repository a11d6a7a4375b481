// Copyright 2026 The Fusebox Authors
// SPDX-License-Identifier: Apache-2.0

#include "fusebox/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "fusebox/errors.hpp"

namespace fusebox::geom {

namespace {

constexpr double kAreaEpsilon = 1e-12;  // slivers below this are treated as 0
constexpr double kInBoxTolerance = 1e-9;

struct Vec2 {
  double x;
  double y;
};

double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double polygon_area(const std::vector<Vec2>& poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % poly.size()];
    acc += p.x * q.y - q.x * p.y;
  }
  return std::abs(acc) * 0.5;
}

std::array<Vec2, 4> box_corners(const BevBox& b) {
  const double c = std::cos(b.yaw);
  const double s = std::sin(b.yaw);
  const double hl = b.length * 0.5;
  const double hw = b.width * 0.5;
  // counterclockwise
  const std::array<std::array<double, 2>, 4> local = {
      {{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  std::array<Vec2, 4> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = {b.cx + c * local[i][0] - s * local[i][1],
              b.cy + s * local[i][0] + c * local[i][1]};
  }
  return out;
}

// Sutherland-Hodgman clip of a convex subject polygon against one directed
// clip edge (a -> b); inside is the left half-plane, boundary included.
std::vector<Vec2> clip_edge(const std::vector<Vec2>& subject, const Vec2& a,
                            const Vec2& b) {
  std::vector<Vec2> out;
  out.reserve(subject.size() + 2);
  const std::size_t n = subject.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& cur = subject[i];
    const Vec2& nxt = subject[(i + 1) % n];
    const double dc = cross2(a, b, cur);
    const double dn = cross2(a, b, nxt);
    const bool cur_in = dc >= 0.0;
    const bool nxt_in = dn >= 0.0;
    if (cur_in) out.push_back(cur);
    if (cur_in != nxt_in) {
      const double t = dc / (dc - dn);
      out.push_back({cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
    }
  }
  return out;
}

}  // namespace

double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a < 0.0) a += two_pi;
  return a - std::numbers::pi;
}

void CameraModel::validate() const {
  auto fail = [this](const std::string& what) {
    throw CalibrationError("camera '" + name + "': " + what);
  };
  for (double v : intrinsics)
    if (!std::isfinite(v)) fail("non-finite intrinsics");
  for (double v : ego_from_camera)
    if (!std::isfinite(v)) fail("non-finite extrinsics");
  if (width < 1 || height < 1) fail("image dimensions must be >= 1");
  if (!(fx() > 0.0) || !(fy() > 0.0)) fail("focal lengths must be positive");
  if (!(cx() > 0.0 && cx() < width)) fail("principal point cx outside image");
  if (!(cy() > 0.0 && cy() < height)) fail("principal point cy outside image");
  if (intrinsics[1] != 0.0 || intrinsics[3] != 0.0 || intrinsics[6] != 0.0 ||
      intrinsics[7] != 0.0 || intrinsics[8] != 1.0) {
    fail("intrinsics must be pinhole form [fx 0 cx; 0 fy cy; 0 0 1]");
  }

  constexpr double tol = 1e-6;
  // R columns live at stride 4
  const auto& m = ego_from_camera;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;  // (R R^T)[i][j]
      for (int k = 0; k < 3; ++k) acc += m[4 * i + k] * m[4 * j + k];
      const double expect = (i == j) ? 1.0 : 0.0;
      if (std::abs(acc - expect) > tol) fail("rotation not orthonormal");
    }
  }
  const double det =
      m[0] * (m[5] * m[10] - m[6] * m[9]) - m[1] * (m[4] * m[10] - m[6] * m[8]) +
      m[2] * (m[4] * m[9] - m[5] * m[8]);
  if (det < 0.0) fail("rotation has negative determinant");
  if (std::abs(m[12]) > tol || std::abs(m[13]) > tol || std::abs(m[14]) > tol ||
      std::abs(m[15] - 1.0) > tol) {
    fail("last row must be [0 0 0 1]");
  }
}

std::optional<ImagePoint> project_to_image(const Point3& p,
                                           const CameraModel& cam) {
  const auto& m = cam.ego_from_camera;
  const double dx = p.x - m[3];
  const double dy = p.y - m[7];
  const double dz = p.z - m[11];
  // camera_from_ego rotation is R^T: rows are the columns of R
  const double xc = m[0] * dx + m[4] * dy + m[8] * dz;
  const double yc = m[1] * dx + m[5] * dy + m[9] * dz;
  const double zc = m[2] * dx + m[6] * dy + m[10] * dz;
  if (!(zc > 0.0)) return std::nullopt;
  const double u = cam.fx() * xc / zc + cam.cx();
  const double v = cam.fy() * yc / zc + cam.cy();
  if (u < 0.0 || u >= cam.width || v < 0.0 || v >= cam.height)
    return std::nullopt;
  return ImagePoint{u, v, zc};
}

Point3 backproject(double u, double v, double depth, const CameraModel& cam) {
  if (!(depth > 0.0)) {
    std::ostringstream os;
    os << "backproject: depth must be positive, got " << depth;
    throw std::invalid_argument(os.str());
  }
  const double xc = (u - cam.cx()) / cam.fx() * depth;
  const double yc = (v - cam.cy()) / cam.fy() * depth;
  const double zc = depth;
  const auto& m = cam.ego_from_camera;
  return {m[0] * xc + m[1] * yc + m[2] * zc + m[3],
          m[4] * xc + m[5] * yc + m[6] * zc + m[7],
          m[8] * xc + m[9] * yc + m[10] * zc + m[11]};
}

std::array<std::array<double, 2>, 4> BevBox::corners() const {
  const auto c = box_corners(*this);
  return {{{c[0].x, c[0].y}, {c[1].x, c[1].y}, {c[2].x, c[2].y},
           {c[3].x, c[3].y}}};
}

BevBox make_canonical_bev(double cx, double cy, double extent_along,
                          double extent_across, double heading) {
  BevBox b;
  b.cx = cx;
  b.cy = cy;
  if (extent_along >= extent_across) {
    b.length = extent_along;
    b.width = extent_across;
    b.yaw = normalize_angle(heading);
  } else {
    b.length = extent_across;
    b.width = extent_along;
    b.yaw = normalize_angle(heading + std::numbers::pi / 2.0);
  }
  return b;
}

double bev_intersection_area(const BevBox& a, const BevBox& b) {
  const auto ca = box_corners(a);
  const auto cb = box_corners(b);
  std::vector<Vec2> poly(ca.begin(), ca.end());
  for (int i = 0; i < 4 && !poly.empty(); ++i) {
    poly = clip_edge(poly, cb[i], cb[(i + 1) % 4]);
  }
  const double area = polygon_area(poly);
  return area < kAreaEpsilon ? 0.0 : area;
}

double bev_iou(const BevBox& a, const BevBox& b) {
  const double inter = bev_intersection_area(a, b);
  const double area_a = a.length * a.width;
  const double area_b = b.length * b.width;
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou3d(const Box3D& a, const Box3D& b) {
  const double inter_area = bev_intersection_area(a.bev(), b.bev());
  const double z_overlap =
      std::max(0.0, std::min(a.z_top(), b.z_top()) -
                        std::max(a.z_bottom(), b.z_bottom()));
  const double inter = inter_area * z_overlap;
  const double vol_a = a.length * a.width * a.height;
  const double vol_b = b.length * b.width * b.height;
  const double uni = vol_a + vol_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<std::size_t> points_in_box(std::span<const Point3> points,
                                       const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = box.length * 0.5 + kInBoxTolerance;
  const double hw = box.width * 0.5 + kInBoxTolerance;
  const double hh = box.height * 0.5 + kInBoxTolerance;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double dx = points[i].x - box.center.x;
    const double dy = points[i].y - box.center.y;
    const double dz = points[i].z - box.center.z;
    const double lx = c * dx + s * dy;
    const double ly = -s * dx + c * dy;
    if (std::abs(lx) <= hl && std::abs(ly) <= hw && std::abs(dz) <= hh)
      out.push_back(i);
  }
  return out;
}

}  // namespace fusebox::geom
