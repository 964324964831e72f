#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "marqoe/common.hpp"
#include "marqoe/trace.hpp"

namespace marqoe {

/// Axis-aligned box partitioned into divisions[0] x divisions[1] x divisions[2]
/// equal cells. Cell index layout: ix + nx*(iy + ny*iz).
struct CellGrid {
  Vec3 origin;
  Vec3 extent;
  std::array<int, 3> divisions = {4, 4, 2};

  void validate() const {
    if (!(extent.x > 0.0 && extent.y > 0.0 && extent.z > 0.0))
      throw DomainError("grid extent components must be > 0");
    for (int d : divisions)
      if (d <= 0) throw DomainError("grid divisions must be positive");
  }

  int cell_count() const { return divisions[0] * divisions[1] * divisions[2]; }

  Vec3 cell_size() const {
    return {extent.x / divisions[0], extent.y / divisions[1], extent.z / divisions[2]};
  }

  std::array<int, 3> cell_coords(int index) const {
    const int nx = divisions[0], ny = divisions[1];
    return {index % nx, (index / nx) % ny, index / (nx * ny)};
  }

  Vec3 cell_min(int index) const {
    const auto c = cell_coords(index);
    const Vec3 s = cell_size();
    return {origin.x + c[0] * s.x, origin.y + c[1] * s.y, origin.z + c[2] * s.z};
  }

  Vec3 cell_center(int index) const {
    const Vec3 s = cell_size();
    return cell_min(index) + s * 0.5;
  }

  std::array<Vec3, 8> cell_corners(int index) const {
    const Vec3 lo = cell_min(index);
    const Vec3 s = cell_size();
    std::array<Vec3, 8> out;
    int k = 0;
    for (int a = 0; a <= 1; ++a)
      for (int b = 0; b <= 1; ++b)
        for (int c = 0; c <= 1; ++c) out[k++] = {lo.x + a * s.x, lo.y + b * s.y, lo.z + c * s.z};
    return out;
  }
};

struct FrustumParams {
  double h_fov_deg = 90.0;
  double v_fov_deg = 70.0;
  double near_m = 0.1;
  double far_m = 50.0;

  void validate() const {
    if (!(near_m > 0.0) || !(near_m < far_m))
      throw DomainError("frustum requires 0 < near < far");
    if (!(h_fov_deg > 0.0 && h_fov_deg < 180.0) || !(v_fov_deg > 0.0 && v_fov_deg < 180.0))
      throw DomainError("frustum FoV must be in (0, 180) degrees");
  }
};

/// View frustum anchored at a pose. World frame is right-handed with +z up;
/// at zero rotation the camera looks along +x. Yaw rotates about +z (toward
/// +y), pitch elevates the view direction, roll turns about the view axis.
struct Frustum {
  Vec3 apex;
  Vec3 fwd, right, up;
  double tan_h = 1.0, tan_v = 1.0;
  double near_m = 0.1, far_m = 50.0;

  Frustum(const Pose& pose, const FrustumParams& params) {
    params.validate();
    const double yaw = deg_to_rad(pose.theta_x);
    const double pitch = deg_to_rad(pose.theta_y);
    const double roll = deg_to_rad(pose.theta_z);
    apex = pose.position();
    fwd = {std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw), std::sin(pitch)};
    Vec3 r0 = {std::sin(yaw), -std::cos(yaw), 0.0};
    Vec3 u0 = r0.cross(fwd);
    const double cr = std::cos(roll), sr = std::sin(roll);
    right = r0 * cr + u0 * sr;
    up = u0 * cr - r0 * sr;
    tan_h = std::tan(deg_to_rad(params.h_fov_deg / 2.0));
    tan_v = std::tan(deg_to_rad(params.v_fov_deg / 2.0));
    near_m = params.near_m;
    far_m = params.far_m;
  }

  bool contains(const Vec3& p) const {
    const Vec3 d = p - apex;
    const double depth = d.dot(fwd);
    if (depth < near_m || depth > far_m) return false;
    return std::abs(d.dot(right)) <= depth * tan_h && std::abs(d.dot(up)) <= depth * tan_v;
  }
};

/// Sorted, duplicate-free set of cell indices.
struct VisibleSet {
  std::vector<int> cells;

  bool empty() const { return cells.empty(); }
  size_t size() const { return cells.size(); }
  bool contains(int c) const { return std::binary_search(cells.begin(), cells.end(), c); }
};

inline size_t intersection_size(const VisibleSet& a, const VisibleSet& b) {
  size_t n = 0, i = 0, j = 0;
  while (i < a.cells.size() && j < b.cells.size()) {
    if (a.cells[i] < b.cells[j]) {
      ++i;
    } else if (b.cells[j] < a.cells[i]) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

inline size_t union_size(const VisibleSet& a, const VisibleSet& b) {
  return a.cells.size() + b.cells.size() - intersection_size(a, b);
}

/// Cells visible from a pose: a cell is a candidate when any corner or its
/// center falls inside the frustum. With occlusion enabled, candidates whose
/// center lands in the same 2x2-degree angular bucket as a strictly nearer
/// candidate center are dropped.
inline VisibleSet visible_cells(const CellGrid& grid, const Pose& pose,
                                const FrustumParams& params, bool occlusion = true) {
  grid.validate();
  const Frustum fr(pose, params);

  std::vector<int> candidates;
  for (int i = 0; i < grid.cell_count(); ++i) {
    bool inside = fr.contains(grid.cell_center(i));
    if (!inside) {
      for (const Vec3& corner : grid.cell_corners(i)) {
        if (fr.contains(corner)) {
          inside = true;
          break;
        }
      }
    }
    if (inside) candidates.push_back(i);
  }

  VisibleSet out;
  if (!occlusion) {
    out.cells = std::move(candidates);
    return out;
  }

  constexpr double kBucketDeg = 2.0;
  struct Entry {
    double dist;
    std::pair<int, int> bucket;
  };
  std::vector<Entry> info(candidates.size());
  std::map<std::pair<int, int>, double> nearest;
  for (size_t k = 0; k < candidates.size(); ++k) {
    const Vec3 d = grid.cell_center(candidates[k]) - fr.apex;
    const double x = d.dot(fr.fwd), y = d.dot(fr.right), z = d.dot(fr.up);
    const double az = rad_to_deg(std::atan2(y, x));
    const double el = rad_to_deg(std::atan2(z, std::hypot(x, y)));
    info[k].bucket = {static_cast<int>(std::floor(az / kBucketDeg)),
                      static_cast<int>(std::floor(el / kBucketDeg))};
    info[k].dist = d.norm();
    auto [it, inserted] = nearest.try_emplace(info[k].bucket, info[k].dist);
    if (!inserted && info[k].dist < it->second) it->second = info[k].dist;
  }
  for (size_t k = 0; k < candidates.size(); ++k)
    if (!(info[k].dist > nearest[info[k].bucket])) out.cells.push_back(candidates[k]);
  return out;
}

/// Jaccard index |A and B| / |A or B|; empty when both sets are empty (the
/// ratio is undefined there and the frame is excluded from statistics).
inline std::optional<double> vchr(const VisibleSet& actual, const VisibleSet& predicted) {
  const size_t u = union_size(actual, predicted);
  if (u == 0) return std::nullopt;
  return static_cast<double>(intersection_size(actual, predicted)) / static_cast<double>(u);
}

}  // namespace marqoe
