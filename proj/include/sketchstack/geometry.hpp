#pragma once

#include <algorithm>
#include <cmath>

namespace sketchstack {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
};

// Axis-aligned rectangle in a single plane, used for footprints and contact
// patches.
struct Rect2 {
  double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;

  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  double center_x() const { return 0.5 * (min_x + max_x); }
  double center_y() const { return 0.5 * (min_y + max_y); }

  bool contains(double x, double y, double slack = 0.0) const {
    return x >= min_x - slack && x <= max_x + slack && y >= min_y - slack &&
           y <= max_y + slack;
  }
  // True when `inner` lies inside this rect, allowing `slack` beyond each edge.
  bool contains_rect(const Rect2& inner, double slack = 0.0) const {
    return inner.min_x >= min_x - slack && inner.max_x <= max_x + slack &&
           inner.min_y >= min_y - slack && inner.max_y <= max_y + slack;
  }
};

inline Rect2 intersect(const Rect2& a, const Rect2& b) {
  return {std::max(a.min_x, b.min_x), std::max(a.min_y, b.min_y),
          std::min(a.max_x, b.max_x), std::min(a.max_y, b.max_y)};
}

inline double overlap_area(const Rect2& a, const Rect2& b) {
  const Rect2 inter = intersect(a, b);
  if (inter.max_x <= inter.min_x || inter.max_y <= inter.min_y) return 0.0;
  return inter.area();
}

// Axis-aligned box in 3D.
struct Box3 {
  Vec3 min, max;

  double left_x() const { return min.x; }
  double right_x() const { return max.x; }
  double front_y() const { return min.y; }  // observer sits at y = -inf
  double back_y() const { return max.y; }
  double base_z() const { return min.z; }
  double top_z() const { return max.z; }

  double width() const { return max.x - min.x; }
  double depth() const { return max.y - min.y; }
  double height() const { return max.z - min.z; }
  double volume() const { return width() * depth() * height(); }

  double center_x() const { return 0.5 * (min.x + max.x); }
  double center_y() const { return 0.5 * (min.y + max.y); }
  double center_z() const { return 0.5 * (min.z + max.z); }
  Vec3 center() const { return {center_x(), center_y(), center_z()}; }

  // Footprint in the x-y plane (Rect2 axes map to x and y).
  Rect2 footprint() const { return {min.x, min.y, max.x, max.y}; }
  // Projection onto the x-z plane (Rect2 "y" axis holds z).
  Rect2 front_view() const { return {min.x, min.z, max.x, max.z}; }

  bool contains_box(const Box3& inner, double slack = 0.0) const {
    return inner.min.x >= min.x - slack && inner.max.x <= max.x + slack &&
           inner.min.y >= min.y - slack && inner.max.y <= max.y + slack &&
           inner.min.z >= min.z - slack && inner.max.z <= max.z + slack;
  }
};

inline Box3 make_box(const Vec3& centroid, double w, double l, double h) {
  return {{centroid.x - w / 2, centroid.y - l / 2, centroid.z - h / 2},
          {centroid.x + w / 2, centroid.y + l / 2, centroid.z + h / 2}};
}

// Length of the overlap of [a0,a1] and [b0,b1]; 0 if disjoint.
inline double interval_overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace sketchstack
