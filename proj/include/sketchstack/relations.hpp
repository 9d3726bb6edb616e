#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "sketchstack/config.hpp"
#include "sketchstack/core.hpp"

namespace sketchstack {

// The 24 geometric relations.  The first 13 live in the front (x-z) plane and
// can be read off a sketch; the remaining 11 involve depth (x-y plane).
enum class Relation {
  LeftOf,
  LeftIn,
  RightIn,
  CenterIn,
  SupportedByPartially,
  SupportedByFully,
  HorizontalAligned,
  VerticalAlignedCentroid,
  VerticalAlignedLeft,
  VerticalAlignedRight,
  HorizontalAlignedInALine,
  TouchingAlongX,
  NearAlongX,
  FrontOf,
  FrontIn,
  BackIn,
  TouchingAlongY,
  NearAlongY,
  DepthAligned,
  DepthAlignedInALine,
  RegularGridSparse,
  RegularGridCompact,
  RandomSplitGridSparse,
  RandomSplitGridCompact,
};

constexpr int kNumRelations = 24;

inline const std::array<Relation, kNumRelations>& all_relations() {
  static const std::array<Relation, kNumRelations> r = {
      Relation::LeftOf,
      Relation::LeftIn,
      Relation::RightIn,
      Relation::CenterIn,
      Relation::SupportedByPartially,
      Relation::SupportedByFully,
      Relation::HorizontalAligned,
      Relation::VerticalAlignedCentroid,
      Relation::VerticalAlignedLeft,
      Relation::VerticalAlignedRight,
      Relation::HorizontalAlignedInALine,
      Relation::TouchingAlongX,
      Relation::NearAlongX,
      Relation::FrontOf,
      Relation::FrontIn,
      Relation::BackIn,
      Relation::TouchingAlongY,
      Relation::NearAlongY,
      Relation::DepthAligned,
      Relation::DepthAlignedInALine,
      Relation::RegularGridSparse,
      Relation::RegularGridCompact,
      Relation::RandomSplitGridSparse,
      Relation::RandomSplitGridCompact,
  };
  return r;
}

enum class Plane { XZ, XY };

inline Plane relation_plane(Relation r) {
  switch (r) {
    case Relation::LeftOf:
    case Relation::LeftIn:
    case Relation::RightIn:
    case Relation::CenterIn:
    case Relation::SupportedByPartially:
    case Relation::SupportedByFully:
    case Relation::HorizontalAligned:
    case Relation::VerticalAlignedCentroid:
    case Relation::VerticalAlignedLeft:
    case Relation::VerticalAlignedRight:
    case Relation::HorizontalAlignedInALine:
    case Relation::TouchingAlongX:
    case Relation::NearAlongX:
      return Plane::XZ;
    default:
      return Plane::XY;
  }
}

// Fixed arity of a relation; 0 means variadic (minimum operand count below).
inline int relation_arity(Relation r) {
  switch (r) {
    case Relation::LeftIn:
    case Relation::RightIn:
    case Relation::CenterIn:
    case Relation::FrontIn:
    case Relation::BackIn:
      return 1;  // the table operand is implicit
    case Relation::HorizontalAlignedInALine:
    case Relation::DepthAlignedInALine:
    case Relation::RegularGridSparse:
    case Relation::RegularGridCompact:
    case Relation::RandomSplitGridSparse:
    case Relation::RandomSplitGridCompact:
      return 0;
    default:
      return 2;
  }
}

inline int relation_min_operands(Relation r) {
  switch (r) {
    case Relation::HorizontalAlignedInALine:
    case Relation::DepthAlignedInALine:
      return 3;
    case Relation::RegularGridSparse:
    case Relation::RegularGridCompact:
    case Relation::RandomSplitGridSparse:
    case Relation::RandomSplitGridCompact:
      return 2;
    default:
      return relation_arity(r);
  }
}

inline bool is_table_relation(Relation r) { return relation_arity(r) == 1; }

inline const char* relation_name(Relation r) {
  switch (r) {
    case Relation::LeftOf: return "left-of";
    case Relation::LeftIn: return "left-in";
    case Relation::RightIn: return "right-in";
    case Relation::CenterIn: return "center-in";
    case Relation::SupportedByPartially: return "supported-by-partially";
    case Relation::SupportedByFully: return "supported-by-fully";
    case Relation::HorizontalAligned: return "horizontal-aligned";
    case Relation::VerticalAlignedCentroid: return "vertical-aligned-centroid";
    case Relation::VerticalAlignedLeft: return "vertical-aligned-left";
    case Relation::VerticalAlignedRight: return "vertical-aligned-right";
    case Relation::HorizontalAlignedInALine: return "horizontal-aligned-in-a-line";
    case Relation::TouchingAlongX: return "touching-along-x";
    case Relation::NearAlongX: return "near-along-x";
    case Relation::FrontOf: return "front-of";
    case Relation::FrontIn: return "front-in";
    case Relation::BackIn: return "back-in";
    case Relation::TouchingAlongY: return "touching-along-y";
    case Relation::NearAlongY: return "near-along-y";
    case Relation::DepthAligned: return "depth-aligned";
    case Relation::DepthAlignedInALine: return "depth-aligned-in-a-line";
    case Relation::RegularGridSparse: return "regular-grid-sparse";
    case Relation::RegularGridCompact: return "regular-grid-compact";
    case Relation::RandomSplitGridSparse: return "random-split-grid-sparse";
    case Relation::RandomSplitGridCompact: return "random-split-grid-compact";
  }
  return "?";
}

inline Relation relation_from_name(const std::string& name) {
  for (Relation r : all_relations())
    if (name == relation_name(r)) return r;
  throw ParseError("unknown relation name: " + name);
}

// The 10 local stability patterns, plus a sentinel for support components
// that match none of them.
enum class Pattern {
  SingleBlockStack,
  CantileverWithCounterbalance,
  TwoPillarSingleTopBridge,
  NPillarSingleTopBridge,
  SingleBaseNPillarBridge,
  TwoBaseSingleOverheadPyramid,
  NBaseSingleOverheadPyramid,
  SingleBaseNOverheadPyramid,
  NBaseMOverheadPyramid,
  BasicArc,
  Unmatched,
};

constexpr int kNumPatterns = 10;

inline const std::array<Pattern, kNumPatterns>& all_patterns() {
  static const std::array<Pattern, kNumPatterns> p = {
      Pattern::SingleBlockStack,
      Pattern::CantileverWithCounterbalance,
      Pattern::TwoPillarSingleTopBridge,
      Pattern::NPillarSingleTopBridge,
      Pattern::SingleBaseNPillarBridge,
      Pattern::TwoBaseSingleOverheadPyramid,
      Pattern::NBaseSingleOverheadPyramid,
      Pattern::SingleBaseNOverheadPyramid,
      Pattern::NBaseMOverheadPyramid,
      Pattern::BasicArc,
  };
  return p;
}

inline const char* pattern_name(Pattern p) {
  switch (p) {
    case Pattern::SingleBlockStack: return "single-block-stack";
    case Pattern::CantileverWithCounterbalance:
      return "cantilever-with-counterbalance";
    case Pattern::TwoPillarSingleTopBridge: return "two-pillar-single-top-bridge";
    case Pattern::NPillarSingleTopBridge: return "n-pillar-single-top-bridge";
    case Pattern::SingleBaseNPillarBridge: return "single-base-n-pillar-bridge";
    case Pattern::TwoBaseSingleOverheadPyramid:
      return "two-base-single-overhead-pyramid";
    case Pattern::NBaseSingleOverheadPyramid:
      return "n-base-single-overhead-pyramid";
    case Pattern::SingleBaseNOverheadPyramid:
      return "single-base-n-overhead-pyramid";
    case Pattern::NBaseMOverheadPyramid: return "n-base-m-overhead-pyramid";
    case Pattern::BasicArc: return "basic-arc";
    case Pattern::Unmatched: return "unmatched";
  }
  return "?";
}

inline Pattern pattern_from_name(const std::string& name) {
  for (Pattern p : all_patterns())
    if (name == pattern_name(p)) return p;
  if (name == "unmatched") return Pattern::Unmatched;
  throw ParseError("unknown pattern name: " + name);
}

// --- classifier rules --------------------------------------------------------

namespace rules {

inline double y_overlap(const Box3& a, const Box3& b) {
  return interval_overlap(a.min.y, a.max.y, b.min.y, b.max.y);
}
inline double x_overlap(const Box3& a, const Box3& b) {
  return interval_overlap(a.min.x, a.max.x, b.min.x, b.max.x);
}
inline double min_depth(const Box3& a, const Box3& b) {
  return std::min(a.depth(), b.depth());
}
inline double min_width(const Box3& a, const Box3& b) {
  return std::min(a.width(), b.width());
}
inline bool same_z_level(const Box3& a, const Box3& b, double eps) {
  return std::abs(a.base_z() - b.base_z()) < eps;
}
inline bool contact_z(const Box3& upper, const Box3& lower, double eps) {
  return std::abs(upper.base_z() - lower.top_z()) <= eps;
}

inline bool left_of(const Box3& a, const Box3& b, const ClassifierConfig& c) {
  return a.right_x() <= b.left_x() + c.eps &&
         std::abs(b.left_x() - a.right_x()) < c.gap &&
         y_overlap(a, b) > c.alpha * min_depth(a, b) && same_z_level(a, b, c.eps);
}

inline bool left_in(const Box3& o, const Workspace& ws) {
  return o.right_x() < ws.center_x();
}
inline bool right_in(const Box3& o, const Workspace& ws) {
  return o.left_x() > ws.center_x();
}
inline bool center_in(const Box3& o, const Workspace& ws,
                      const ClassifierConfig& c) {
  return std::abs(o.center_x() - ws.center_x()) < c.eps &&
         std::abs(o.center_y() - ws.center_y()) < c.eps;
}

// "Fully supported" accepts containment in either direction: a small block
// resting entirely on a large one, or a slab whose footprint covers the whole
// top face of its support (the bridge/pillar case).
inline bool supported_by_fully(const Box3& a, const Box3& b,
                               const ClassifierConfig& c) {
  if (!contact_z(a, b, c.eps)) return false;
  const Rect2 fa = a.footprint(), fb = b.footprint();
  if (overlap_area(fa, fb) <= 0.0) return false;
  return fb.contains_rect(fa, c.eps) || fa.contains_rect(fb, c.eps);
}

inline bool supported_by_partially(const Box3& a, const Box3& b,
                                   const ClassifierConfig& c) {
  if (!contact_z(a, b, c.eps)) return false;
  const Rect2 fa = a.footprint(), fb = b.footprint();
  if (overlap_area(fa, fb) <= 0.0) return false;
  return !(fb.contains_rect(fa, c.eps) || fa.contains_rect(fb, c.eps));
}

inline bool horizontal_aligned(const Box3& a, const Box3& b,
                               const ClassifierConfig& c) {
  return std::abs(a.center_y() - b.center_y()) < c.eps ||
         std::abs(a.front_y() - b.front_y()) < c.eps ||
         std::abs(a.back_y() - b.back_y()) < c.eps;
}

inline bool vertical_aligned_centroid(const Box3& a, const Box3& b,
                                      const ClassifierConfig& c) {
  return contact_z(a, b, c.eps) &&
         std::hypot(a.center_x() - b.center_x(), a.center_y() - b.center_y()) <
             c.eps;
}

inline bool vertical_aligned_left(const Box3& a, const Box3& b,
                                  const ClassifierConfig& c) {
  return contact_z(a, b, c.eps) && std::abs(a.left_x() - b.left_x()) < c.eps &&
         y_overlap(a, b) > c.alpha * min_depth(a, b);
}

inline bool vertical_aligned_right(const Box3& a, const Box3& b,
                                   const ClassifierConfig& c) {
  return contact_z(a, b, c.eps) && std::abs(a.right_x() - b.right_x()) < c.eps &&
         y_overlap(a, b) > c.alpha * min_depth(a, b);
}

inline bool touching_along_x(const Box3& a, const Box3& b,
                             const ClassifierConfig& c) {
  return std::abs(a.right_x() - b.left_x()) < c.eps &&
         y_overlap(a, b) > c.alpha * min_depth(a, b);
}

inline bool near_along_x(const Box3& a, const Box3& b,
                         const ClassifierConfig& c) {
  const double gap_x = b.left_x() - a.right_x();
  return gap_x >= c.eps && gap_x < c.d_near &&
         y_overlap(a, b) > c.alpha * min_depth(a, b) && same_z_level(a, b, c.eps);
}

inline bool front_of(const Box3& a, const Box3& b, const ClassifierConfig& c) {
  return a.back_y() <= b.front_y() + c.eps &&
         std::abs(b.front_y() - a.back_y()) < c.gap &&
         x_overlap(a, b) > c.beta * min_width(a, b) && same_z_level(a, b, c.eps);
}

inline bool front_in(const Box3& o, const Workspace& ws) {
  return o.back_y() < ws.center_y();
}
inline bool back_in(const Box3& o, const Workspace& ws) {
  return o.front_y() > ws.center_y();
}

inline bool touching_along_y(const Box3& a, const Box3& b,
                             const ClassifierConfig& c) {
  return std::abs(a.back_y() - b.front_y()) < c.eps &&
         x_overlap(a, b) > c.alpha * min_width(a, b);
}

inline bool near_along_y(const Box3& a, const Box3& b,
                         const ClassifierConfig& c) {
  const double gap_y = b.front_y() - a.back_y();
  return gap_y >= c.eps && gap_y < c.d_near &&
         x_overlap(a, b) > c.alpha * min_width(a, b);
}

inline bool depth_aligned(const Box3& a, const Box3& b,
                          const ClassifierConfig& c) {
  return std::abs(a.center_x() - b.center_x()) < c.eps ||
         std::abs(a.left_x() - b.left_x()) < c.eps ||
         std::abs(a.right_x() - b.right_x()) < c.eps;
}

inline bool spacing_regular(const std::vector<double>& centers, double rel_tol) {
  if (centers.size() < 2) return true;
  std::vector<double> gaps;
  for (std::size_t i = 1; i < centers.size(); ++i)
    gaps.push_back(centers[i] - centers[i - 1]);
  const double mean =
      std::accumulate(gaps.begin(), gaps.end(), 0.0) / gaps.size();
  if (mean <= 0.0) return false;
  for (double g : gaps)
    if (std::abs(g - mean) > rel_tol * mean) return false;
  return true;
}

inline bool horizontal_line(std::vector<Box3> boxes, const ClassifierConfig& c) {
  if (boxes.size() < 3) return false;
  for (std::size_t i = 0; i < boxes.size(); ++i)
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      if (std::abs(boxes[i].center_y() - boxes[j].center_y()) >= c.eps)
        return false;
      if (std::abs(boxes[i].base_z() - boxes[j].base_z()) >= c.eps)
        return false;
    }
  std::sort(boxes.begin(), boxes.end(),
            [](const Box3& a, const Box3& b) { return a.center_x() < b.center_x(); });
  std::vector<double> xs;
  for (const Box3& b : boxes) xs.push_back(b.center_x());
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] - xs[i - 1] <= 0.0) return false;
  return spacing_regular(xs, c.grid_reg_tol);
}

inline bool depth_line(std::vector<Box3> boxes, const ClassifierConfig& c) {
  if (boxes.size() < 3) return false;
  for (std::size_t i = 0; i < boxes.size(); ++i)
    for (std::size_t j = i + 1; j < boxes.size(); ++j)
      if (std::abs(boxes[i].center_x() - boxes[j].center_x()) >= c.eps)
        return false;
  std::sort(boxes.begin(), boxes.end(),
            [](const Box3& a, const Box3& b) { return a.center_y() < b.center_y(); });
  std::vector<double> ys;
  for (const Box3& b : boxes) ys.push_back(b.center_y());
  for (std::size_t i = 1; i < ys.size(); ++i)
    if (ys[i] - ys[i - 1] <= 0.0) return false;
  return spacing_regular(ys, c.grid_reg_tol);
}

struct GridInfo {
  bool similar_size = false;
  bool complete = false;  // every (row, col) cell occupied exactly once
  bool regular = false;   // row and column pitches within tolerance
  double min_adjacent_gap = 0.0;
  double max_adjacent_gap = 0.0;
  double fill = 0.0;  // sum of footprints over group bounding box
  int rows = 0, cols = 0;
};

inline std::vector<double> cluster_centers(std::vector<double> vals, double tol,
                                           std::vector<int>* assignment) {
  std::vector<std::size_t> order(vals.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
  std::vector<double> centers;
  assignment->assign(vals.size(), -1);
  for (std::size_t k : order) {
    if (!centers.empty() && vals[k] - centers.back() < tol) {
      (*assignment)[k] = static_cast<int>(centers.size()) - 1;
    } else {
      centers.push_back(vals[k]);
      (*assignment)[k] = static_cast<int>(centers.size()) - 1;
    }
  }
  return centers;
}

inline GridInfo grid_info(const std::vector<Box3>& boxes,
                          const ClassifierConfig& c) {
  GridInfo g;
  const std::size_t n = boxes.size();
  if (n < 2) return g;

  double max_w = 0, min_w = 1e18, max_l = 0, min_l = 1e18;
  double area_sum = 0;
  Rect2 bbox = boxes[0].footprint();
  for (const Box3& b : boxes) {
    max_w = std::max(max_w, b.width());
    min_w = std::min(min_w, b.width());
    max_l = std::max(max_l, b.depth());
    min_l = std::min(min_l, b.depth());
    area_sum += b.footprint().area();
    bbox.min_x = std::min(bbox.min_x, b.min.x);
    bbox.max_x = std::max(bbox.max_x, b.max.x);
    bbox.min_y = std::min(bbox.min_y, b.min.y);
    bbox.max_y = std::max(bbox.max_y, b.max.y);
  }
  g.similar_size = (max_w - min_w) <= c.grid_reg_tol * max_w &&
                   (max_l - min_l) <= c.grid_reg_tol * max_l;
  g.fill = bbox.area() > 0 ? area_sum / bbox.area() : 0.0;

  std::vector<double> xs, ys;
  for (const Box3& b : boxes) {
    xs.push_back(b.center_x());
    ys.push_back(b.center_y());
  }
  std::vector<int> col_of, row_of;
  const std::vector<double> col_centers = cluster_centers(xs, c.eps, &col_of);
  const std::vector<double> row_centers = cluster_centers(ys, c.eps, &row_of);
  g.cols = static_cast<int>(col_centers.size());
  g.rows = static_cast<int>(row_centers.size());

  std::set<std::pair<int, int>> cells;
  for (std::size_t i = 0; i < n; ++i)
    if (!cells.insert({row_of[i], col_of[i]}).second) return g;  // doubled cell
  g.complete = cells.size() == static_cast<std::size_t>(g.rows) *
                                   static_cast<std::size_t>(g.cols) &&
               cells.size() == n;
  g.regular = spacing_regular(col_centers, c.grid_reg_tol) &&
              spacing_regular(row_centers, c.grid_reg_tol);

  // Face gaps between grid-adjacent blocks, along columns within each row and
  // along rows within each column.
  double min_gap = 1e18, max_gap = -1e18;
  auto consider = [&](double gap) {
    min_gap = std::min(min_gap, gap);
    max_gap = std::max(max_gap, gap);
  };
  std::map<std::pair<int, int>, std::size_t> at;
  for (std::size_t i = 0; i < n; ++i) at[{row_of[i], col_of[i]}] = i;
  for (int r = 0; r < g.rows; ++r)
    for (int col = 0; col + 1 < g.cols; ++col) {
      auto a = at.find({r, col}), b = at.find({r, col + 1});
      if (a == at.end() || b == at.end()) continue;
      consider(boxes[b->second].left_x() - boxes[a->second].right_x());
    }
  for (int col = 0; col < g.cols; ++col)
    for (int r = 0; r + 1 < g.rows; ++r) {
      auto a = at.find({r, col}), b = at.find({r + 1, col});
      if (a == at.end() || b == at.end()) continue;
      consider(boxes[b->second].front_y() - boxes[a->second].back_y());
    }
  if (max_gap >= min_gap) {
    g.min_adjacent_gap = min_gap;
    g.max_adjacent_gap = max_gap;
  }
  return g;
}

inline bool regular_grid_sparse(const std::vector<Box3>& boxes,
                                const ClassifierConfig& c) {
  if (boxes.size() < 2) return false;
  const GridInfo g = grid_info(boxes, c);
  return g.similar_size && g.complete && g.regular &&
         g.min_adjacent_gap > c.touch_eps;
}

inline bool regular_grid_compact(const std::vector<Box3>& boxes,
                                 const ClassifierConfig& c) {
  if (boxes.size() < 2) return false;
  const GridInfo g = grid_info(boxes, c);
  return g.similar_size && g.complete && g.regular &&
         g.max_adjacent_gap <= c.touch_eps && g.fill >= 0.95;
}

// The random-split variants cover dense but irregular tilings.  Fill
// thresholds: >= 0.90 for sparse, >= 0.95 for compact, both requiring that
// the group is not a regular grid.
inline bool random_split_grid_sparse(const std::vector<Box3>& boxes,
                                     const ClassifierConfig& c) {
  if (boxes.size() < 2) return false;
  if (regular_grid_sparse(boxes, c) || regular_grid_compact(boxes, c))
    return false;
  const GridInfo g = grid_info(boxes, c);
  return g.fill >= 0.90 && g.fill < 0.95;
}

inline bool random_split_grid_compact(const std::vector<Box3>& boxes,
                                      const ClassifierConfig& c) {
  if (boxes.size() < 2) return false;
  if (regular_grid_sparse(boxes, c) || regular_grid_compact(boxes, c))
    return false;
  const GridInfo g = grid_info(boxes, c);
  return g.fill >= 0.95;
}

}  // namespace rules

// Evaluates a relation on operand boxes.  Table-relative relations take one
// operand plus the workspace.  Throws ArityError on operand-count mismatch.
inline bool eval_geom(Relation rel, const std::vector<Box3>& operands,
                      const ClassifierConfig& cfg,
                      const Workspace& ws = Workspace{}) {
  const int arity = relation_arity(rel);
  if (arity > 0 && static_cast<int>(operands.size()) != arity)
    throw ArityError(std::string("relation ") + relation_name(rel) +
                     " expects " + std::to_string(arity) + " operands, got " +
                     std::to_string(operands.size()));
  if (arity == 0 &&
      static_cast<int>(operands.size()) < relation_min_operands(rel))
    throw ArityError(std::string("relation ") + relation_name(rel) +
                     " expects at least " +
                     std::to_string(relation_min_operands(rel)) + " operands");
  using namespace rules;
  switch (rel) {
    case Relation::LeftOf: return left_of(operands[0], operands[1], cfg);
    case Relation::LeftIn: return left_in(operands[0], ws);
    case Relation::RightIn: return right_in(operands[0], ws);
    case Relation::CenterIn: return center_in(operands[0], ws, cfg);
    case Relation::SupportedByPartially:
      return supported_by_partially(operands[0], operands[1], cfg);
    case Relation::SupportedByFully:
      return supported_by_fully(operands[0], operands[1], cfg);
    case Relation::HorizontalAligned:
      return horizontal_aligned(operands[0], operands[1], cfg);
    case Relation::VerticalAlignedCentroid:
      return vertical_aligned_centroid(operands[0], operands[1], cfg);
    case Relation::VerticalAlignedLeft:
      return vertical_aligned_left(operands[0], operands[1], cfg);
    case Relation::VerticalAlignedRight:
      return vertical_aligned_right(operands[0], operands[1], cfg);
    case Relation::HorizontalAlignedInALine:
      return horizontal_line(operands, cfg);
    case Relation::TouchingAlongX:
      return touching_along_x(operands[0], operands[1], cfg);
    case Relation::NearAlongX: return near_along_x(operands[0], operands[1], cfg);
    case Relation::FrontOf: return front_of(operands[0], operands[1], cfg);
    case Relation::FrontIn: return front_in(operands[0], ws);
    case Relation::BackIn: return back_in(operands[0], ws);
    case Relation::TouchingAlongY:
      return touching_along_y(operands[0], operands[1], cfg);
    case Relation::NearAlongY: return near_along_y(operands[0], operands[1], cfg);
    case Relation::DepthAligned:
      return depth_aligned(operands[0], operands[1], cfg);
    case Relation::DepthAlignedInALine: return depth_line(operands, cfg);
    case Relation::RegularGridSparse: return regular_grid_sparse(operands, cfg);
    case Relation::RegularGridCompact: return regular_grid_compact(operands, cfg);
    case Relation::RandomSplitGridSparse:
      return random_split_grid_sparse(operands, cfg);
    case Relation::RandomSplitGridCompact:
      return random_split_grid_compact(operands, cfg);
  }
  return false;
}

// --- relation graph ----------------------------------------------------------

struct GraphNode {
  int id = 0;
  int type_id = 0;
  bool hidden = false;
};

struct RelationEdge {
  Relation rel;
  std::vector<int> operands;

  bool operator==(const RelationEdge& o) const {
    return rel == o.rel && operands == o.operands;
  }
  bool operator<(const RelationEdge& o) const {
    if (rel != o.rel) return rel < o.rel;
    return operands < o.operands;
  }
};

struct PatternEdge {
  Pattern pattern = Pattern::Unmatched;
  std::vector<int> base_ids;
  std::vector<int> top_ids;

  bool operator==(const PatternEdge& o) const {
    return pattern == o.pattern && base_ids == o.base_ids && top_ids == o.top_ids;
  }
  bool operator<(const PatternEdge& o) const {
    if (pattern != o.pattern) return pattern < o.pattern;
    if (base_ids != o.base_ids) return base_ids < o.base_ids;
    return top_ids < o.top_ids;
  }
};

struct RelationGraph {
  std::vector<GraphNode> nodes;
  std::vector<RelationEdge> geom_edges;
  std::vector<PatternEdge> stab_edges;

  const GraphNode* find_node(int id) const {
    for (const GraphNode& n : nodes)
      if (n.id == id) return &n;
    return nullptr;
  }

  bool has_geom_edge(Relation rel, const std::vector<int>& operands) const {
    return std::find(geom_edges.begin(), geom_edges.end(),
                     RelationEdge{rel, operands}) != geom_edges.end();
  }

  // True when an edge of `rel` exists in either operand order (for the
  // pairwise relations whose rule fixes the orientation geometrically).
  bool has_pair_edge_any_order(Relation rel, int a, int b) const {
    return has_geom_edge(rel, {a, b}) || has_geom_edge(rel, {b, a});
  }

  void add_geom_edge(Relation rel, std::vector<int> operands) {
    RelationEdge e{rel, std::move(operands)};
    if (std::find(geom_edges.begin(), geom_edges.end(), e) == geom_edges.end())
      geom_edges.push_back(std::move(e));
  }

  void canonicalize() {
    std::sort(nodes.begin(), nodes.end(),
              [](const GraphNode& a, const GraphNode& b) { return a.id < b.id; });
    std::sort(geom_edges.begin(), geom_edges.end());
    geom_edges.erase(std::unique(geom_edges.begin(), geom_edges.end()),
                     geom_edges.end());
    std::sort(stab_edges.begin(), stab_edges.end());
    stab_edges.erase(std::unique(stab_edges.begin(), stab_edges.end()),
                     stab_edges.end());
  }
};

inline bool same_geom_edges(RelationGraph a, RelationGraph b) {
  a.canonicalize();
  b.canonicalize();
  return a.geom_edges == b.geom_edges;
}

inline json graph_to_json(const RelationGraph& g) {
  json j;
  json nodes = json::array();
  for (const GraphNode& n : g.nodes)
    nodes.push_back(json{{"id", n.id}, {"type_id", n.type_id}, {"hidden", n.hidden}});
  j["nodes"] = nodes;
  json geom = json::array();
  for (const RelationEdge& e : g.geom_edges)
    geom.push_back(json{{"rel", relation_name(e.rel)}, {"operands", e.operands}});
  j["geom_edges"] = geom;
  json stab = json::array();
  for (const PatternEdge& e : g.stab_edges)
    stab.push_back(json{{"pattern", pattern_name(e.pattern)},
                        {"bases", e.base_ids},
                        {"tops", e.top_ids}});
  j["stab_edges"] = stab;
  return j;
}

inline RelationGraph graph_from_json(const json& j) {
  RelationGraph g;
  for (const json& n : j.at("nodes"))
    g.nodes.push_back({n.at("id"), n.at("type_id"), n.value("hidden", false)});
  for (const json& e : j.at("geom_edges"))
    g.geom_edges.push_back(
        {relation_from_name(e.at("rel")), e.at("operands").get<std::vector<int>>()});
  if (j.contains("stab_edges"))
    for (const json& e : j.at("stab_edges"))
      g.stab_edges.push_back({pattern_from_name(e.at("pattern")),
                              e.at("bases").get<std::vector<int>>(),
                              e.at("tops").get<std::vector<int>>()});
  return g;
}

// --- extraction --------------------------------------------------------------

namespace detail {

// Clusters indices by a scalar key within `tol` (transitively, sorted order).
inline std::vector<std::vector<std::size_t>> cluster_by(
    const std::vector<double>& keys, double tol) {
  std::vector<std::size_t> order(keys.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t k : order) {
    if (!groups.empty() && keys[k] - keys[groups.back().back()] < tol)
      groups.back().push_back(k);
    else
      groups.push_back({k});
  }
  return groups;
}

// Maximal runs of regularly spaced centers (>= 3 long) within a sorted list.
inline std::vector<std::vector<std::size_t>> maximal_regular_runs(
    const std::vector<double>& centers, const std::vector<std::size_t>& idx,
    double rel_tol) {
  std::vector<std::vector<std::size_t>> runs;
  const std::size_t n = idx.size();
  for (std::size_t start = 0; start + 2 < n; ++start) {
    std::size_t end = start + 1;
    const double first_gap = centers[idx[end]] - centers[idx[start]];
    if (first_gap <= 0) continue;
    while (end + 1 < n) {
      const double g = centers[idx[end + 1]] - centers[idx[end]];
      if (g <= 0 || std::abs(g - first_gap) > rel_tol * first_gap) break;
      ++end;
    }
    if (end - start + 1 >= 3) {
      std::vector<std::size_t> run(idx.begin() + start, idx.begin() + end + 1);
      // keep only maximal runs
      bool contained = false;
      for (const auto& r : runs)
        if (std::includes(r.begin(), r.end(), run.begin(), run.end()))
          contained = true;
      if (!contained) runs.push_back(std::move(run));
    }
  }
  return runs;
}

struct OperandSet {
  std::vector<int> ids;
  std::vector<Box3> boxes;
};

inline void emit_pair_relations(RelationGraph& g, const std::vector<int>& ids,
                                const std::vector<Box3>& boxes,
                                const ClassifierConfig& cfg, const Workspace& ws,
                                bool include_xy) {
  const std::size_t n = ids.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<Box3> solo{boxes[i]};
    if (eval_geom(Relation::LeftIn, solo, cfg, ws))
      g.add_geom_edge(Relation::LeftIn, {ids[i]});
    if (eval_geom(Relation::RightIn, solo, cfg, ws))
      g.add_geom_edge(Relation::RightIn, {ids[i]});
    if (eval_geom(Relation::CenterIn, solo, cfg, ws))
      g.add_geom_edge(Relation::CenterIn, {ids[i]});
    if (include_xy) {
      if (eval_geom(Relation::FrontIn, solo, cfg, ws))
        g.add_geom_edge(Relation::FrontIn, {ids[i]});
      if (eval_geom(Relation::BackIn, solo, cfg, ws))
        g.add_geom_edge(Relation::BackIn, {ids[i]});
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const std::vector<Box3> ops{boxes[i], boxes[j]};
      const std::vector<int> ids_ij{ids[i], ids[j]};
      // Ordered relations: emit every true ordered pair.
      if (eval_geom(Relation::LeftOf, ops, cfg, ws))
        g.add_geom_edge(Relation::LeftOf, ids_ij);
      if (eval_geom(Relation::SupportedByFully, ops, cfg, ws))
        g.add_geom_edge(Relation::SupportedByFully, ids_ij);
      if (eval_geom(Relation::SupportedByPartially, ops, cfg, ws))
        g.add_geom_edge(Relation::SupportedByPartially, ids_ij);
      if (eval_geom(Relation::VerticalAlignedCentroid, ops, cfg, ws))
        g.add_geom_edge(Relation::VerticalAlignedCentroid, ids_ij);
      if (eval_geom(Relation::VerticalAlignedLeft, ops, cfg, ws))
        g.add_geom_edge(Relation::VerticalAlignedLeft, ids_ij);
      if (eval_geom(Relation::VerticalAlignedRight, ops, cfg, ws))
        g.add_geom_edge(Relation::VerticalAlignedRight, ids_ij);
      if (eval_geom(Relation::TouchingAlongX, ops, cfg, ws))
        g.add_geom_edge(Relation::TouchingAlongX, ids_ij);
      if (eval_geom(Relation::NearAlongX, ops, cfg, ws))
        g.add_geom_edge(Relation::NearAlongX, ids_ij);
      // Symmetric relations: canonical operand order is ascending id.
      const std::vector<int> ids_sorted{std::min(ids[i], ids[j]),
                                        std::max(ids[i], ids[j])};
      if (i < j && eval_geom(Relation::HorizontalAligned, ops, cfg, ws))
        g.add_geom_edge(Relation::HorizontalAligned, ids_sorted);
      if (include_xy) {
        if (eval_geom(Relation::FrontOf, ops, cfg, ws))
          g.add_geom_edge(Relation::FrontOf, ids_ij);
        if (eval_geom(Relation::TouchingAlongY, ops, cfg, ws))
          g.add_geom_edge(Relation::TouchingAlongY, ids_ij);
        if (eval_geom(Relation::NearAlongY, ops, cfg, ws))
          g.add_geom_edge(Relation::NearAlongY, ids_ij);
        if (i < j && eval_geom(Relation::DepthAligned, ops, cfg, ws))
          g.add_geom_edge(Relation::DepthAligned, ids_sorted);
      }
    }
}

// Line and grid edges are extracted per z-tier with maximal operand groups.
inline void emit_group_relations(RelationGraph& g, const std::vector<int>& ids,
                                 const std::vector<Box3>& boxes,
                                 const ClassifierConfig& cfg, const Workspace& ws,
                                 bool include_xy) {
  std::vector<double> base_zs;
  for (const Box3& b : boxes) base_zs.push_back(b.base_z());
  for (const auto& tier : cluster_by(base_zs, cfg.eps)) {
    // horizontal-aligned-in-a-line: same y cluster, maximal regular x-runs
    std::vector<double> tier_y;
    for (std::size_t k : tier) tier_y.push_back(boxes[k].center_y());
    std::vector<std::vector<std::size_t>> ygroups;
    {
      std::vector<std::vector<std::size_t>> local = cluster_by(tier_y, cfg.eps);
      for (auto& grp : local) {
        for (auto& k : grp) k = tier[k];
        ygroups.push_back(grp);
      }
    }
    for (const auto& grp : ygroups) {
      if (grp.size() < 3) continue;
      std::vector<std::size_t> idx(grp);
      std::vector<double> cx(boxes.size());
      for (std::size_t k : idx) cx[k] = boxes[k].center_x();
      std::sort(idx.begin(), idx.end(),
                [&](std::size_t a, std::size_t b) { return cx[a] < cx[b]; });
      for (const auto& run : maximal_regular_runs(cx, idx, cfg.grid_reg_tol)) {
        std::vector<Box3> ops;
        std::vector<int> eids;
        for (std::size_t k : run) {
          ops.push_back(boxes[k]);
          eids.push_back(ids[k]);
        }
        if (eval_geom(Relation::HorizontalAlignedInALine, ops, cfg, ws))
          g.add_geom_edge(Relation::HorizontalAlignedInALine, eids);
      }
    }
    if (!include_xy) continue;

    // depth-aligned-in-a-line: same x cluster, maximal regular y-runs
    std::vector<double> tier_x;
    for (std::size_t k : tier) tier_x.push_back(boxes[k].center_x());
    {
      std::vector<std::vector<std::size_t>> local = cluster_by(tier_x, cfg.eps);
      for (auto& grp : local) {
        for (auto& k : grp) k = tier[k];
        if (grp.size() < 3) continue;
        std::vector<double> cy(boxes.size());
        for (std::size_t k : grp) cy[k] = boxes[k].center_y();
        std::sort(grp.begin(), grp.end(),
                  [&](std::size_t a, std::size_t b) { return cy[a] < cy[b]; });
        for (const auto& run : maximal_regular_runs(cy, grp, cfg.grid_reg_tol)) {
          std::vector<Box3> ops;
          std::vector<int> eids;
          for (std::size_t k : run) {
            ops.push_back(boxes[k]);
            eids.push_back(ids[k]);
          }
          if (eval_geom(Relation::DepthAlignedInALine, ops, cfg, ws))
            g.add_geom_edge(Relation::DepthAlignedInALine, eids);
        }
      }
    }

    // Grid relations over the whole tier, split into similar-size groups.
    if (tier.size() < 2) continue;
    std::vector<double> sizes;
    for (std::size_t k : tier) sizes.push_back(boxes[k].width() * boxes[k].depth());
    std::vector<std::vector<std::size_t>> size_groups;
    {
      std::vector<std::vector<std::size_t>> local =
          cluster_by(sizes, cfg.grid_reg_tol * (*std::max_element(sizes.begin(),
                                                                  sizes.end())));
      for (auto& grp : local) {
        for (auto& k : grp) k = tier[k];
        size_groups.push_back(grp);
      }
    }
    auto try_group = [&](const std::vector<std::size_t>& grp) {
      if (grp.size() < 2) return;
      std::vector<Box3> ops;
      std::vector<std::pair<std::pair<double, double>, int>> keyed;
      for (std::size_t k : grp)
        keyed.push_back({{boxes[k].center_y(), boxes[k].center_x()}, ids[k]});
      std::sort(keyed.begin(), keyed.end());
      std::vector<int> eids;
      for (const auto& [key, id] : keyed) {
        eids.push_back(id);
        (void)key;
      }
      for (std::size_t k : grp) ops.push_back(boxes[k]);
      std::sort(ops.begin(), ops.end(), [](const Box3& a, const Box3& b) {
        if (a.center_y() != b.center_y()) return a.center_y() < b.center_y();
        return a.center_x() < b.center_x();
      });
      for (Relation rel : {Relation::RegularGridSparse, Relation::RegularGridCompact,
                           Relation::RandomSplitGridSparse,
                           Relation::RandomSplitGridCompact})
        if (eval_geom(rel, ops, cfg, ws)) g.add_geom_edge(rel, eids);
    };
    for (const auto& grp : size_groups) try_group(grp);
    // The random-split relations also admit mixed sizes; try the full tier.
    if (size_groups.size() > 1) {
      std::vector<std::size_t> whole(tier);
      std::vector<Box3> ops;
      std::vector<std::pair<std::pair<double, double>, int>> keyed;
      for (std::size_t k : whole) {
        ops.push_back(boxes[k]);
        keyed.push_back({{boxes[k].center_y(), boxes[k].center_x()}, ids[k]});
      }
      std::sort(keyed.begin(), keyed.end());
      std::vector<int> eids;
      for (const auto& [key, id] : keyed) {
        eids.push_back(id);
        (void)key;
      }
      for (Relation rel :
           {Relation::RandomSplitGridSparse, Relation::RandomSplitGridCompact})
        if (eval_geom(rel, ops, cfg, ws)) g.add_geom_edge(rel, eids);
    }
  }
}

}  // namespace detail

// Relation extraction over explicit (id, box) lists.  `include_xy` is false
// for front-view (sketch) graphs, true for full 3D scene graphs.
inline RelationGraph extract_graph_from_boxes(const std::vector<GraphNode>& nodes,
                                              const std::vector<Box3>& boxes,
                                              const ClassifierConfig& cfg,
                                              const Workspace& ws,
                                              bool include_xy) {
  RelationGraph g;
  g.nodes = nodes;
  std::vector<int> ids;
  for (const GraphNode& n : nodes) ids.push_back(n.id);
  detail::emit_pair_relations(g, ids, boxes, cfg, ws, include_xy);
  detail::emit_group_relations(g, ids, boxes, cfg, ws, include_xy);
  g.canonicalize();
  return g;
}

inline RelationGraph extract_scene_graph(const Scene& scene,
                                         const ClassifierConfig& cfg) {
  std::vector<GraphNode> nodes;
  std::vector<Box3> boxes;
  for (const BlockInstance& b : scene.blocks) {
    nodes.push_back({b.id, b.type_id, b.hidden});
    boxes.push_back(aabb(b, scene.library));
  }
  return extract_graph_from_boxes(nodes, boxes, cfg, scene.bounds, true);
}

// Front-view box of a scene block: true x/z extents, full workspace depth.
inline Box3 frontview_box(const Box3& b, const Workspace& ws) {
  Box3 out = b;
  out.min.y = ws.min_y;
  out.max.y = ws.max_y;
  return out;
}

// Fraction of the sketch graph's front-view edges satisfied by the scene seen
// from the front.  Hidden blocks never participate (sketch edges only ever
// reference visible ids).
inline double resemblance(const RelationGraph& sketch_graph, const Scene& scene,
                          const ClassifierConfig& cfg) {
  int total = 0, satisfied = 0;
  for (const RelationEdge& e : sketch_graph.geom_edges) {
    if (relation_plane(e.rel) != Plane::XZ) continue;
    std::vector<Box3> ops;
    for (int id : e.operands) {
      const BlockInstance* b = scene.find_block(id);
      if (b == nullptr)
        throw MappingError("sketch node " + std::to_string(id) +
                           " has no corresponding scene block");
      ops.push_back(frontview_box(aabb(*b, scene.library), scene.bounds));
    }
    ++total;
    if (eval_geom(e.rel, ops, cfg, scene.bounds)) ++satisfied;
  }
  if (total == 0) return 1.0;
  return static_cast<double>(satisfied) / total;
}

}  // namespace sketchstack
