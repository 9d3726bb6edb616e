#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "sketchstack/config.hpp"
#include "sketchstack/core.hpp"

namespace sketchstack {

constexpr int kTableId = -1;

// Horizontal face contact between an upper block and its support (the table
// when lower_id == kTableId).
struct Contact {
  int upper_id = 0;
  int lower_id = kTableId;
  double z = 0.0;   // contact height
  Rect2 patch;      // x-y overlap rectangle at z
  std::array<std::pair<double, double>, 4> corners;  // (x, y) positions
};

inline std::array<std::pair<double, double>, 4> rect_corners(const Rect2& r) {
  return {{{r.min_x, r.min_y},
           {r.max_x, r.min_y},
           {r.min_x, r.max_y},
           {r.max_x, r.max_y}}};
}

inline std::vector<Contact> extract_contacts(const Scene& scene,
                                             double contact_tol) {
  std::vector<Contact> contacts;
  std::vector<Box3> boxes;
  for (const BlockInstance& b : scene.blocks)
    boxes.push_back(aabb(b, scene.library));
  const Box3 table = table_box(scene.library);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (boxes[i].base_z() <= contact_tol) {
      const Rect2 patch = intersect(boxes[i].footprint(), table.footprint());
      if (patch.area() > 0)
        contacts.push_back({scene.blocks[i].id, kTableId, 0.0, patch,
                            rect_corners(patch)});
    }
    for (std::size_t j = 0; j < boxes.size(); ++j) {
      if (i == j) continue;
      if (std::abs(boxes[i].base_z() - boxes[j].top_z()) > contact_tol) continue;
      const Rect2 patch = intersect(boxes[i].footprint(), boxes[j].footprint());
      if (patch.area() <= 0) continue;
      contacts.push_back({scene.blocks[i].id, scene.blocks[j].id,
                          boxes[j].top_z(), patch, rect_corners(patch)});
    }
  }
  return contacts;
}

struct StabilityReport {
  bool feasible = false;
  std::set<int> survivors;
  std::vector<Contact> contacts;
  std::vector<double> forces;  // one per contact corner when feasible
  std::vector<int> unsupported;  // blocks with no contact path to the table
};

namespace lpdetail {

// Phase-1 simplex with Bland's rule: returns the minimal sum of artificial
// variables for A x = b, x >= 0 (b flipped non-negative internally), and the
// solution x when that minimum is ~0.
struct Phase1Result {
  double objective = 0.0;
  std::vector<double> x;
};

inline Phase1Result phase1_feasible(std::vector<std::vector<double>> a,
                                    std::vector<double> b) {
  const std::size_t m = a.size();
  const std::size_t n = m == 0 ? 0 : a[0].size();
  constexpr double kPivTol = 1e-10;
  for (std::size_t r = 0; r < m; ++r)
    if (b[r] < 0) {
      b[r] = -b[r];
      for (double& v : a[r]) v = -v;
    }
  // columns: n structural + m artificial, artificial basis to start
  std::vector<std::size_t> basis(m);
  for (std::size_t r = 0; r < m; ++r) basis[r] = n + r;
  // z_j - c_j row for the min-sum-artificial objective
  std::vector<double> z(n + m, 0.0);
  double z_rhs = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) z[c] += a[r][c];
    z_rhs += b[r];
  }
  // artificial columns: z_j - c_j = 1 - 1 = 0 initially
  auto col_val = [&](std::size_t r, std::size_t c) -> double {
    if (c < n) return a[r][c];
    return c - n == r ? 1.0 : 0.0;  // valid only before artificial pivots
  };
  // Keep an explicit tableau including artificial columns for simplicity.
  std::vector<std::vector<double>> t(m, std::vector<double>(n + m, 0.0));
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n + m; ++c) t[r][c] = col_val(r, c);
  (void)col_val;

  const std::size_t max_iters = 50 * (n + m + 1);
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    // Bland: smallest index with positive reduced cost
    std::size_t enter = n + m;
    for (std::size_t c = 0; c < n + m; ++c)
      if (z[c] > 1e-9) {
        enter = c;
        break;
      }
    if (enter == n + m) break;
    // ratio test, Bland tie-break on basis index
    std::size_t leave = m;
    double best_ratio = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      if (t[r][enter] <= kPivTol) continue;
      const double ratio = b[r] / t[r][enter];
      if (leave == m || ratio < best_ratio - 1e-12 ||
          (std::abs(ratio - best_ratio) <= 1e-12 && basis[r] < basis[leave])) {
        leave = r;
        best_ratio = ratio;
      }
    }
    if (leave == m) break;  // unbounded never happens for phase 1
    const double piv = t[leave][enter];
    for (double& v : t[leave]) v /= piv;
    b[leave] /= piv;
    for (std::size_t r = 0; r < m; ++r) {
      if (r == leave) continue;
      const double f = t[r][enter];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n + m; ++c) t[r][c] -= f * t[leave][c];
      b[r] -= f * b[leave];
    }
    const double fz = z[enter];
    for (std::size_t c = 0; c < n + m; ++c) z[c] -= fz * t[leave][c];
    z_rhs -= fz * b[leave];
    basis[leave] = enter;
  }

  Phase1Result res;
  res.objective = z_rhs;
  res.x.assign(n, 0.0);
  for (std::size_t r = 0; r < m; ++r)
    if (basis[r] < n) res.x[basis[r]] = b[r];
  return res;
}

}  // namespace lpdetail

// Quasi-static feasibility: nonnegative vertical forces at (margin-shrunk)
// contact-patch corners balancing gravity and torque for every block.
inline StabilityReport check_equilibrium(const Scene& scene,
                                         const StabilityConfig& cfg = {},
                                         double mass_scale = 1.0) {
  StabilityReport report;
  report.contacts = extract_contacts(scene, cfg.contact_tol);
  const std::size_t nb = scene.blocks.size();
  if (nb == 0) {
    report.feasible = true;
    return report;
  }

  // Support-path reachability from the table, for diagnostics.
  {
    std::set<int> reachable;
    bool grew = true;
    while (grew) {
      grew = false;
      for (const Contact& c : report.contacts) {
        if (c.lower_id != kTableId && !reachable.count(c.lower_id)) continue;
        if (reachable.insert(c.upper_id).second) grew = true;
      }
    }
    for (const BlockInstance& b : scene.blocks)
      if (!reachable.count(b.id)) report.unsupported.push_back(b.id);
  }

  std::map<int, std::size_t> row_of;  // block id -> equation block
  for (std::size_t i = 0; i < nb; ++i) row_of[scene.blocks[i].id] = i;

  const std::size_t nvars = 4 * report.contacts.size();
  std::vector<std::vector<double>> a(3 * nb, std::vector<double>(nvars, 0.0));
  std::vector<double> b(3 * nb, 0.0);
  for (std::size_t i = 0; i < nb; ++i)
    b[3 * i] = mass_scale * block_mass(scene.blocks[i], scene.library) *
               cfg.gravity;

  for (std::size_t c = 0; c < report.contacts.size(); ++c) {
    const Contact& contact = report.contacts[c];
    // shrink the patch to reject knife-edge equilibria
    Rect2 p = contact.patch;
    const double mx = std::min(cfg.stability_margin, p.width() / 2);
    const double my = std::min(cfg.stability_margin, p.height() / 2);
    p.min_x += mx;
    p.max_x -= mx;
    p.min_y += my;
    p.max_y -= my;
    const auto corners = rect_corners(p);
    for (int k = 0; k < 4; ++k) {
      const std::size_t var = 4 * c + k;
      const double cx = corners[k].first, cy = corners[k].second;
      // pushes up on the upper block
      const std::size_t iu = row_of.at(contact.upper_id);
      const Vec3 cu = scene.blocks[iu].centroid;
      a[3 * iu][var] += 1.0;
      a[3 * iu + 1][var] += cy - cu.y;
      a[3 * iu + 2][var] += cx - cu.x;
      // reaction pushes down on the lower block
      if (contact.lower_id != kTableId) {
        const std::size_t il = row_of.at(contact.lower_id);
        const Vec3 cl = scene.blocks[il].centroid;
        a[3 * il][var] -= 1.0;
        a[3 * il + 1][var] -= cy - cl.y;
        a[3 * il + 2][var] -= cx - cl.x;
      }
    }
  }

  const auto res = lpdetail::phase1_feasible(std::move(a), std::move(b));
  // Scale-aware residual: the objective sums leftover artificial mass terms.
  double scale = 0.0;
  for (const BlockInstance& blk : scene.blocks)
    scale += mass_scale * block_mass(blk, scene.library) * cfg.gravity;
  report.feasible = res.objective <= cfg.residual_tol * std::max(1.0, scale);
  if (report.feasible) {
    report.forces = res.x;
    for (const BlockInstance& blk : scene.blocks) report.survivors.insert(blk.id);
  }
  return report;
}

// Greedy survival metric: bottom-up, keep each block whose addition stays
// feasible; feasible scenes score 1.
inline double surviving_fraction(const Scene& scene,
                                 const StabilityConfig& cfg = {}) {
  if (scene.blocks.empty()) return 1.0;
  if (check_equilibrium(scene, cfg).feasible) return 1.0;
  std::vector<BlockInstance> order(scene.blocks);
  std::sort(order.begin(), order.end(),
            [&](const BlockInstance& x, const BlockInstance& y) {
              const double zx = aabb(x, scene.library).base_z();
              const double zy = aabb(y, scene.library).base_z();
              if (zx != zy) return zx < zy;
              return x.id < y.id;
            });
  Scene kept;
  kept.library = scene.library;
  kept.bounds = scene.bounds;
  std::size_t survivors = 0;
  for (const BlockInstance& blk : order) {
    kept.blocks.push_back(blk);
    if (check_equilibrium(kept, cfg).feasible) {
      ++survivors;
    } else {
      kept.blocks.pop_back();
    }
  }
  return static_cast<double>(survivors) / scene.blocks.size();
}

// Exact recursive stability check for forest-shaped support structures: the
// combined center of mass of each block plus everything it carries must
// project strictly inside its support patch.  Returns nullopt when some block
// rests on more than one support.
inline std::optional<bool> tree_support_oracle(const Scene& scene,
                                               const StabilityConfig& cfg = {}) {
  const std::vector<Contact> contacts = extract_contacts(scene, cfg.contact_tol);
  std::map<int, const Contact*> support_of;
  std::map<int, std::vector<int>> children;
  for (const Contact& c : contacts) {
    if (support_of.count(c.upper_id)) return std::nullopt;  // non-tree
    support_of[c.upper_id] = &c;
    if (c.lower_id != kTableId) children[c.lower_id].push_back(c.upper_id);
  }
  for (const BlockInstance& blk : scene.blocks)
    if (!support_of.count(blk.id)) return false;  // floating block falls

  // subtree mass and center of mass, bottom-up via explicit recursion
  std::map<int, double> mass;
  std::map<int, Vec3> com;
  std::function<void(int)> accumulate = [&](int id) {
    const BlockInstance* blk = scene.find_block(id);
    double m = block_mass(*blk, scene.library);
    Vec3 weighted = blk->centroid * m;
    for (int child : children[id]) {
      accumulate(child);
      weighted = weighted + com[child] * mass[child];
      m += mass[child];
    }
    mass[id] = m;
    com[id] = weighted * (1.0 / m);
  };
  // roots: blocks supported by the table
  std::vector<int> roots;
  for (const auto& [id, c] : support_of)
    if (c->lower_id == kTableId) roots.push_back(id);
  for (int r : roots) accumulate(r);
  if (mass.size() != scene.blocks.size()) return false;  // unreachable chains

  for (const auto& [id, c] : support_of) {
    const Vec3& g = com[id];
    const Rect2& p = c->patch;
    if (!(g.x > p.min_x && g.x < p.max_x && g.y > p.min_y && g.y < p.max_y))
      return false;
  }
  return true;
}

// Smallest absolute signed distance from any subtree center of mass to its
// support-patch boundary; used to exclude marginal cases when comparing the
// LP check against the tree oracle.  nullopt when the scene is not a tree.
inline std::optional<double> tree_com_margin(const Scene& scene,
                                             const StabilityConfig& cfg = {}) {
  const std::vector<Contact> contacts = extract_contacts(scene, cfg.contact_tol);
  std::map<int, const Contact*> support_of;
  std::map<int, std::vector<int>> children;
  for (const Contact& c : contacts) {
    if (support_of.count(c.upper_id)) return std::nullopt;
    support_of[c.upper_id] = &c;
    if (c.lower_id != kTableId) children[c.lower_id].push_back(c.upper_id);
  }
  std::map<int, double> mass;
  std::map<int, Vec3> com;
  std::function<void(int)> accumulate = [&](int id) {
    const BlockInstance* blk = scene.find_block(id);
    double m = block_mass(*blk, scene.library);
    Vec3 weighted = blk->centroid * m;
    for (int child : children[id]) {
      accumulate(child);
      weighted = weighted + com[child] * mass[child];
      m += mass[child];
    }
    mass[id] = m;
    com[id] = weighted * (1.0 / m);
  };
  for (const auto& [id, c] : support_of)
    if (c->lower_id == kTableId) accumulate(id);
  double best = 1e18;
  for (const auto& [id, c] : support_of) {
    if (!com.count(id)) return std::nullopt;  // dangling chain
    const Vec3& g = com[id];
    const Rect2& p = c->patch;
    const double inside = std::min({g.x - p.min_x, p.max_x - g.x,
                                    g.y - p.min_y, p.max_y - g.y});
    best = std::min(best, std::abs(inside));
  }
  return best;
}

inline json stability_report_to_json(const StabilityReport& r) {
  json j;
  j["feasible"] = r.feasible;
  j["survivors"] = std::vector<int>(r.survivors.begin(), r.survivors.end());
  j["unsupported"] = r.unsupported;
  json contacts = json::array();
  for (const Contact& c : r.contacts)
    contacts.push_back(json{{"upper", c.upper_id},
                            {"lower", c.lower_id},
                            {"z", c.z},
                            {"patch", {c.patch.min_x, c.patch.min_y,
                                       c.patch.max_x, c.patch.max_y}}});
  j["contacts"] = contacts;
  if (!r.forces.empty()) j["forces"] = r.forces;
  return j;
}

}  // namespace sketchstack
