#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "sketchstack/relations.hpp"

namespace sketchstack {

struct PatternInstance {
  Pattern pattern = Pattern::Unmatched;
  std::vector<int> base_ids;
  std::vector<int> top_ids;

  PatternEdge to_edge() const { return {pattern, base_ids, top_ids}; }
};

namespace patdetail {

inline bool touching_any(const RelationGraph& g, int a, int b) {
  return g.has_pair_edge_any_order(Relation::TouchingAlongX, a, b) ||
         g.has_pair_edge_any_order(Relation::TouchingAlongY, a, b);
}

inline bool pairwise_not_touching(const RelationGraph& g,
                                  const std::vector<int>& ids) {
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = i + 1; j < ids.size(); ++j)
      if (touching_any(g, ids[i], ids[j])) return false;
  return true;
}

// Connected under touching edges; the pattern dictionary's "tightly packed
// group" reading that also works on front-view graphs where a row of three
// has no touching edge between its end blocks.
inline bool touching_connected(const RelationGraph& g,
                               const std::vector<int>& ids) {
  if (ids.size() <= 1) return true;
  std::set<int> visited{ids[0]};
  std::vector<int> stack{ids[0]};
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    for (int other : ids)
      if (!visited.count(other) && touching_any(g, cur, other)) {
        visited.insert(other);
        stack.push_back(other);
      }
  }
  return visited.size() == ids.size();
}

inline bool has_group_edge(const RelationGraph& g, Relation rel,
                           const std::vector<int>& ids) {
  std::vector<int> want(ids);
  std::sort(want.begin(), want.end());
  for (const RelationEdge& e : g.geom_edges) {
    if (e.rel != rel) continue;
    std::vector<int> have(e.operands);
    std::sort(have.begin(), have.end());
    if (have == want) return true;
  }
  return false;
}

inline bool pairwise_horizontal_aligned(const RelationGraph& g,
                                        const std::vector<int>& ids) {
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = i + 1; j < ids.size(); ++j)
      if (!g.has_pair_edge_any_order(Relation::HorizontalAligned, ids[i], ids[j]))
        return false;
  return true;
}

// Separated pillars in a row or grid.  regular-grid-sparse is only visible in
// full scene graphs; front-view graphs fall back to an aligned-line reading.
inline bool sparse_group(const RelationGraph& g, const std::vector<int>& ids) {
  if (!pairwise_not_touching(g, ids)) return false;
  return has_group_edge(g, Relation::RegularGridSparse, ids) ||
         has_group_edge(g, Relation::HorizontalAlignedInALine, ids) ||
         has_group_edge(g, Relation::DepthAlignedInALine, ids) ||
         pairwise_horizontal_aligned(g, ids);
}

// Tightly packed tier: a compact grid edge or touching-connectivity.
inline bool compact_group(const RelationGraph& g, const std::vector<int>& ids) {
  return has_group_edge(g, Relation::RegularGridCompact, ids) ||
         touching_connected(g, ids);
}

inline bool supported(const RelationGraph& g, int top, int base, bool fully) {
  return g.has_geom_edge(
      fully ? Relation::SupportedByFully : Relation::SupportedByPartially,
      {top, base});
}

inline bool supported_any(const RelationGraph& g, int top, int base) {
  return supported(g, top, base, true) || supported(g, top, base, false);
}

inline bool all_tops_fully_on_all_bases(const RelationGraph& g,
                                        const std::vector<int>& bases,
                                        const std::vector<int>& tops) {
  for (int t : tops)
    for (int b : bases)
      if (!supported(g, t, b, true)) return false;
  return true;
}

}  // namespace patdetail

// Descriptor check for one pattern over an explicit tier split, against the
// geometric relation graph (counts, support subgraph, base and top templates).
inline bool eval_pattern(Pattern p, const std::vector<int>& base_ids,
                         const std::vector<int>& top_ids,
                         const RelationGraph& g) {
  using namespace patdetail;
  for (int id : base_ids)
    if (g.find_node(id) == nullptr)
      throw MappingError("pattern base id " + std::to_string(id) +
                         " not in graph");
  for (int id : top_ids)
    if (g.find_node(id) == nullptr)
      throw MappingError("pattern top id " + std::to_string(id) +
                         " not in graph");
  for (int b : base_ids)
    for (int t : top_ids)
      if (b == t) return false;  // tiers must be disjoint

  const std::size_t nb = base_ids.size(), nt = top_ids.size();
  switch (p) {
    case Pattern::SingleBlockStack:
      return nb == 1 && nt == 1 && supported(g, top_ids[0], base_ids[0], true);
    case Pattern::CantileverWithCounterbalance:
      return nb == 1 && nt == 1 && supported(g, top_ids[0], base_ids[0], false);
    case Pattern::TwoPillarSingleTopBridge:
      return nb == 2 && nt == 1 &&
             all_tops_fully_on_all_bases(g, base_ids, top_ids) &&
             pairwise_not_touching(g, base_ids) &&
             (g.has_pair_edge_any_order(Relation::HorizontalAligned, base_ids[0],
                                        base_ids[1]) ||
              g.has_pair_edge_any_order(Relation::DepthAligned, base_ids[0],
                                        base_ids[1]));
    case Pattern::NPillarSingleTopBridge:
      return nb >= 3 && nt == 1 &&
             all_tops_fully_on_all_bases(g, base_ids, top_ids) &&
             sparse_group(g, base_ids);
    case Pattern::SingleBaseNPillarBridge: {
      if (nb != 1 || nt < 2) return false;
      for (int t : top_ids)
        if (!supported(g, t, base_ids[0], true)) return false;
      return sparse_group(g, top_ids);
    }
    case Pattern::TwoBaseSingleOverheadPyramid:
      return nb == 2 && nt == 1 &&
             all_tops_fully_on_all_bases(g, base_ids, top_ids) &&
             touching_any(g, base_ids[0], base_ids[1]);
    case Pattern::NBaseSingleOverheadPyramid:
      return nb >= 3 && nt == 1 &&
             all_tops_fully_on_all_bases(g, base_ids, top_ids) &&
             compact_group(g, base_ids);
    case Pattern::SingleBaseNOverheadPyramid: {
      if (nb != 1 || nt < 2) return false;
      for (int t : top_ids)
        if (!supported(g, t, base_ids[0], true)) return false;
      return compact_group(g, top_ids);
    }
    case Pattern::NBaseMOverheadPyramid: {
      if (nb < 2 || nt < 2) return false;
      // fully or partially wherever direct support exists; each block tied in
      for (int t : top_ids) {
        bool any = false;
        for (int b : base_ids) any = any || supported_any(g, t, b);
        if (!any) return false;
      }
      for (int b : base_ids) {
        bool any = false;
        for (int t : top_ids) any = any || supported_any(g, t, b);
        if (!any) return false;
      }
      return compact_group(g, base_ids) && compact_group(g, top_ids);
    }
    case Pattern::BasicArc:
      return nb == 2 && nt == 1 &&
             supported(g, top_ids[0], base_ids[0], false) &&
             supported(g, top_ids[0], base_ids[1], false) &&
             pairwise_not_touching(g, base_ids);
    case Pattern::Unmatched:
      return false;
  }
  return false;
}

// Most-specific-first tie-break order for ambiguous components.
inline const std::vector<Pattern>& pattern_specificity_order() {
  static const std::vector<Pattern> order = {
      Pattern::NBaseMOverheadPyramid,     Pattern::NBaseSingleOverheadPyramid,
      Pattern::SingleBaseNOverheadPyramid, Pattern::SingleBaseNPillarBridge,
      Pattern::TwoBaseSingleOverheadPyramid, Pattern::NPillarSingleTopBridge,
      Pattern::TwoPillarSingleTopBridge,   Pattern::BasicArc,
      Pattern::CantileverWithCounterbalance, Pattern::SingleBlockStack,
  };
  return order;
}

// Finds pattern instances: connected bipartite components of supported-by
// edges between adjacent tiers, classified by the most specific matching
// pattern.  Components that match nothing are returned tagged Unmatched.
inline std::vector<PatternInstance> match_patterns(const RelationGraph& g) {
  struct SupportEdge {
    int top, base;
  };
  std::vector<SupportEdge> edges;
  for (const RelationEdge& e : g.geom_edges)
    if (e.rel == Relation::SupportedByFully ||
        e.rel == Relation::SupportedByPartially)
      edges.push_back({e.operands[0], e.operands[1]});
  if (edges.empty()) return {};

  // Union-find over edges: same component when sharing a top or a base.
  std::vector<int> parent(edges.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < edges.size(); ++i)
    for (std::size_t j = i + 1; j < edges.size(); ++j)
      if (edges[i].top == edges[j].top || edges[i].base == edges[j].base)
        parent[find(static_cast<int>(i))] = find(static_cast<int>(j));

  std::map<int, std::pair<std::set<int>, std::set<int>>> comps;  // bases, tops
  for (std::size_t i = 0; i < edges.size(); ++i) {
    auto& [bases, tops] = comps[find(static_cast<int>(i))];
    bases.insert(edges[i].base);
    tops.insert(edges[i].top);
  }

  std::vector<PatternInstance> out;
  for (const auto& [root, tiers] : comps) {
    PatternInstance inst;
    inst.base_ids.assign(tiers.first.begin(), tiers.first.end());
    inst.top_ids.assign(tiers.second.begin(), tiers.second.end());
    inst.pattern = Pattern::Unmatched;
    for (Pattern p : pattern_specificity_order())
      if (eval_pattern(p, inst.base_ids, inst.top_ids, g)) {
        inst.pattern = p;
        break;
      }
    out.push_back(std::move(inst));
  }
  std::sort(out.begin(), out.end(),
            [](const PatternInstance& a, const PatternInstance& b) {
              if (a.base_ids != b.base_ids) return a.base_ids < b.base_ids;
              return a.top_ids < b.top_ids;
            });
  return out;
}

struct DecomposedInstance {
  PatternInstance instance;
  Scene sub_scene;  // instance blocks plus everything transitively beneath
};

// Pairs every matched instance with its supports-closed sub-scene so local
// stability is simulable.  Closure follows supported-by edges downward.
inline std::vector<DecomposedInstance> decompose(const RelationGraph& g,
                                                 const Scene& scene) {
  std::map<int, std::vector<int>> below;  // top id -> bases it rests on
  for (const RelationEdge& e : g.geom_edges)
    if (e.rel == Relation::SupportedByFully ||
        e.rel == Relation::SupportedByPartially)
      below[e.operands[0]].push_back(e.operands[1]);

  std::vector<DecomposedInstance> out;
  for (const PatternInstance& inst : match_patterns(g)) {
    std::set<int> keep(inst.base_ids.begin(), inst.base_ids.end());
    keep.insert(inst.top_ids.begin(), inst.top_ids.end());
    std::vector<int> stack(keep.begin(), keep.end());
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      auto it = below.find(cur);
      if (it == below.end()) continue;
      for (int b : it->second)
        if (keep.insert(b).second) stack.push_back(b);
    }
    DecomposedInstance d;
    d.instance = inst;
    d.sub_scene.library = scene.library;
    d.sub_scene.bounds = scene.bounds;
    for (const BlockInstance& b : scene.blocks)
      if (keep.count(b.id)) d.sub_scene.blocks.push_back(b);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace sketchstack
