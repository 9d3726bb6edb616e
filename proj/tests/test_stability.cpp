#include <catch2/catch_amalgamated.hpp>

#include "sketchstack/rng.hpp"
#include "sketchstack/stability.hpp"

using namespace sketchstack;

namespace {

const StabilityConfig kStab;

Scene single_block() {
  Scene s;
  s.library = default_library();
  s.blocks.push_back({0, 1, {0.3, 0.1, 0.1}, false});
  return s;
}

Scene bridge_scene() {
  Scene s;
  s.library = default_library();
  s.blocks.push_back({0, 2, {-0.275, 0, 0.225}, false});
  s.blocks.push_back({1, 2, {0.275, 0, 0.225}, false});
  s.blocks.push_back({2, 4, {0, 0, 0.51}, false});
  return s;
}

// Chain towers at well-separated x positions; every block rests on exactly
// one support, so the tree oracle applies.
Scene random_tree_scene(Rng& rng) {
  Scene s;
  s.library = default_library();
  const int towers = 1 + static_cast<int>(rng.uniform_int(2));
  int id = 0;
  for (int t = 0; t < towers; ++t) {
    const double base_x = -0.7 + 1.4 * t + rng.uniform(-0.15, 0.15);
    const double base_y = rng.uniform(-0.3, 0.3);
    int type = 1 + static_cast<int>(rng.uniform_int(5));
    BlockType bt = s.library.type(type);
    double z = bt.h / 2;
    BlockInstance prev{id++, type, {base_x, base_y, z}, false};
    s.blocks.push_back(prev);
    const int height = 1 + static_cast<int>(rng.uniform_int(3));
    for (int k = 0; k < height; ++k) {
      const BlockType& pt = s.library.type(prev.type_id);
      int ntype = 1 + static_cast<int>(rng.uniform_int(5));
      const BlockType& nt = s.library.type(ntype);
      // offset can overhang; sometimes far enough to topple
      const double dx = rng.uniform(-0.6, 0.6) * (pt.w / 2 + nt.w / 2);
      const double dy = rng.uniform(-0.6, 0.6) * (pt.l / 2 + nt.l / 2);
      BlockInstance next{id++, ntype,
                         {prev.centroid.x + dx, prev.centroid.y + dy,
                          prev.centroid.z + pt.h / 2 + nt.h / 2},
                         false};
      // keep the contact patch nonempty
      if (overlap_area(make_box(next.centroid, nt.w, nt.l, nt.h).footprint(),
                       make_box(prev.centroid, pt.w, pt.l, pt.h).footprint()) <=
          0)
        continue;
      s.blocks.push_back(next);
      prev = next;
    }
  }
  return s;
}

}  // namespace

TEST_CASE("single block on table is feasible with forces summing to weight",
          "[stability]") {
  const Scene s = single_block();
  const StabilityReport r = check_equilibrium(s, kStab);
  REQUIRE(r.feasible);
  REQUIRE(r.contacts.size() == 1);
  REQUIRE(r.forces.size() == 4);
  const double total = r.forces[0] + r.forces[1] + r.forces[2] + r.forces[3];
  CHECK(total ==
        Catch::Approx(block_mass(s.blocks[0], s.library) * kStab.gravity)
            .epsilon(1e-6));
  CHECK(r.survivors.count(0) == 1);
}

TEST_CASE("cantilever with COM beyond the base is infeasible", "[stability]") {
  Scene s;
  s.library = default_library();
  s.blocks.push_back({0, 1, {0, 0, 0.1}, false});          // cube base
  s.blocks.push_back({1, 5, {0.24, 0, 0.25}, false});      // brick, COM out
  const StabilityReport r = check_equilibrium(s, kStab);
  CHECK_FALSE(r.feasible);
  CHECK(surviving_fraction(s, kStab) == Catch::Approx(0.5));
}

TEST_CASE("symmetric bridge: each pillar contact carries half the lintel",
          "[stability]") {
  const Scene s = bridge_scene();
  const StabilityReport r = check_equilibrium(s, kStab);
  REQUIRE(r.feasible);
  const double lintel_weight = block_mass(s.blocks[2], s.library) * kStab.gravity;
  for (std::size_t c = 0; c < r.contacts.size(); ++c) {
    if (r.contacts[c].lower_id == kTableId) continue;
    double sum = 0;
    for (int k = 0; k < 4; ++k) sum += r.forces[4 * c + k];
    CHECK(sum == Catch::Approx(lintel_weight / 2).epsilon(1e-5));
  }
  // table contacts carry pillar weight plus half the lintel
  const double pillar_weight = block_mass(s.blocks[0], s.library) * kStab.gravity;
  for (std::size_t c = 0; c < r.contacts.size(); ++c) {
    if (r.contacts[c].lower_id != kTableId) continue;
    double sum = 0;
    for (int k = 0; k < 4; ++k) sum += r.forces[4 * c + k];
    CHECK(sum == Catch::Approx(pillar_weight + lintel_weight / 2).epsilon(1e-5));
  }
}

TEST_CASE("floating block: no contacts, infeasible, flagged", "[stability]") {
  Scene s;
  s.library = default_library();
  s.blocks.push_back({0, 1, {0, 0, 1.0}, false});
  const StabilityReport r = check_equilibrium(s, kStab);
  CHECK(r.contacts.empty());
  CHECK_FALSE(r.feasible);
  REQUIRE(r.unsupported.size() == 1);
  CHECK(r.unsupported[0] == 0);
}

TEST_CASE("contact extraction basics", "[stability]") {
  Scene stack;
  stack.library = default_library();
  stack.blocks.push_back({0, 3, {0, 0, 0.05}, false});
  stack.blocks.push_back({1, 1, {0.1, 0, 0.20}, false});
  const auto contacts = extract_contacts(stack, kStab.contact_tol);
  REQUIRE(contacts.size() == 2);  // table + block pair
  for (const Contact& c : contacts) {
    if (c.lower_id == kTableId) continue;
    // patch equals the upper block footprint (fully inside the slab)
    CHECK(c.patch.width() == Catch::Approx(0.2));
    CHECK(c.patch.height() == Catch::Approx(0.2));
  }
}

TEST_CASE("surviving fraction: floating block among grounded", "[stability]") {
  Scene s;
  s.library = default_library();
  for (int i = 0; i < 4; ++i)
    s.blocks.push_back({i, 1, {-0.9 + 0.6 * i, 0, 0.1}, false});
  s.blocks.push_back({4, 1, {0, 0, 1.5}, false});  // floating
  CHECK(surviving_fraction(s, kStab) == Catch::Approx(0.8));
}

TEST_CASE("surviving fraction: stack above a gap loses the chain",
          "[stability]") {
  Scene s;
  s.library = default_library();
  s.blocks.push_back({0, 1, {-0.6, 0, 0.1}, false});  // grounded
  s.blocks.push_back({1, 1, {0.6, 0, 0.1}, false});   // grounded
  s.blocks.push_back({2, 1, {0, 0, 0.9}, false});     // floating stack
  s.blocks.push_back({3, 1, {0, 0, 1.1}, false});
  CHECK(surviving_fraction(s, kStab) == Catch::Approx(0.5));
}

TEST_CASE("tree oracle basic cases", "[stability]") {
  Scene stack;
  stack.library = default_library();
  stack.blocks.push_back({0, 1, {0, 0, 0.1}, false});
  stack.blocks.push_back({1, 1, {0, 0, 0.3}, false});
  stack.blocks.push_back({2, 1, {0, 0, 0.5}, false});
  auto r = tree_support_oracle(stack, kStab);
  REQUIRE(r.has_value());
  CHECK(*r);

  // top-heavy chain: combined COM walks past the base edge
  Scene chain;
  chain.library = default_library();
  chain.blocks.push_back({0, 1, {0, 0, 0.1}, false});
  chain.blocks.push_back({1, 1, {0.09, 0, 0.3}, false});
  chain.blocks.push_back({2, 1, {0.18, 0, 0.5}, false});
  auto r2 = tree_support_oracle(chain, kStab);
  REQUIRE(r2.has_value());
  CHECK_FALSE(*r2);
  CHECK_FALSE(check_equilibrium(chain, kStab).feasible);

  // bridge: lintel rests on two pillars -> not a tree
  CHECK_FALSE(tree_support_oracle(bridge_scene(), kStab).has_value());
}

TEST_CASE("oracle equivalence on random tree scenes", "[stability][property]") {
  Rng rng(2024);
  int compared = 0;
  for (int trial = 0; trial < 220; ++trial) {
    const Scene s = random_tree_scene(rng);
    const auto margin = tree_com_margin(s, kStab);
    if (!margin.has_value() || *margin <= kStab.stability_margin) continue;
    const auto oracle = tree_support_oracle(s, kStab);
    if (!oracle.has_value()) continue;
    ++compared;
    const bool lp = check_equilibrium(s, kStab).feasible;
    INFO("trial " << trial << " margin " << *margin);
    REQUIRE(lp == *oracle);
  }
  CHECK(compared > 100);
}

TEST_CASE("feasibility invariant under mass scaling and translation",
          "[stability][property]") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const Scene s = random_tree_scene(rng);
    const bool base = check_equilibrium(s, kStab).feasible;
    CHECK(check_equilibrium(s, kStab, 7.5).feasible == base);
    Scene moved = s;
    const double dx = rng.uniform(-0.1, 0.1), dy = rng.uniform(-0.1, 0.1);
    for (BlockInstance& b : moved.blocks) {
      b.centroid.x += dx;
      b.centroid.y += dy;
    }
    CHECK(check_equilibrium(moved, kStab).feasible == base);
  }
}

TEST_CASE("surviving fraction monotone under deleting a non-survivor",
          "[stability][property]") {
  Rng rng(99);
  int checked = 0;
  for (int trial = 0; trial < 60 && checked < 12; ++trial) {
    const Scene s = random_tree_scene(rng);
    if (check_equilibrium(s, kStab).feasible) continue;
    // find a non-survivor
    Scene kept;
    kept.library = s.library;
    kept.bounds = s.bounds;
    std::vector<BlockInstance> order(s.blocks);
    std::sort(order.begin(), order.end(),
              [&](const BlockInstance& x, const BlockInstance& y) {
                return aabb(x, s.library).base_z() < aabb(y, s.library).base_z();
              });
    int non_survivor = -1;
    for (const BlockInstance& blk : order) {
      kept.blocks.push_back(blk);
      if (!check_equilibrium(kept, kStab).feasible) {
        kept.blocks.pop_back();
        non_survivor = blk.id;
      }
    }
    if (non_survivor < 0) continue;
    ++checked;
    const double before = surviving_fraction(s, kStab);
    Scene reduced = s;
    reduced.blocks.erase(
        std::remove_if(reduced.blocks.begin(), reduced.blocks.end(),
                       [&](const BlockInstance& b) {
                         return b.id == non_survivor;
                       }),
        reduced.blocks.end());
    const double after = surviving_fraction(reduced, kStab);
    CHECK(after >= before - 1e-12);
  }
  CHECK(checked > 0);
}

TEST_CASE("empty scene is trivially feasible", "[stability]") {
  Scene s;
  s.library = default_library();
  CHECK(check_equilibrium(s, kStab).feasible);
  CHECK(surviving_fraction(s, kStab) == 1.0);
}
