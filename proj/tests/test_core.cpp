#include <catch2/catch_amalgamated.hpp>

#include "sketchstack/core.hpp"
#include "sketchstack/rng.hpp"

using namespace sketchstack;

namespace {

Scene one_block_scene() {
  Scene scene;
  scene.library = default_library();
  scene.blocks.push_back({0, 1, {0.0, 0.0, 0.10}, false});
  return scene;
}

Box3 random_box(Rng& rng) {
  const Vec3 c{rng.uniform(-1.0, 1.0), rng.uniform(-0.8, 0.8),
               rng.uniform(0.2, 2.0)};
  return make_box(c, rng.uniform(0.05, 0.8), rng.uniform(0.05, 0.8),
                  rng.uniform(0.05, 0.8));
}

}  // namespace

TEST_CASE("aabb from type and centroid", "[core]") {
  BlockLibrary lib({{0, "table", 3.0, 2.0, 0.1},
                    {1, "unit", 1.0, 1.0, 1.0},
                    {2, "thin", 0.2, 0.4, 0.6}});
  BlockInstance unit{0, 1, {0.0, 0.0, 0.5}, false};
  Box3 b = aabb(unit, lib);
  CHECK(b.min.x == Catch::Approx(-0.5));
  CHECK(b.max.x == Catch::Approx(0.5));
  CHECK(b.min.z == Catch::Approx(0.0));
  CHECK(b.max.z == Catch::Approx(1.0));

  BlockInstance thin{1, 2, {1.0, 0.0, 0.3}, false};
  Box3 t = aabb(thin, lib);
  CHECK(t.min.x == Catch::Approx(0.9));
  CHECK(t.max.x == Catch::Approx(1.1));
  CHECK(t.min.y == Catch::Approx(-0.2));
  CHECK(t.max.y == Catch::Approx(0.2));
  CHECK(t.min.z == Catch::Approx(0.0));
  CHECK(t.max.z == Catch::Approx(0.6));

  BlockInstance bad{2, 99, {0, 0, 0}, false};
  CHECK_THROWS_AS(aabb(bad, lib), LibraryError);
}

TEST_CASE("degenerate type rejected at library construction", "[core]") {
  CHECK_THROWS_AS(BlockLibrary({{0, "table", 3.0, 2.0, 0.1},
                                {1, "flat", 0.0, 1.0, 1.0}}),
                  LibraryError);
  CHECK_THROWS_AS(BlockLibrary({{0, "table", 3.0, 2.0, 0.1},
                                {1, "a", 1, 1, 1},
                                {1, "b", 1, 1, 1}}),
                  LibraryError);
  CHECK_THROWS_AS(BlockLibrary({{0, "small-table", 1.0, 1.0, 0.1}}),
                  LibraryError);
  CHECK_THROWS_AS(BlockLibrary(std::vector<BlockType>{}), LibraryError);
}

TEST_CASE("overlap_volume basics", "[core]") {
  const Box3 unit = make_box({0, 0, 0}, 1, 1, 1);
  CHECK(overlap_volume(unit, unit) == Catch::Approx(1.0));
  const Box3 touching = make_box({1, 0, 0}, 1, 1, 1);
  CHECK(overlap_volume(unit, touching) == Catch::Approx(0.0));
  const Box3 shifted = make_box({0.5, 0, 0}, 1, 1, 1);
  CHECK(overlap_volume(unit, shifted) == Catch::Approx(0.5));
}

TEST_CASE("overlap_volume symmetric and bounded", "[core][property]") {
  Rng rng(17);
  for (int i = 0; i < 300; ++i) {
    const Box3 a = random_box(rng), b = random_box(rng);
    const double ab = overlap_volume(a, b), ba = overlap_volume(b, a);
    CHECK(ab == Catch::Approx(ba));
    CHECK(ab <= std::min(a.volume(), b.volume()) + 1e-12);
    CHECK(ab >= 0.0);
  }
}

TEST_CASE("aabb center equals centroid, extents equal dims", "[core][property]") {
  const BlockLibrary lib = default_library();
  Rng rng(3);
  for (const BlockType& t : lib.types()) {
    const Vec3 c{rng.uniform(-1, 1), rng.uniform(-0.5, 0.5), rng.uniform(0, 2)};
    const Box3 b = aabb({0, t.id, c, false}, lib);
    CHECK(b.center_x() == Catch::Approx(c.x));
    CHECK(b.center_y() == Catch::Approx(c.y));
    CHECK(b.center_z() == Catch::Approx(c.z));
    CHECK(b.width() == Catch::Approx(t.w));
    CHECK(b.depth() == Catch::Approx(t.l));
    CHECK(b.height() == Catch::Approx(t.h));
  }
}

TEST_CASE("validate_scene reports violations", "[core]") {
  Scene scene = one_block_scene();
  CHECK(validate_scene(scene).empty());

  scene.blocks.push_back({1, 1, {0.0, 0.0, 0.10}, false});  // coincident
  auto v = validate_scene(scene);
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == SceneViolation::Kind::Interpenetration);

  Scene oob = one_block_scene();
  oob.blocks[0].centroid.x = 2.0;
  auto v2 = validate_scene(oob);
  REQUIRE(v2.size() == 1);
  CHECK(v2[0].kind == SceneViolation::Kind::OutOfBounds);
}

TEST_CASE("validate_scene deterministic", "[core][property]") {
  Rng rng(5);
  Scene scene;
  scene.library = default_library();
  for (int i = 0; i < 12; ++i)
    scene.blocks.push_back({i, 1 + static_cast<int>(rng.uniform_int(7)),
                            {rng.uniform(-2, 2), rng.uniform(-1.5, 1.5),
                             rng.uniform(0, 1.0)},
                            false});
  const auto a = validate_scene(scene);
  const auto b = validate_scene(scene);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].kind == b[i].kind);
    CHECK(a[i].block_a == b[i].block_a);
    CHECK(a[i].block_b == b[i].block_b);
  }
}

TEST_CASE("scene JSON round trip", "[core]") {
  Scene scene = one_block_scene();
  scene.blocks.push_back({7, 2, {0.25, -0.125, 0.225}, true});
  const json j = scene_to_json(scene);
  const Scene back = scene_from_json(j);
  REQUIRE(back.blocks.size() == scene.blocks.size());
  CHECK(back.blocks[1].id == 7);
  CHECK(back.blocks[1].hidden);
  CHECK(back.blocks[1].centroid.x == Catch::Approx(0.25));
  CHECK(back.library.types().size() == scene.library.types().size());
  CHECK(scene_to_json(back).dump() == j.dump());
}

TEST_CASE("rng determinism and fork independence", "[core]") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
  Rng c(42);
  for (int i = 0; i < 100; ++i) c.next_u64();
  Rng f1 = c.fork(0);
  Rng c2(42);
  for (int i = 0; i < 100; ++i) c2.next_u64();
  Rng f2 = c2.fork(0);
  for (int i = 0; i < 50; ++i) REQUIRE(f1.next_u64() == f2.next_u64());
}

TEST_CASE("rng normal moments", "[core]") {
  Rng rng(9);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.02);
  CHECK(std::abs(sq / n - 1.0) < 0.03);
}
