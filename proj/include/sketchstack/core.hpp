#pragma once

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sketchstack/geometry.hpp"

namespace sketchstack {

using json = nlohmann::ordered_json;

struct LibraryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ArityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MappingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Axis-aligned workspace box.  Defaults follow the desk-scale placement
// constraints: x in [-1.5, 1.5], y in [-1, 1], z in [0, 5].
struct Workspace {
  double min_x = -1.5, max_x = 1.5;
  double min_y = -1.0, max_y = 1.0;
  double min_z = 0.0, max_z = 5.0;

  double width() const { return max_x - min_x; }
  double depth() const { return max_y - min_y; }
  double height() const { return max_z - min_z; }
  double center_x() const { return 0.5 * (min_x + max_x); }
  double center_y() const { return 0.5 * (min_y + max_y); }

  bool contains(const Box3& b, double tol = 1e-9) const {
    return b.min.x >= min_x - tol && b.max.x <= max_x + tol &&
           b.min.y >= min_y - tol && b.max.y <= max_y + tol &&
           b.min.z >= min_z - tol && b.max.z <= max_z + tol;
  }
};

struct BlockType {
  int id = 0;
  std::string name;
  double w = 0.0, l = 0.0, h = 0.0;  // extents along x, y, z

  double volume() const { return w * l * h; }
};

// Ordered list of block types; index 0 is reserved for the table.
class BlockLibrary {
 public:
  BlockLibrary() = default;

  explicit BlockLibrary(std::vector<BlockType> types,
                        const Workspace& ws = Workspace{})
      : types_(std::move(types)) {
    if (types_.empty()) throw LibraryError("library must not be empty");
    for (std::size_t i = 0; i < types_.size(); ++i) {
      const BlockType& t = types_[i];
      if (!(t.w > 0.0 && t.l > 0.0 && t.h > 0.0))
        throw LibraryError("block type '" + t.name + "' has non-positive dims");
      for (std::size_t j = 0; j < i; ++j)
        if (types_[j].id == t.id)
          throw LibraryError("duplicate type id " + std::to_string(t.id));
    }
    const BlockType& table = types_.front();
    if (table.w < ws.width() - 1e-9 || table.l < ws.depth() - 1e-9)
      throw LibraryError("table type must enclose the workspace footprint");
  }

  const std::vector<BlockType>& types() const { return types_; }
  const BlockType& table() const { return types_.front(); }
  std::size_t size() const { return types_.size(); }

  const BlockType& type(int id) const {
    for (const BlockType& t : types_)
      if (t.id == id) return t;
    throw LibraryError("unknown type id " + std::to_string(id));
  }

  const BlockType* find(const std::string& name) const {
    for (const BlockType& t : types_)
      if (t.name == name) return &t;
    return nullptr;
  }

 private:
  std::vector<BlockType> types_;
};

struct BlockInstance {
  int id = 0;
  int type_id = 0;
  Vec3 centroid;
  bool hidden = false;
};

struct Scene {
  BlockLibrary library;
  std::vector<BlockInstance> blocks;
  Workspace bounds;

  const BlockInstance* find_block(int id) const {
    for (const BlockInstance& b : blocks)
      if (b.id == id) return &b;
    return nullptr;
  }
  int next_block_id() const {
    int next = 0;
    for (const BlockInstance& b : blocks) next = std::max(next, b.id + 1);
    return next;
  }
};

inline Box3 aabb(const BlockInstance& block, const BlockLibrary& lib) {
  const BlockType& t = lib.type(block.type_id);
  return make_box(block.centroid, t.w, t.l, t.h);
}

// The table is implicit in every scene: type 0 centered at (0, 0, -h/2 + 0)
// so its top face sits at z = 0.
inline Box3 table_box(const BlockLibrary& lib) {
  const BlockType& t = lib.table();
  return make_box({0.0, 0.0, -t.h / 2}, t.w, t.l, t.h);
}

inline double block_mass(const BlockInstance& block, const BlockLibrary& lib) {
  return lib.type(block.type_id).volume();  // uniform density 1
}

inline double overlap_volume(const Box3& a, const Box3& b) {
  const double ox = interval_overlap(a.min.x, a.max.x, b.min.x, b.max.x);
  const double oy = interval_overlap(a.min.y, a.max.y, b.min.y, b.max.y);
  const double oz = interval_overlap(a.min.z, a.max.z, b.min.z, b.max.z);
  return ox * oy * oz;
}

struct SceneViolation {
  enum class Kind { OutOfBounds, Interpenetration, BelowTable, UnknownType };
  Kind kind;
  int block_a = -1;
  int block_b = -1;
  double magnitude = 0.0;
  std::string detail;
};

// Reports problems instead of throwing; an empty result means a valid scene.
inline std::vector<SceneViolation> validate_scene(const Scene& scene,
                                                  double pen_tol = 1e-4,
                                                  double below_tol = 1e-6) {
  std::vector<SceneViolation> out;
  std::vector<std::pair<int, Box3>> boxes;
  for (const BlockInstance& b : scene.blocks) {
    BlockType t;
    try {
      t = scene.library.type(b.type_id);
    } catch (const LibraryError&) {
      out.push_back({SceneViolation::Kind::UnknownType, b.id, -1, 0.0,
                     "unknown type_id " + std::to_string(b.type_id)});
      continue;
    }
    const Box3 box = make_box(b.centroid, t.w, t.l, t.h);
    if (!scene.bounds.contains(box))
      out.push_back({SceneViolation::Kind::OutOfBounds, b.id, -1, 0.0,
                     "block outside workspace"});
    if (box.base_z() < -below_tol)
      out.push_back({SceneViolation::Kind::BelowTable, b.id, -1,
                     -box.base_z(), "block below the table surface"});
    boxes.emplace_back(b.id, box);
  }
  for (std::size_t i = 0; i < boxes.size(); ++i)
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      const double v = overlap_volume(boxes[i].second, boxes[j].second);
      if (v > pen_tol)
        out.push_back({SceneViolation::Kind::Interpenetration, boxes[i].first,
                       boxes[j].first, v, "interpenetrating blocks"});
    }
  return out;
}

// --- JSON serialization -----------------------------------------------------

inline json workspace_to_json(const Workspace& ws) {
  return json{{"x", {ws.min_x, ws.max_x}},
              {"y", {ws.min_y, ws.max_y}},
              {"z", {ws.min_z, ws.max_z}}};
}

inline Workspace workspace_from_json(const json& j) {
  Workspace ws;
  ws.min_x = j.at("x").at(0);
  ws.max_x = j.at("x").at(1);
  ws.min_y = j.at("y").at(0);
  ws.max_y = j.at("y").at(1);
  ws.min_z = j.at("z").at(0);
  ws.max_z = j.at("z").at(1);
  return ws;
}

inline json library_to_json(const BlockLibrary& lib) {
  json arr = json::array();
  for (const BlockType& t : lib.types())
    arr.push_back(json{{"id", t.id}, {"name", t.name}, {"dims", {t.w, t.l, t.h}}});
  return arr;
}

inline BlockLibrary library_from_json(const json& arr, const Workspace& ws) {
  std::vector<BlockType> types;
  for (const json& j : arr) {
    BlockType t;
    t.id = j.at("id");
    t.name = j.at("name");
    t.w = j.at("dims").at(0);
    t.l = j.at("dims").at(1);
    t.h = j.at("dims").at(2);
    types.push_back(t);
  }
  return BlockLibrary(std::move(types), ws);
}

inline json scene_to_json(const Scene& scene) {
  json j;
  j["library"] = library_to_json(scene.library);
  json blocks = json::array();
  for (const BlockInstance& b : scene.blocks)
    blocks.push_back(json{{"id", b.id},
                          {"type_id", b.type_id},
                          {"centroid", {b.centroid.x, b.centroid.y, b.centroid.z}},
                          {"hidden", b.hidden}});
  j["blocks"] = blocks;
  j["bounds"] = workspace_to_json(scene.bounds);
  return j;
}

inline Scene scene_from_json(const json& j) {
  Scene scene;
  scene.bounds = j.contains("bounds") ? workspace_from_json(j.at("bounds"))
                                      : Workspace{};
  scene.library = library_from_json(j.at("library"), scene.bounds);
  for (const json& bj : j.at("blocks")) {
    BlockInstance b;
    b.id = bj.at("id");
    b.type_id = bj.at("type_id");
    b.centroid = {bj.at("centroid").at(0), bj.at("centroid").at(1),
                  bj.at("centroid").at(2)};
    b.hidden = bj.value("hidden", false);
    scene.blocks.push_back(b);
  }
  return scene;
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << j.dump(2) << '\n';
}

inline json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for reading: " + path);
  try {
    return json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// Default block library used by the CLI, tests, and data generation.
inline BlockLibrary default_library() {
  return BlockLibrary({
      {0, "type_0_block", 3.0, 2.0, 0.10},   // table
      {1, "type_1_block", 0.20, 0.20, 0.20},  // cube
      {2, "type_2_block", 0.15, 0.15, 0.45},  // tall pillar
      {3, "type_3_block", 0.60, 0.30, 0.10},  // slab
      {4, "type_4_block", 0.90, 0.20, 0.12},  // lintel
      {5, "type_5_block", 0.30, 0.15, 0.10},  // brick
      {6, "type_6_block", 0.10, 0.10, 0.10},  // small cube
      {7, "type_7_block", 1.00, 0.60, 0.08},  // platform
      {8, "type_8_block", 0.15, 0.45, 0.45},  // deep pillar
  });
}

}  // namespace sketchstack
