#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sketchstack/core.hpp"
#include "sketchstack/relations.hpp"

namespace sketchstack {

// A labeled 2D front-view box with coarse centroid and size.
struct SketchBox {
  int id = 0;
  int type_id = 0;
  double cx = 0.0, cz = 0.0;
  double w_hat = 0.0, h_hat = 0.0;

  Box3 full_depth_box(const Workspace& ws) const {
    return {{cx - w_hat / 2, ws.min_y, cz - h_hat / 2},
            {cx + w_hat / 2, ws.max_y, cz + h_hat / 2}};
  }
};

enum class SketchSource { Structured, Raster };

struct Sketch {
  std::vector<SketchBox> boxes;
  BlockLibrary library;
  SketchSource source = SketchSource::Structured;
};

// Structured sketch file: {"boxes":[{"id","type":"type_k_block","cx","cz","w","h"}]}
inline Sketch parse_structured(const std::string& path, const BlockLibrary& lib) {
  const json j = read_json_file(path);
  Sketch sketch;
  sketch.library = lib;
  sketch.source = SketchSource::Structured;
  if (!j.contains("boxes"))
    throw ParseError(path + ": missing \"boxes\" array");
  int line = 0;
  for (const json& bj : j.at("boxes")) {
    ++line;
    SketchBox b;
    try {
      b.id = bj.contains("id") ? bj.at("id").get<int>() : line - 1;
      const std::string type_name = bj.at("type");
      const BlockType* t = lib.find(type_name);
      if (t == nullptr)
        throw ParseError(path + ": box " + std::to_string(line) +
                         ": unknown type label \"" + type_name + "\"");
      b.type_id = t->id;
      b.cx = bj.at("cx");
      b.cz = bj.at("cz");
      b.w_hat = bj.at("w");
      b.h_hat = bj.at("h");
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ": box " + std::to_string(line) + ": " + e.what());
    }
    if (!(b.w_hat > 0.0 && b.h_hat > 0.0))
      throw ParseError(path + ": box " + std::to_string(line) +
                       ": non-positive extent");
    sketch.boxes.push_back(b);
  }
  return sketch;
}

inline json sketch_to_json(const Sketch& sketch) {
  json j;
  json boxes = json::array();
  for (const SketchBox& b : sketch.boxes)
    boxes.push_back(json{{"id", b.id},
                         {"type", sketch.library.type(b.type_id).name},
                         {"cx", b.cx},
                         {"cz", b.cz},
                         {"w", b.w_hat},
                         {"h", b.h_hat}});
  j["boxes"] = boxes;
  return j;
}

// Uniform scale + translate so the union of boxes spans
// x in [-target_width/2, target_width/2] and rests on z = 0.
inline Sketch normalize(const Sketch& sketch, double target_width = 3.0) {
  if (sketch.boxes.empty()) return sketch;
  double min_x = 1e18, max_x = -1e18, min_z = 1e18;
  for (const SketchBox& b : sketch.boxes) {
    min_x = std::min(min_x, b.cx - b.w_hat / 2);
    max_x = std::max(max_x, b.cx + b.w_hat / 2);
    min_z = std::min(min_z, b.cz - b.h_hat / 2);
  }
  const double span = max_x - min_x;
  const double scale = span > 0 ? target_width / span : 1.0;
  const double mid_x = 0.5 * (min_x + max_x);
  Sketch out = sketch;
  for (SketchBox& b : out.boxes) {
    b.cx = (b.cx - mid_x) * scale;
    b.cz = (b.cz - min_z) * scale;
    b.w_hat *= scale;
    b.h_hat *= scale;
  }
  return out;
}

// Front-view relation graph of a normalized sketch: the 13 x-z relations over
// full-depth boxes, then stability patterns (filled in by match_patterns).
inline RelationGraph extract_frontview_graph(const Sketch& sketch,
                                             const ClassifierConfig& cfg,
                                             const Workspace& ws = Workspace{}) {
  std::vector<GraphNode> nodes;
  std::vector<Box3> boxes;
  for (const SketchBox& b : sketch.boxes) {
    nodes.push_back({b.id, b.type_id, false});
    boxes.push_back(b.full_depth_box(ws));
  }
  return extract_graph_from_boxes(nodes, boxes, cfg, ws, false);
}

}  // namespace sketchstack
