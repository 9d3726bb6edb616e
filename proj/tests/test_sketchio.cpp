#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "sketchstack/raster.hpp"
#include "sketchstack/sketch.hpp"

using namespace sketchstack;

namespace {

const ClassifierConfig kCfg;

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

// Draws an axis-aligned rectangle outline (1 px stroke) on the image.
void draw_rect(GrayImage& img, int x0, int y0, int x1, int y1) {
  for (int x = x0; x <= x1; ++x) {
    img.at(x, y0) = 0;
    img.at(x, y1) = 0;
  }
  for (int y = y0; y <= y1; ++y) {
    img.at(x0, y) = 0;
    img.at(x1, y) = 0;
  }
}

}  // namespace

TEST_CASE("parse_structured", "[sketchio]") {
  const std::string path = temp_path("sketch_ok.json");
  write_json_file(path, json::parse(R"({"boxes":[
    {"id":0,"type":"type_1_block","cx":-0.3,"cz":0.1,"w":0.2,"h":0.2},
    {"id":1,"type":"type_2_block","cx":0.3,"cz":0.22,"w":0.15,"h":0.45}
  ]})"));
  const Sketch s = parse_structured(path, default_library());
  REQUIRE(s.boxes.size() == 2);
  CHECK(s.boxes[0].id == 0);
  CHECK(s.boxes[1].type_id == 2);

  const std::string empty_path = temp_path("sketch_empty.json");
  write_json_file(empty_path, json::parse(R"({"boxes":[]})"));
  CHECK(parse_structured(empty_path, default_library()).boxes.empty());

  const std::string bad_path = temp_path("sketch_bad.json");
  write_json_file(bad_path, json::parse(R"({"boxes":[
    {"id":0,"type":"type_99_block","cx":0,"cz":0,"w":1,"h":1}]})"));
  CHECK_THROWS_AS(parse_structured(bad_path, default_library()), ParseError);
}

TEST_CASE("normalize scales union to target width on the floor", "[sketchio]") {
  Sketch s;
  s.library = default_library();
  s.boxes.push_back({0, 1, 5.0, 8.0, 4.0, 6.0});
  const Sketch n = normalize(s, 3.0);
  CHECK(n.boxes[0].w_hat == Catch::Approx(3.0));
  CHECK(n.boxes[0].cx == Catch::Approx(0.0));
  CHECK(n.boxes[0].cz - n.boxes[0].h_hat / 2 == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("normalize is idempotent and ratio preserving", "[sketchio][property]") {
  Sketch s;
  s.library = default_library();
  s.boxes.push_back({0, 1, 12.0, 30.0, 8.0, 10.0});
  s.boxes.push_back({1, 2, 30.0, 44.0, 6.0, 18.0});
  const Sketch n1 = normalize(s, 3.0);
  const Sketch n2 = normalize(n1, 3.0);
  for (std::size_t i = 0; i < n1.boxes.size(); ++i) {
    CHECK(n2.boxes[i].cx == Catch::Approx(n1.boxes[i].cx).margin(1e-9));
    CHECK(n2.boxes[i].cz == Catch::Approx(n1.boxes[i].cz).margin(1e-9));
    CHECK(n2.boxes[i].w_hat == Catch::Approx(n1.boxes[i].w_hat).margin(1e-9));
    CHECK(n2.boxes[i].h_hat == Catch::Approx(n1.boxes[i].h_hat).margin(1e-9));
  }
  // width ratios preserved exactly
  CHECK(n1.boxes[0].w_hat / n1.boxes[1].w_hat ==
        Catch::Approx(s.boxes[0].w_hat / s.boxes[1].w_hat));
  CHECK(n1.boxes[0].h_hat / n1.boxes[1].h_hat ==
        Catch::Approx(s.boxes[0].h_hat / s.boxes[1].h_hat));
}

TEST_CASE("raster parse recovers a drawn rectangle", "[sketchio]") {
  DatagenConfig dcfg;
  GrayImage img = GrayImage::blank(120, 100);
  draw_rect(img, 30, 20, 69, 79);  // 40x60 px outline
  const Sketch s = parse_raster(img, {"type_1_block"}, default_library(), dcfg,
                                /*target_width=*/40.0);
  REQUIRE(s.boxes.size() == 1);
  // Normalized to width 40 => should recover the drawn pixel box (40x60)
  // within +/- dilate_px.
  CHECK(std::abs(s.boxes[0].w_hat - 40.0) <= dcfg.dilate_px);
  CHECK(std::abs(s.boxes[0].h_hat - 60.0) <= dcfg.dilate_px + 1);
}

TEST_CASE("raster parse distinguishes nested rectangles", "[sketchio]") {
  DatagenConfig dcfg;
  GrayImage img = GrayImage::blank(140, 140);
  draw_rect(img, 20, 20, 119, 119);
  draw_rect(img, 50, 50, 89, 89);
  const auto regions = enclosed_regions(img, dcfg.dilate_px);
  CHECK(regions.size() == 2);
}

TEST_CASE("blank raster raises EmptySketch", "[sketchio]") {
  DatagenConfig dcfg;
  GrayImage img = GrayImage::blank(64, 64);
  CHECK_THROWS_AS(
      parse_raster(img, {}, default_library(), dcfg),
      EmptySketch);
}

TEST_CASE("label mismatch raises", "[sketchio]") {
  DatagenConfig dcfg;
  GrayImage img = GrayImage::blank(120, 100);
  draw_rect(img, 30, 20, 69, 79);
  CHECK_THROWS_AS(parse_raster(img, {"type_1_block", "type_2_block"},
                               default_library(), dcfg),
                  LabelMismatch);
}

TEST_CASE("png round trip", "[sketchio]") {
  GrayImage img = GrayImage::blank(33, 21);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      img.at(x, y) = static_cast<std::uint8_t>((x * 7 + y * 13) % 256);
  const std::string path = temp_path("roundtrip.png");
  write_png_gray(path, img);
  const GrayImage back = read_png_gray(path);
  REQUIRE(back.width == img.width);
  REQUIRE(back.height == img.height);
  CHECK(back.pixels == img.pixels);
}

TEST_CASE("dilation closes stroke gaps", "[sketchio]") {
  DatagenConfig dcfg;
  GrayImage img = GrayImage::blank(100, 100);
  draw_rect(img, 20, 20, 79, 79);
  // punch small gaps in the outline
  img.at(50, 20) = 255;
  img.at(20, 50) = 255;
  const auto regions = enclosed_regions(img, dcfg.dilate_px);
  REQUIRE(regions.size() == 1);
}
