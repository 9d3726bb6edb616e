#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <string>
#include <vector>

#include <png.h>

#include "sketchstack/config.hpp"
#include "sketchstack/sketch.hpp"

namespace sketchstack {

struct LabelMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptySketch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// 8-bit grayscale image, row 0 at the top.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }
  std::uint8_t at(int x, int y) const {
    return pixels[std::size_t(y) * width + x];
  }
  static GrayImage blank(int w, int h, std::uint8_t value = 255) {
    GrayImage img;
    img.width = w;
    img.height = h;
    img.pixels.assign(std::size_t(w) * h, value);
    return img;
  }
};

// --- PNG I/O ------------------------------------------------------------------

inline void write_png_gray(const std::string& path, const GrayImage& img) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("cannot open for writing: " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("libpng failure while writing " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(&img.pixels[std::size_t(y) * img.width]);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

inline GrayImage read_png_gray(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("cannot open for reading: " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError("libpng failure while reading " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type & PNG_COLOR_MASK_COLOR || color_type == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray(png, PNG_ERROR_ACTION_NONE, -1, -1);
  if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  GrayImage img;
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.pixels.assign(std::size_t(img.width) * img.height, 0);
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = &img.pixels[std::size_t(y) * img.width];
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

// --- image ops ----------------------------------------------------------------

// Square dilation of an ink mask (true = ink) by `radius` pixels.
inline std::vector<bool> dilate_mask(const std::vector<bool>& mask, int w, int h,
                                     int radius) {
  if (radius <= 0) return mask;
  std::vector<bool> out(mask.size(), false);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mask[std::size_t(y) * w + x]) continue;
      const int x0 = std::max(0, x - radius), x1 = std::min(w - 1, x + radius);
      const int y0 = std::max(0, y - radius), y1 = std::min(h - 1, y + radius);
      for (int yy = y0; yy <= y1; ++yy)
        for (int xx = x0; xx <= x1; ++xx) out[std::size_t(yy) * w + xx] = true;
    }
  return out;
}

inline void gaussian_blur(GrayImage& img, double sigma) {
  if (sigma <= 0) return;
  const int radius = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;
  const int w = img.width, h = img.height;
  std::vector<double> tmp(std::size_t(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        const int xx = std::clamp(x + i, 0, w - 1);
        acc += kernel[i + radius] * img.at(xx, y);
      }
      tmp[std::size_t(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        const int yy = std::clamp(y + i, 0, h - 1);
        acc += kernel[i + radius] * tmp[std::size_t(yy) * w + x];
      }
      img.at(x, y) = static_cast<std::uint8_t>(std::clamp(acc, 0.0, 255.0));
    }
}

struct PixelRegion {
  int min_x = 0, min_y = 0, max_x = 0, max_y = 0;  // inclusive, image coords
  int area = 0;
};

// Enclosed-region finder: ink = pixel < 128, dilated; background flood-filled
// from the border; remaining non-ink components are enclosed regions.
inline std::vector<PixelRegion> enclosed_regions(const GrayImage& img,
                                                 int dilate_px) {
  const int w = img.width, h = img.height;
  std::vector<bool> ink(std::size_t(w) * h, false);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) ink[std::size_t(y) * w + x] = img.at(x, y) < 128;
  ink = dilate_mask(ink, w, h, dilate_px);

  // 0 unvisited, 1 background, 2 ink, 3+ region index
  std::vector<int> label(std::size_t(w) * h, 0);
  for (std::size_t i = 0; i < ink.size(); ++i)
    if (ink[i]) label[i] = 2;
  std::deque<std::pair<int, int>> queue;
  auto push_bg = [&](int x, int y) {
    const std::size_t i = std::size_t(y) * w + x;
    if (label[i] == 0) {
      label[i] = 1;
      queue.emplace_back(x, y);
    }
  };
  for (int x = 0; x < w; ++x) {
    push_bg(x, 0);
    push_bg(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    push_bg(0, y);
    push_bg(w - 1, y);
  }
  const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
  while (!queue.empty()) {
    auto [x, y] = queue.front();
    queue.pop_front();
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx[k], ny = y + dy[k];
      if (nx >= 0 && nx < w && ny >= 0 && ny < h) push_bg(nx, ny);
    }
  }

  std::vector<PixelRegion> regions;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (label[std::size_t(y) * w + x] != 0) continue;
      PixelRegion r{x, y, x, y, 0};
      std::deque<std::pair<int, int>> q2{{x, y}};
      label[std::size_t(y) * w + x] = 3 + static_cast<int>(regions.size());
      while (!q2.empty()) {
        auto [cx, cy] = q2.front();
        q2.pop_front();
        ++r.area;
        r.min_x = std::min(r.min_x, cx);
        r.max_x = std::max(r.max_x, cx);
        r.min_y = std::min(r.min_y, cy);
        r.max_y = std::max(r.max_y, cy);
        for (int k = 0; k < 4; ++k) {
          const int nx = cx + dx[k], ny = cy + dy[k];
          if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
          std::size_t i = std::size_t(ny) * w + nx;
          if (label[i] == 0) {
            label[i] = label[std::size_t(cy) * w + cx];
            q2.emplace_back(nx, ny);
          }
        }
      }
      regions.push_back(r);
    }
  return regions;
}

// Parses a raster sketch: extract enclosed regions, fit one box per region,
// pair them with sidecar labels in (z, then x) scan order, then normalize.
// Region boxes are grown by (dilate_px + stroke_px) to undo the stroke and
// dilation shrink, recovering the drawn outline's bounding box.
inline Sketch parse_raster(const GrayImage& img,
                           const std::vector<std::string>& labels,
                           const BlockLibrary& lib, const DatagenConfig& cfg,
                           double target_width = 3.0) {
  std::vector<PixelRegion> regions = enclosed_regions(img, cfg.dilate_px);
  // Discard speck regions produced by blur artifacts.
  regions.erase(std::remove_if(regions.begin(), regions.end(),
                               [](const PixelRegion& r) { return r.area < 9; }),
                regions.end());
  if (regions.empty()) throw EmptySketch("no enclosed regions in raster sketch");
  if (regions.size() != labels.size())
    throw LabelMismatch("raster has " + std::to_string(regions.size()) +
                        " regions but sidecar lists " +
                        std::to_string(labels.size()) + " labels");

  // Scene z points up while image rows grow downward: sort by bottom edge
  // (max_y descending => z ascending), then by x.
  std::vector<std::size_t> order(regions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (regions[a].max_y != regions[b].max_y)
      return regions[a].max_y > regions[b].max_y;
    return regions[a].min_x < regions[b].min_x;
  });

  const double grow = cfg.dilate_px + cfg.stroke_px;
  Sketch sketch;
  sketch.library = lib;
  sketch.source = SketchSource::Raster;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const PixelRegion& r = regions[order[k]];
    const BlockType* t = lib.find(labels[k]);
    if (t == nullptr)
      throw ParseError("unknown type label \"" + labels[k] + "\" in sidecar");
    SketchBox b;
    b.id = static_cast<int>(k);
    b.type_id = t->id;
    b.w_hat = (r.max_x - r.min_x + 1) + 2 * grow;
    b.h_hat = (r.max_y - r.min_y + 1) + 2 * grow;
    b.cx = 0.5 * (r.min_x + r.max_x);
    b.cz = img.height - 1 - 0.5 * (r.min_y + r.max_y);  // flip to z-up
    sketch.boxes.push_back(b);
  }
  return normalize(sketch, target_width);
}

inline Sketch parse_raster_files(const std::string& png_path,
                                 const std::string& labels_path,
                                 const BlockLibrary& lib,
                                 const DatagenConfig& cfg,
                                 double target_width = 3.0) {
  const GrayImage img = read_png_gray(png_path);
  const json j = read_json_file(labels_path);
  std::vector<std::string> labels;
  for (const json& l : j) labels.push_back(l.get<std::string>());
  return parse_raster(img, labels, lib, cfg, target_width);
}

}  // namespace sketchstack
