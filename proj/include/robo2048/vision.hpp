// Copyright 2026 The robo2048 Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "robo2048/game.hpp"
#include "robo2048/nn.hpp"
#include "robo2048/rng.hpp"

namespace robo2048::vision {

/// 8-bit grayscale image, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
    if (w < 0 || h < 0) throw std::invalid_argument("image: negative size");
  }

  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t clamped(int x, int y) const {
    return at(std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1));
  }

  friend bool operator==(const Image&, const Image&) = default;
};

inline constexpr int kTileSize = 32;
inline constexpr int kClasses = 12;

/// A 32x32 tile crop.
using TileImage = Image;

/// Class index 0..11 for {empty, 2, 4, ..., 2048}; identical to the board exponent.
using TileLabel = int;

// ---------------------------------------------------------------------------
// PGM (P5) I/O

inline void write_pgm(const std::string& path, const Image& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
}

inline Image read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255) throw std::runtime_error("pgm: unsupported header in " + path);
  is.get();
  Image img(w, h);
  is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!is) throw std::runtime_error("pgm: truncated " + path);
  return img;
}

// ---------------------------------------------------------------------------
// Rendering

namespace font {

inline constexpr int kGlyphW = 7;
inline constexpr int kGlyphH = 9;

// clang-format off
inline constexpr std::array<std::array<const char*, kGlyphH>, 10> kDigits{{
  {" ##### ", "##   ##", "##  ###", "## # ##", "### ###", "##   ##", "##   ##", "##   ##", " ##### "},
  {"   ##  ", "  ###  ", " ####  ", "   ##  ", "   ##  ", "   ##  ", "   ##  ", "   ##  ", " ######"},
  {" ##### ", "##   ##", "     ##", "    ## ", "   ##  ", "  ##   ", " ##    ", "##     ", "#######"},
  {" ##### ", "##   ##", "     ##", "     ##", "  #### ", "     ##", "     ##", "##   ##", " ##### "},
  {"    ## ", "   ### ", "  # ## ", " #  ## ", "#   ## ", "#######", "    ## ", "    ## ", "    ## "},
  {"#######", "##     ", "##     ", "###### ", "     ##", "     ##", "     ##", "##   ##", " ##### "},
  {"  #### ", " ##    ", "##     ", "###### ", "##   ##", "##   ##", "##   ##", "##   ##", " ##### "},
  {"#######", "     ##", "    ## ", "    ## ", "   ##  ", "   ##  ", "  ##   ", "  ##   ", "  ##   "},
  {" ##### ", "##   ##", "##   ##", " ##### ", "##   ##", "##   ##", "##   ##", "##   ##", " ##### "},
  {" ##### ", "##   ##", "##   ##", "##   ##", " ######", "     ##", "     ##", "    ## ", " ####  "},
}};
// clang-format on

inline bool ink(int digit, int gx, int gy) {
  if (gx < 0 || gy < 0 || gx >= kGlyphW || gy >= kGlyphH) return false;
  return kDigits[static_cast<std::size_t>(digit)][static_cast<std::size_t>(gy)][gx] == '#';
}

}  // namespace font

struct RenderOptions {
  int cell = 64;           // pixels per board cell
  int frame = 2;           // dark frame drawn inside every cell edge
  int margin = 16;         // canvas padding around the board
  double noise_sigma = 8;  // upper bound of the per-image noise level
  int max_shift = 2;       // board translation, pixels
  double max_rotation_deg = 2;
  int max_brightness = 20; // |global brightness offset|
  int supersample = 2;
};

/// Scene layout and the perturbation drawn for one render.
struct RenderInfo {
  int board_x = 0;  // top-left of the unrotated board
  int board_y = 0;
  int board_size = 0;
  double rotation_deg = 0;
  double noise_sigma = 0;
  int brightness = 0;
};

/// Per-class tile shades and ink level, fixed by a style seed.
struct RenderStyle {
  std::array<int, kClasses> tile_shade{};
  int ink = 40;
  int frame = 35;
  int background = 225;

  static RenderStyle from_seed(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x57'71'e0ULL));
    RenderStyle s;
    for (auto& v : s.tile_shade) v = 165 + static_cast<int>(rng.uniform_index(41));
    s.ink = 25 + static_cast<int>(rng.uniform_index(31));
    s.frame = 25 + static_cast<int>(rng.uniform_index(21));
    s.background = 215 + static_cast<int>(rng.uniform_index(26));
    return s;
  }
};

namespace detail {

struct TextLayout {
  std::string text;
  double scale = 1;
  double x0 = 0, y0 = 0;  // top-left inside the cell
};

inline TextLayout layout_text(int exponent, int cell, int frame) {
  TextLayout t;
  t.text = std::to_string(1 << exponent);
  const int n = static_cast<int>(t.text.size());
  const double w = n * font::kGlyphW + (n - 1);
  const double inner = cell - 2 * frame;
  t.scale = std::min(0.8 * inner / w, 0.5 * inner / font::kGlyphH);
  t.x0 = frame + 0.5 * (inner - w * t.scale);
  t.y0 = frame + 0.5 * (inner - font::kGlyphH * t.scale);
  return t;
}

inline bool text_ink(const TextLayout& t, double lx, double ly) {
  const double gx = (lx - t.x0) / t.scale;
  const double gy = (ly - t.y0) / t.scale;
  if (gx < 0 || gy < 0) return false;
  const int col = static_cast<int>(gx);
  const int row = static_cast<int>(gy);
  const int ch = col / (font::kGlyphW + 1);
  const int within = col % (font::kGlyphW + 1);
  if (ch >= static_cast<int>(t.text.size()) || within >= font::kGlyphW) return false;
  return font::ink(t.text[static_cast<std::size_t>(ch)] - '0', within, row);
}

}  // namespace detail

/// Noise-free scene: what lies at board coordinates (u, v).
class BoardScene {
 public:
  BoardScene(const game::Board& board, const RenderStyle& style, const RenderOptions& opt)
      : board_(board), style_(style), opt_(opt) {
    for (int i = 0; i < game::kCells; ++i)
      if (board.cells[i]) layouts_[i] = detail::layout_text(board.cells[i], opt.cell, opt.frame);
  }

  int size() const { return game::kSide * opt_.cell; }

  enum class Kind { Outside, Frame, Tile, Ink };

  Kind kind(double u, double v) const {
    const int n = size();
    if (u < 0 || v < 0 || u >= n || v >= n) return Kind::Outside;
    const int cx = static_cast<int>(u) / opt_.cell;
    const int cy = static_cast<int>(v) / opt_.cell;
    const double lu = u - cx * opt_.cell;
    const double lv = v - cy * opt_.cell;
    if (lu < opt_.frame || lv < opt_.frame || lu >= opt_.cell - opt_.frame || lv >= opt_.cell - opt_.frame)
      return Kind::Frame;
    const int i = cy * game::kSide + cx;
    if (board_.cells[i] && detail::text_ink(layouts_[i], lu, lv)) return Kind::Ink;
    return Kind::Tile;
  }

  double shade(double u, double v) const {
    switch (kind(u, v)) {
      case Kind::Outside: return style_.background;
      case Kind::Frame: return style_.frame;
      case Kind::Ink: return style_.ink;
      case Kind::Tile: {
        const int i = static_cast<int>(v) / opt_.cell * game::kSide + static_cast<int>(u) / opt_.cell;
        return style_.tile_shade[board_.cells[i]];
      }
    }
    return 0;
  }

 private:
  game::Board board_;
  RenderStyle style_;
  RenderOptions opt_;
  std::array<detail::TextLayout, game::kCells> layouts_{};
};

inline int canvas_size(const RenderOptions& opt) { return game::kSide * opt.cell + 2 * opt.margin; }

/// Renders `board` as a screenshot. The style seed fixes shades; `rng`
/// draws the translation, rotation, brightness offset and noise.
inline Image render_board(const game::Board& board, std::uint64_t style_seed, Rng& rng,
                          const RenderOptions& opt = {}, RenderInfo* info = nullptr) {
  const RenderStyle style = RenderStyle::from_seed(style_seed);
  const BoardScene scene(board, style, opt);
  RenderInfo ri;
  ri.board_size = scene.size();
  ri.board_x = opt.margin + (opt.max_shift ? static_cast<int>(rng.uniform_index(2 * opt.max_shift + 1)) - opt.max_shift : 0);
  ri.board_y = opt.margin + (opt.max_shift ? static_cast<int>(rng.uniform_index(2 * opt.max_shift + 1)) - opt.max_shift : 0);
  ri.rotation_deg = rng.uniform(-opt.max_rotation_deg, opt.max_rotation_deg);
  ri.brightness = opt.max_brightness ? static_cast<int>(rng.uniform_index(2 * opt.max_brightness + 1)) - opt.max_brightness : 0;
  ri.noise_sigma = rng.uniform(0, opt.noise_sigma);

  const int n = canvas_size(opt);
  Image img(n, n);
  const double c = 0.5 * scene.size();
  const double th = ri.rotation_deg * std::numbers::pi / 180.0;
  const double ct = std::cos(th), st = std::sin(th);
  const int ss = std::max(1, opt.supersample);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      double acc = 0;
      for (int sy = 0; sy < ss; ++sy)
        for (int sx = 0; sx < ss; ++sx) {
          // canvas -> board coordinates, rotating about the board centre
          const double px = x + (sx + 0.5) / ss - ri.board_x - c;
          const double py = y + (sy + 0.5) / ss - ri.board_y - c;
          const double u = ct * px + st * py + c;
          const double v = -st * px + ct * py + c;
          acc += scene.shade(u, v);
        }
      double val = acc / (ss * ss) + ri.brightness;
      if (ri.noise_sigma > 0) val += ri.noise_sigma * rng.normal();
      img.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(val), 0L, 255L));
    }
  if (info) *info = ri;
  return img;
}

// ---------------------------------------------------------------------------
// Boundary detection

/// Inclusive pixel bounds.
struct Box {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  friend bool operator==(const Box&, const Box&) = default;
};

struct CannyOptions {
  double blur_sigma = 1.0;
  double low_ratio = 0.2;   // of the maximum gradient magnitude
  double high_ratio = 0.6;
};

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma, int radius) {
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double s = 0;
  for (int i = -radius; i <= radius; ++i) s += k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= s;
  return k;
}

/// Separable Gaussian blur with replicated borders.
inline std::vector<double> blur(const Image& img, double sigma, int radius) {
  const auto k = gaussian_kernel(sigma, radius);
  const int w = img.width, h = img.height;
  std::vector<double> tmp(static_cast<std::size_t>(w) * h), out(tmp.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int i = -radius; i <= radius; ++i) s += k[static_cast<std::size_t>(i + radius)] * img.clamped(x + i, y);
      tmp[static_cast<std::size_t>(y) * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int i = -radius; i <= radius; ++i)
        s += k[static_cast<std::size_t>(i + radius)] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = s;
    }
  return out;
}

}  // namespace detail

/// Canny edge map (255 = edge): Gaussian blur, Sobel gradients, non-maximum
/// suppression, hysteresis between low and high fractions of the maximum
/// gradient magnitude.
inline Image canny(const Image& img, const CannyOptions& opt = {}) {
  const int w = img.width, h = img.height;
  Image edges(w, h, 0);
  if (w < 3 || h < 3) return edges;
  const auto b = detail::blur(img, opt.blur_sigma, std::max(1, static_cast<int>(std::ceil(2.5 * opt.blur_sigma))));
  auto px = [&](int x, int y) { return b[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)]; };
  std::vector<double> mag(b.size()), gxv(b.size()), gyv(b.size());
  double max_mag = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double gx = px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1) - px(x - 1, y - 1) - 2 * px(x - 1, y) - px(x - 1, y + 1);
      const double gy = px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1) - px(x - 1, y - 1) - 2 * px(x, y - 1) - px(x + 1, y - 1);
      const auto i = static_cast<std::size_t>(y) * w + x;
      gxv[i] = gx;
      gyv[i] = gy;
      mag[i] = std::hypot(gx, gy);
      max_mag = std::max(max_mag, mag[i]);
    }
  if (max_mag <= 1e-9) return edges;
  auto m = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0.0;
    return mag[static_cast<std::size_t>(y) * w + x];
  };
  const double lo = opt.low_ratio * max_mag, hi = opt.high_ratio * max_mag;
  // 0 none, 1 weak, 2 strong
  std::vector<std::uint8_t> cls(b.size(), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto i = static_cast<std::size_t>(y) * w + x;
      const double g = mag[i];
      if (g < lo) continue;
      double ang = std::atan2(gyv[i], gxv[i]) * 180.0 / std::numbers::pi;
      if (ang < 0) ang += 180;
      int dx, dy;
      if (ang < 22.5 || ang >= 157.5) dx = 1, dy = 0;
      else if (ang < 67.5) dx = 1, dy = 1;
      else if (ang < 112.5) dx = 0, dy = 1;
      else dx = -1, dy = 1;
      // ties go to the pixel on the negative side so flat ridges keep one pixel
      if (g < m(x + dx, y + dy) || g <= m(x - dx, y - dy)) continue;
      cls[i] = g >= hi ? 2 : 1;
    }
  std::vector<int> stack;
  for (int i = 0; i < w * h; ++i)
    if (cls[static_cast<std::size_t>(i)] == 2) stack.push_back(i);
  for (int i : stack) edges.pixels[static_cast<std::size_t>(i)] = 255;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const int x = i % w, y = i / w;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const auto j = static_cast<std::size_t>(ny) * w + nx;
        if (cls[j] == 1 && edges.pixels[j] == 0) {
          edges.pixels[j] = 255;
          stack.push_back(static_cast<int>(j));
        }
      }
  }
  return edges;
}

class NoBoardFound : public std::runtime_error {
 public:
  NoBoardFound() : std::runtime_error("no board found") {}
};

/// Bounding box of the largest 8-connected component of the Canny edge map.
inline Box detect_boundary(const Image& img, const CannyOptions& opt = {}) {
  const Image edges = canny(img, opt);
  const int w = img.width, h = img.height;
  std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
  Box best;
  std::size_t best_size = 0;
  std::vector<int> stack;
  for (int start = 0; start < w * h; ++start) {
    if (!edges.pixels[static_cast<std::size_t>(start)] || label[static_cast<std::size_t>(start)] >= 0) continue;
    Box box{w, h, -1, -1};
    std::size_t count = 0;
    stack.assign(1, start);
    label[static_cast<std::size_t>(start)] = start;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      const int x = i % w, y = i / w;
      ++count;
      box.x0 = std::min(box.x0, x);
      box.y0 = std::min(box.y0, y);
      box.x1 = std::max(box.x1, x);
      box.y1 = std::max(box.y1, y);
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const auto j = static_cast<std::size_t>(ny) * w + nx;
          if (edges.pixels[j] && label[j] < 0) {
            label[j] = start;
            stack.push_back(static_cast<int>(j));
          }
        }
    }
    if (count > best_size) {
      best_size = count;
      best = box;
    }
  }
  if (best_size == 0) throw NoBoardFound();
  return best;
}

// ---------------------------------------------------------------------------
// Thresholding and tiles

struct ThresholdOptions {
  int window = 11;
  double sigma = 3.0;
  double offset = 5.0;  // C
};

/// 255 where the pixel is darker than its Gaussian-weighted local mean minus C.
inline Image adaptive_threshold(const Image& img, const ThresholdOptions& opt = {}) {
  const auto mean = detail::blur(img, opt.sigma, opt.window / 2);
  Image out(img.width, img.height, 0);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    if (img.pixels[i] < mean[i] - opt.offset) out.pixels[i] = 255;
  return out;
}

inline double bilinear(const Image& img, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  const double a = img.clamped(x0, y0), b = img.clamped(x0 + 1, y0);
  const double c = img.clamped(x0, y0 + 1), d = img.clamped(x0 + 1, y0 + 1);
  return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d);
}

/// Splits the box into a 4x4 grid and resamples each cell to 32x32, row-major.
/// The box holds edge pixels; the thin dark frame puts their centres half a
/// pixel outside the board's outline, so the board spans [x0 + 1, x1].
inline std::vector<TileImage> extract_tiles(const Image& img, const Box& box) {
  if (box.width() <= 2 || box.height() <= 2) throw std::invalid_argument("extract_tiles: degenerate box");
  const double cw = (box.width() - 2) / double(game::kSide);
  const double ch = (box.height() - 2) / double(game::kSide);
  std::vector<TileImage> tiles;
  tiles.reserve(game::kCells);
  for (int r = 0; r < game::kSide; ++r)
    for (int c = 0; c < game::kSide; ++c) {
      TileImage t(kTileSize, kTileSize);
      for (int y = 0; y < kTileSize; ++y)
        for (int x = 0; x < kTileSize; ++x) {
          const double sx = box.x0 + 0.5 + (c + (x + 0.5) / kTileSize) * cw;
          const double sy = box.y0 + 0.5 + (r + (y + 0.5) / kTileSize) * ch;
          t.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(bilinear(img, sx, sy)), 0L, 255L));
        }
      tiles.push_back(std::move(t));
    }
  return tiles;
}

struct AugmentOptions {
  double max_rotation_deg = 10;
  double max_shift = 3;
};

/// Rotation about the tile centre by `deg` followed by a shift of (dx, dy),
/// sampled bilinearly with replicated borders.
inline TileImage transform_tile(const TileImage& tile, double deg, double dx, double dy) {
  TileImage out(tile.width, tile.height);
  const double th = deg * std::numbers::pi / 180.0;
  const double ct = std::cos(th), st = std::sin(th);
  const double cx = 0.5 * (tile.width - 1), cy = 0.5 * (tile.height - 1);
  for (int y = 0; y < tile.height; ++y)
    for (int x = 0; x < tile.width; ++x) {
      const double px = x - dx - cx, py = y - dy - cy;
      const double sx = ct * px + st * py + cx;
      const double sy = -st * px + ct * py + cy;
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(bilinear(tile, sx, sy)), 0L, 255L));
    }
  return out;
}

/// Random rotation within +-max_rotation_deg and shift within +-max_shift.
inline TileImage augment(const TileImage& tile, Rng& rng, const AugmentOptions& opt = {}) {
  const double deg = rng.uniform(-opt.max_rotation_deg, opt.max_rotation_deg);
  const double dx = rng.uniform(-opt.max_shift, opt.max_shift);
  const double dy = rng.uniform(-opt.max_shift, opt.max_shift);
  return transform_tile(tile, deg, dx, dy);
}

/// Zero-mean, unit-variance network input (all zeros for a constant tile).
inline void normalize_tile(const TileImage& tile, float* out) {
  const std::size_t n = tile.pixels.size();
  double mean = 0;
  for (auto p : tile.pixels) mean += p;
  mean /= double(n);
  double var = 0;
  for (auto p : tile.pixels) var += (p - mean) * (p - mean);
  var /= double(n);
  const double inv = var > 1e-12 ? 1.0 / std::sqrt(var) : 0.0;
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>((tile.pixels[i] - mean) * inv);
}

inline Eigen::VectorXf normalize_tile(const TileImage& tile) {
  Eigen::VectorXf v(static_cast<Eigen::Index>(tile.pixels.size()));
  normalize_tile(tile, v.data());
  return v;
}

// ---------------------------------------------------------------------------
// Dataset

struct Sample {
  TileImage image;
  TileLabel label = 0;
  int source_tile = 0;
  bool test = false;
};

struct Dataset {
  std::vector<Sample> samples;
  int source_tiles = 0;

  std::size_t count(bool test) const {
    return static_cast<std::size_t>(std::count_if(samples.begin(), samples.end(), [test](const Sample& s) { return s.test == test; }));
  }
};

struct DatasetOptions {
  int variants = 6;          // augmented copies per source tile
  double test_fraction = 0.1;
  double min_class_share = 0.05;
  RenderOptions render;
  AugmentOptions augment;
};

/// Random board with every cell drawn uniformly from the 12 classes.
inline game::Board random_class_board(Rng& rng) {
  game::Board b;
  for (auto& c : b.cells) c = static_cast<std::uint8_t>(rng.uniform_index(kClasses));
  return b;
}

/// Renders `n_boards` class-balanced boards, cuts them into labelled
/// tiles via the recognition front end, and expands every source tile into
/// `variants` augmented samples. The train/test split is drawn per source
/// tile so augmentations of one tile never straddle it.
inline Dataset build_dataset(int n_boards, Rng& rng, const DatasetOptions& opt = {}) {
  if (n_boards < 1) throw std::invalid_argument("build_dataset: need at least one board");
  Dataset ds;
  std::array<long, kClasses> counts{};
  long total = 0;
  int accepted = 0;
  while (accepted < n_boards) {
    const game::Board b = random_class_board(rng);
    // Rejection: once enough tiles exist, keep a board only if every class
    // would still hold at least min_class_share of the tiles.
    auto next = counts;
    for (auto c : b.cells) ++next[c];
    const long next_total = total + game::kCells;
    if (next_total >= kClasses * game::kCells) {
      bool ok = true;
      for (long k : next) ok = ok && double(k) >= opt.min_class_share * double(next_total);
      if (!ok) continue;
    }
    counts = next;
    total = next_total;
    ++accepted;

    const std::uint64_t style = rng.next_u64();
    const Image img = render_board(b, style, rng, opt.render);
    const auto tiles = extract_tiles(img, detect_boundary(img));
    for (int i = 0; i < game::kCells; ++i) {
      const int id = ds.source_tiles++;
      const bool test = rng.bernoulli(opt.test_fraction);
      for (int v = 0; v < opt.variants; ++v)
        ds.samples.push_back({augment(tiles[static_cast<std::size_t>(i)], rng, opt.augment), b.cells[i], id, test});
    }
  }
  return ds;
}

/// Writes every sample as a PGM under `dir` plus manifest.csv
/// (path,label,source_tile_id,split).
inline void write_dataset(const Dataset& ds, const std::string& dir) {
  std::ofstream m(dir + "/manifest.csv");
  if (!m) throw std::runtime_error("cannot write " + dir + "/manifest.csv");
  m << "path,label,source_tile_id,split\n";
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    const std::string name = "tile_" + std::to_string(i) + ".pgm";
    write_pgm(dir + "/" + name, s.image);
    m << name << ',' << s.label << ',' << s.source_tile << ',' << (s.test ? "test" : "train") << '\n';
  }
}

// ---------------------------------------------------------------------------
// Classifier

using Classifier = nn::Network<float>;

struct ClassifierTraining {
  int epochs = 8;
  double learning_rate = 0.05;
  int batch_size = 64;
  int hidden = 500;
  std::uint64_t seed = 1;
};

struct ClassifierReport {
  std::vector<double> epoch_loss;  // mean training cross-entropy per epoch
};

namespace detail {

inline Eigen::MatrixXf batch_inputs(const std::vector<const Sample*>& batch) {
  Eigen::MatrixXf in(kTileSize * kTileSize, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t j = 0; j < batch.size(); ++j) normalize_tile(batch[j]->image, in.col(static_cast<Eigen::Index>(j)).data());
  return in;
}

}  // namespace detail

/// 1024-500-12 network trained with softmax cross-entropy and minibatch SGD
/// on the training split.
inline Classifier train_classifier(const Dataset& ds, const ClassifierTraining& cfg = {},
                                   ClassifierReport* report = nullptr) {
  std::vector<const Sample*> train;
  for (const auto& s : ds.samples)
    if (!s.test) train.push_back(&s);
  if (train.empty()) throw std::invalid_argument("train_classifier: empty training split");
  Classifier net = nn::init_network<float>({kTileSize * kTileSize, cfg.hidden, kClasses}, cfg.seed);
  Rng rng(derive_seed(cfg.seed, 0xc1a55ULL));
  std::vector<std::size_t> order(train.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const Sample*> batch;
      for (std::size_t k = start; k < end; ++k) batch.push_back(train[order[k]]);
      nn::ForwardCache<float> cache;
      const Eigen::MatrixXf logits = nn::forward(net, detail::batch_inputs(batch), &cache);
      Eigen::MatrixXf grad = nn::softmax(logits);
      const float inv_n = 1.0f / static_cast<float>(batch.size());
      for (std::size_t j = 0; j < batch.size(); ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        loss_sum -= std::log(std::max(1e-30, double(grad(batch[j]->label, col))));
        grad(batch[j]->label, col) -= 1.0f;
      }
      grad *= inv_n;
      nn::sgd_step(net, nn::backward(net, cache, grad), cfg.learning_rate);
    }
    if (report) report->epoch_loss.push_back(loss_sum / double(train.size()));
  }
  return net;
}

struct Classification {
  TileLabel label = 0;
  double confidence = 0;
  std::array<double, kClasses> probabilities{};
};

inline Classification classify_tile(const Classifier& net, const TileImage& tile) {
  const Eigen::VectorXf p = nn::softmax(Eigen::MatrixXf(nn::forward(net, normalize_tile(tile)))).col(0);
  Classification c;
  for (int k = 0; k < kClasses; ++k) c.probabilities[static_cast<std::size_t>(k)] = p(k);
  Eigen::Index best = 0;
  p.maxCoeff(&best);
  c.label = static_cast<TileLabel>(best);
  c.confidence = p(best);
  return c;
}

struct Confusion {
  std::array<std::array<long, kClasses>, kClasses> counts{};  // [truth][predicted]

  long total() const {
    long s = 0;
    for (const auto& r : counts)
      for (long v : r) s += v;
    return s;
  }
  double accuracy() const {
    long ok = 0;
    for (int k = 0; k < kClasses; ++k) ok += counts[static_cast<std::size_t>(k)][static_cast<std::size_t>(k)];
    const long t = total();
    return t ? double(ok) / double(t) : 0.0;
  }
};

/// Confusion matrix of the classifier on one split.
inline Confusion evaluate_classifier(const Classifier& net, const Dataset& ds, bool test_split = true) {
  Confusion cm;
  std::vector<const Sample*> batch;
  auto flush = [&] {
    if (batch.empty()) return;
    const Eigen::MatrixXf logits = nn::forward(net, detail::batch_inputs(batch));
    for (std::size_t j = 0; j < batch.size(); ++j) {
      Eigen::Index best = 0;
      logits.col(static_cast<Eigen::Index>(j)).maxCoeff(&best);
      ++cm.counts[static_cast<std::size_t>(batch[j]->label)][static_cast<std::size_t>(best)];
    }
    batch.clear();
  };
  for (const auto& s : ds.samples) {
    if (s.test != test_split) continue;
    batch.push_back(&s);
    if (batch.size() == 256) flush();
  }
  flush();
  return cm;
}

/// Boundary detection, tile extraction and per-tile classification.
inline game::Board read_board(const Image& img, const Classifier& net) {
  const auto tiles = extract_tiles(img, detect_boundary(img));
  Eigen::MatrixXf in(kTileSize * kTileSize, game::kCells);
  for (int i = 0; i < game::kCells; ++i) normalize_tile(tiles[static_cast<std::size_t>(i)], in.col(i).data());
  const Eigen::MatrixXf logits = nn::forward(net, in);
  game::Board b;
  for (int i = 0; i < game::kCells; ++i) {
    Eigen::Index best = 0;
    logits.col(i).maxCoeff(&best);
    b.cells[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(best);
  }
  return b;
}

/// Replaces each cell, with probability `rate`, by a uniformly drawn different class.
inline game::Board inject_misclassification(const game::Board& board, double rate, Rng& rng) {
  if (!(rate >= 0 && rate <= 1)) throw std::invalid_argument("inject_misclassification: rate must be in [0,1]");
  game::Board out = board;
  for (auto& c : out.cells) {
    if (!rng.bernoulli(rate)) continue;
    int k = static_cast<int>(rng.uniform_index(kClasses - 1));
    if (k >= c) ++k;
    c = static_cast<std::uint8_t>(k);
  }
  return out;
}

}  // namespace robo2048::vision
