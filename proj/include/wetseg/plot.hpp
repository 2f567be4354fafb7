#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "wetseg/common.hpp"

namespace wetseg {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

/// Ten distinguishable series colors; one per run in multi-run charts.
inline const std::array<Rgb, 10>& series_palette() {
  static const std::array<Rgb, 10> palette{{{31, 119, 180},
                                            {255, 127, 14},
                                            {44, 160, 44},
                                            {214, 39, 40},
                                            {148, 103, 189},
                                            {140, 86, 75},
                                            {227, 119, 194},
                                            {127, 127, 127},
                                            {188, 189, 34},
                                            {23, 190, 207}}};
  return palette;
}

class Canvas {
 public:
  Canvas(int width, int height, Rgb fill = {255, 255, 255})
      : w_(width), h_(height), px_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return w_; }
  int height() const { return h_; }

  void set(int x, int y, Rgb c) {
    if (x >= 0 && x < w_ && y >= 0 && y < h_) px_[static_cast<std::size_t>(y) * w_ + x] = c;
  }

  void hline(int x0, int x1, int y, Rgb c) {
    for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) set(x, y, c);
  }
  void vline(int x, int y0, int y1, Rgb c) {
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y) set(x, y, c);
  }

  void line(int x0, int y0, int x1, int y1, Rgb c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      set(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void save_png(const std::string& path) const {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) fail("plot: cannot create " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info || setjmp(png_jmpbuf(png))) {
      std::fclose(fp);
      png_destroy_write_struct(&png, &info);
      fail("plot: png encode failed for " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, w_, h_, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w_) * 3);
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        const Rgb& p = px_[static_cast<std::size_t>(y) * w_ + x];
        row[3 * x] = p.r;
        row[3 * x + 1] = p.g;
        row[3 * x + 2] = p.b;
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
  }

 private:
  int w_, h_;
  std::vector<Rgb> px_;
};

namespace detail {

// 5x7 glyphs for tick labels, 35 cells row-major.
inline const char* glyph(char c) {
  switch (c) {
    case '0': return ".###.#...##..###.#.###..##...#.###.";
    case '1': return "..#...##....#....#....#....#...###.";
    case '2': return ".###.#...#....#...#...#...#...#####";
    case '3': return ".###.#...#....#..##.....##...#.###.";
    case '4': return "...#...##..#.#.#..#.#####...#....#.";
    case '5': return "######....####.....#....##...#.###.";
    case '6': return ".###.#....####.#...##...##...#.###.";
    case '7': return "#####....#...#...#....#....#....#..";
    case '8': return ".###.#...##...#.###.#...##...#.###.";
    case '9': return ".###.#...##...#.####....#....#.###.";
    case '.': return "..........................##...##..";
    case '-': return "...............#####...............";
    case '+': return ".......#....#..#####..#....#.......";
    case 'e': return "...........###.#...######.#.....##.";
    default: return nullptr;
  }
}

}  // namespace detail

/// Draws a short numeric string (digits, '.', '-', '+', 'e') at (x, y).
inline void draw_label(Canvas& canvas, int x, int y, const std::string& text, Rgb color) {
  for (char c : text) {
    const char* g = detail::glyph(c);
    if (g) {
      for (int gy = 0; gy < 7; ++gy)
        for (int gx = 0; gx < 5; ++gx)
          if (g[gy * 5 + gx] == '#') canvas.set(x + gx, y + gy, color);
    }
    x += 6;
  }
}

struct Series {
  std::vector<double> x, y;
  Rgb color{31, 119, 180};
};

inline std::string tick_text(double v) {
  char buf[32];
  if (v != 0 && (std::abs(v) < 1e-3 || std::abs(v) >= 1e4))
    std::snprintf(buf, sizeof(buf), "%.1e", v);
  else
    std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

/// Multi-series line chart with axes and numeric ticks. NaN samples break the
/// polyline rather than plotting.
inline void render_line_chart(const std::string& path, const std::vector<Series>& series,
                              int width = 900, int height = 540) {
  Canvas canvas(width, height);
  const int left = 64, right = 16, top = 16, bottom = 36;
  const int x0 = left, x1 = width - right, y0 = height - bottom, y1 = top;

  double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
  double min_y = min_x, max_y = -min_x;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (std::isnan(s.y[i])) continue;
      min_x = std::min(min_x, s.x[i]);
      max_x = std::max(max_x, s.x[i]);
      min_y = std::min(min_y, s.y[i]);
      max_y = std::max(max_y, s.y[i]);
    }
  if (!std::isfinite(min_x)) {
    min_x = 0;
    max_x = 1;
    min_y = 0;
    max_y = 1;
  }
  if (max_x <= min_x) max_x = min_x + 1;
  if (max_y <= min_y) {
    max_y = min_y + 1;
    min_y -= 1e-12;
  }
  const double pad = 0.05 * (max_y - min_y);
  min_y -= pad;
  max_y += pad;

  const Rgb axis{40, 40, 40}, grid{225, 225, 225};
  auto to_px = [&](double vx, double vy) {
    const int px = x0 + static_cast<int>((vx - min_x) / (max_x - min_x) * (x1 - x0));
    const int py = y0 - static_cast<int>((vy - min_y) / (max_y - min_y) * (y0 - y1));
    return std::pair<int, int>{px, py};
  };

  for (int t = 0; t <= 5; ++t) {
    const double vy = min_y + t * (max_y - min_y) / 5;
    const int py = to_px(min_x, vy).second;
    canvas.hline(x0, x1, py, grid);
    draw_label(canvas, 4, py - 3, tick_text(vy), axis);
    const double vx = min_x + t * (max_x - min_x) / 5;
    const int px = to_px(vx, min_y).first;
    canvas.vline(px, y1, y0, grid);
    draw_label(canvas, px - 8, y0 + 8, tick_text(vx), axis);
  }
  canvas.hline(x0, x1, y0, axis);
  canvas.vline(x0, y1, y0, axis);

  for (const auto& s : series) {
    bool pen_down = false;
    std::pair<int, int> prev{0, 0};
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (std::isnan(s.y[i])) {
        pen_down = false;
        continue;
      }
      const auto cur = to_px(s.x[i], s.y[i]);
      if (pen_down) canvas.line(prev.first, prev.second, cur.first, cur.second, s.color);
      prev = cur;
      pen_down = true;
    }
  }
  canvas.save_png(path);
}

}  // namespace wetseg
