#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "limsim/common/math.hpp"

namespace limsim {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

// RGB raster; (0, 0) is the top-left pixel.
class Canvas {
 public:
  Canvas(int width, int height, Rgb fill = {});
  int width() const { return w_; }
  int height() const { return h_; }
  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb c);
  void line(double x0, double y0, double x1, double y1, Rgb c);
  // Pixels whose centers fall inside the polygon.
  void fill_polygon(const std::vector<Vec2>& pts, Rgb c);
  void circle(double cx, double cy, double radius, Rgb c);
  void save_png(const std::filesystem::path& path) const;
  static Canvas load_png(const std::filesystem::path& path);

 private:
  int w_, h_;
  std::vector<std::uint8_t> px_;
};

struct RenderOptions {
  double scale = 4.0;    // px per m
  double window = 160.0; // m, square view centered on the ego
  bool plots_only = false;
  std::optional<std::filesystem::path> map_path;  // default: from the log
};

inline constexpr Rgb kEgoColor{220, 30, 30};

struct RenderSummary {
  std::size_t frames = 0;
  std::vector<std::filesystem::path> plots;
};

// Frames go to <out>/frames/frame_<tick>.png with frames/index.csv holding
// each frame's world origin (top-left corner) and scale; plots to <out>/plots.
// Throws BadLog.
RenderSummary render(const std::filesystem::path& log_dir, const std::filesystem::path& out_dir,
                     const RenderOptions& opts = {});

}  // namespace limsim
