#include "limsim/cli/render.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>

#include "limsim/common/error.hpp"
#include "limsim/eval/log_io.hpp"
#include "limsim/road/opendrive.hpp"

namespace limsim {

namespace fs = std::filesystem;

Canvas::Canvas(int width, int height, Rgb fill) : w_(width), h_(height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("canvas size must be positive");
  px_.resize(static_cast<std::size_t>(w_) * static_cast<std::size_t>(h_) * 3);
  for (std::size_t i = 0; i < px_.size(); i += 3) {
    px_[i] = fill.r;
    px_[i + 1] = fill.g;
    px_[i + 2] = fill.b;
  }
}

Rgb Canvas::at(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(w_) + static_cast<std::size_t>(x)) * 3;
  return {px_[i], px_[i + 1], px_[i + 2]};
}

void Canvas::set(int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
  const std::size_t i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(w_) + static_cast<std::size_t>(x)) * 3;
  px_[i] = c.r;
  px_[i + 1] = c.g;
  px_[i + 2] = c.b;
}

void Canvas::line(double x0, double y0, double x1, double y1, Rgb c) {
  // skip segments entirely off the canvas
  if ((x0 < 0 && x1 < 0) || (y0 < 0 && y1 < 0) || (x0 >= w_ && x1 >= w_) || (y0 >= h_ && y1 >= h_)) return;
  const double dx = x1 - x0, dy = y1 - y0;
  const int n = std::max(1, static_cast<int>(std::ceil(std::max(std::abs(dx), std::abs(dy)))));
  if (n > 100000) return;
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    set(static_cast<int>(std::floor(x0 + t * dx)), static_cast<int>(std::floor(y0 + t * dy)), c);
  }
}

void Canvas::fill_polygon(const std::vector<Vec2>& pts, Rgb c) {
  if (pts.size() < 3) return;
  double ymin = pts[0].y, ymax = pts[0].y;
  for (const Vec2& p : pts) {
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const int r0 = std::max(0, static_cast<int>(std::floor(ymin - 0.5)));
  const int r1 = std::min(h_ - 1, static_cast<int>(std::ceil(ymax + 0.5)));
  std::vector<double> xs;
  for (int row = r0; row <= r1; ++row) {
    const double yc = row + 0.5;
    xs.clear();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Vec2& a = pts[i];
      const Vec2& b = pts[(i + 1) % pts.size()];
      if ((a.y <= yc && b.y > yc) || (b.y <= yc && a.y > yc)) xs.push_back(a.x + (yc - a.y) / (b.y - a.y) * (b.x - a.x));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int c0 = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
      const int c1 = std::min(w_ - 1, static_cast<int>(std::floor(xs[k + 1] - 0.5)));
      for (int col = c0; col <= c1; ++col) set(col, row, c);
    }
  }
}

void Canvas::circle(double cx, double cy, double radius, Rgb c) {
  const int n = std::max(16, static_cast<int>(2 * kPi * radius));
  for (int i = 0; i < n; ++i) {
    const double a0 = 2 * kPi * i / n, a1 = 2 * kPi * (i + 1) / n;
    line(cx + radius * std::cos(a0), cy + radius * std::sin(a0), cx + radius * std::cos(a1), cy + radius * std::sin(a1), c);
  }
}

void Canvas::save_png(const fs::path& path) const {
  std::unique_ptr<FILE, int (*)(FILE*)> f(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng write failed for " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w_), static_cast<png_uint_32>(h_), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h_; ++y) {
    png_write_row(png, const_cast<png_bytep>(&px_[static_cast<std::size_t>(y) * static_cast<std::size_t>(w_) * 3]));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Canvas Canvas::load_png(const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) throw std::runtime_error("cannot read " + path.string());
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw std::runtime_error("cannot decode " + path.string());
  }
  Canvas c(static_cast<int>(img.width), static_cast<int>(img.height));
  c.px_ = std::move(buf);
  return c;
}

namespace {

Rgb mode_color(const std::string& mode) {
  if (mode == "Fine") return {60, 120, 230};
  if (mode == "Replay") return {240, 150, 40};
  if (mode == "External") return {60, 200, 90};
  return {170, 170, 170};
}

struct LaneDrawing {
  std::vector<Vec2> center, left, right;
};

std::vector<LaneDrawing> lane_drawings(const RoadNetwork& net) {
  std::vector<LaneDrawing> out;
  for (const auto& [id, lane] : net.lanes()) {
    LaneDrawing d;
    const ReferenceLine& ref = lane.reference_line;
    const std::size_t n = ref.samples().size();
    for (std::size_t i = 0; i < n; ++i) {
      const ReferencePoint p = ref.evaluate(ref.sample_s(i));
      const Vec2 nrm = unit(p.heading + kPi / 2);
      d.center.push_back(p.pos);
      d.left.push_back(p.pos + nrm * (0.5 * lane.width));
      d.right.push_back(p.pos - nrm * (0.5 * lane.width));
    }
    out.push_back(std::move(d));
  }
  return out;
}

void plot(const std::vector<double>& t, const std::vector<double>& v, const fs::path& path, Rgb color) {
  const int W = 800, H = 300, pad = 30;
  Canvas c(W, H, {255, 255, 255});
  c.line(pad, H - pad, W - pad, H - pad, {0, 0, 0});
  c.line(pad, pad, pad, H - pad, {0, 0, 0});
  if (t.size() >= 2) {
    double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
    if (hi - lo < 1e-9) {
      lo -= 1.0;
      hi += 1.0;
    }
    if (lo < 0.0 && hi > 0.0) {
      const double y0 = H - pad - (0.0 - lo) / (hi - lo) * (H - 2 * pad);
      c.line(pad, y0, W - pad, y0, {200, 200, 200});
    }
    const double t0 = t.front(), t1 = std::max(t.back(), t0 + 1e-9);
    auto X = [&](double x) { return pad + (x - t0) / (t1 - t0) * (W - 2 * pad); };
    auto Y = [&](double y) { return H - pad - (y - lo) / (hi - lo) * (H - 2 * pad); };
    for (std::size_t i = 1; i < t.size(); ++i) c.line(X(t[i - 1]), Y(v[i - 1]), X(t[i]), Y(v[i]), color);
  }
  c.save_png(path);
}

}  // namespace

RenderSummary render(const fs::path& log_dir, const fs::path& out_dir, const RenderOptions& opts) {
  std::ifstream ev(log_dir / "events.jsonl");
  if (!ev) throw BadLog("missing " + (log_dir / "events.jsonl").string());
  const auto events = read_events(ev);
  std::ifstream tr(log_dir / "trajectory.csv");
  if (!tr) throw BadLog("missing " + (log_dir / "trajectory.csv").string());
  const auto rows = read_trajectory(tr);

  std::optional<int> ego;
  std::optional<fs::path> map = opts.map_path;
  double aoi = 50.0, veh_len = 4.5, veh_wid = 1.8;
  for (const Event& e : events) {
    if (e.kind != "episode_start") continue;
    if (e.payload.contains("ego")) ego = e.payload["ego"].get<int>();
    if (!map && e.payload.contains("map")) map = e.payload["map"].get<std::string>();
    aoi = e.payload.value("aoi_radius", aoi);
    veh_len = e.payload.value("vehicle_length", veh_len);
    veh_wid = e.payload.value("vehicle_width", veh_wid);
  }
  RenderSummary summary;
  fs::create_directories(out_dir / "plots");

  // ego time series
  std::vector<double> t, speed, accel, jerk, ttc;
  for (const auto& r : rows) {
    if (!ego || r.vehicle_id != *ego) continue;
    t.push_back(r.t);
    speed.push_back(r.speed);
    accel.push_back(r.accel);
    jerk.push_back(r.jerk);
    ttc.push_back(std::min(r.ttc, 10.0));
  }
  const std::pair<const char*, const std::vector<double>*> series[] = {
      {"ego_speed.png", &speed}, {"ego_accel.png", &accel}, {"ego_jerk.png", &jerk}, {"ego_ttc.png", &ttc}};
  for (const auto& [name, vals] : series) {
    plot(t, *vals, out_dir / "plots" / name, {30, 60, 200});
    summary.plots.push_back(out_dir / "plots" / name);
  }
  if (opts.plots_only) return summary;

  if (!map) throw BadLog("log does not name its map; pass a map path");
  const RoadNetwork net = load_opendrive(*map);
  const auto lanes = lane_drawings(net);
  std::map<std::int64_t, std::vector<const TrajectoryRow*>> by_tick;
  for (const auto& r : rows) by_tick[r.tick].push_back(&r);

  fs::create_directories(out_dir / "frames");
  std::ofstream index(out_dir / "frames" / "index.csv", std::ios::binary);
  index << "tick,file,origin_x,origin_y,scale\n";
  const int size = std::max(1, static_cast<int>(std::lround(opts.window * opts.scale)));
  const Bounds& b = net.bounds();
  for (const auto& [tick, tick_rows] : by_tick) {
    Vec2 center{0.5 * (b.min_x + b.max_x), 0.5 * (b.min_y + b.max_y)};
    for (const TrajectoryRow* r : tick_rows) {
      if (ego && r->vehicle_id == *ego) center = {r->x, r->y};
    }
    const double ox = center.x - 0.5 * opts.window, oy = center.y + 0.5 * opts.window;
    auto P = [&](Vec2 p) { return Vec2{(p.x - ox) * opts.scale, (oy - p.y) * opts.scale}; };
    Canvas c(size, size, {40, 40, 40});
    for (const LaneDrawing& d : lanes) {
      for (const auto* poly : {&d.left, &d.right}) {
        for (std::size_t i = 1; i < poly->size(); ++i) {
          const Vec2 a = P((*poly)[i - 1]), q = P((*poly)[i]);
          c.line(a.x, a.y, q.x, q.y, {200, 200, 200});
        }
      }
      for (std::size_t i = 1; i < d.center.size(); i += 2) {
        const Vec2 a = P(d.center[i - 1]), q = P(d.center[i]);
        c.line(a.x, a.y, q.x, q.y, {90, 90, 90});
      }
    }
    const TrajectoryRow* ego_row = nullptr;
    for (const TrajectoryRow* r : tick_rows) {
      if (ego && r->vehicle_id == *ego) {
        ego_row = r;
        continue;
      }
      const Vec2 f = unit(r->heading) * (0.5 * veh_len), s = unit(r->heading + kPi / 2) * (0.5 * veh_wid);
      const Vec2 p{r->x, r->y};
      c.fill_polygon({P(p + f + s), P(p + f - s), P(p - f - s), P(p - f + s)}, mode_color(r->mode));
    }
    if (ego_row) {
      const Vec2 f = unit(ego_row->heading) * (0.5 * veh_len), s = unit(ego_row->heading + kPi / 2) * (0.5 * veh_wid);
      const Vec2 p{ego_row->x, ego_row->y};
      c.fill_polygon({P(p + f + s), P(p + f - s), P(p - f - s), P(p - f + s)}, kEgoColor);
      const Vec2 q = P(p);
      c.circle(q.x, q.y, aoi * opts.scale, {230, 210, 60});
    }
    char name[64];
    std::snprintf(name, sizeof name, "frame_%06lld.png", static_cast<long long>(tick));
    c.save_png(out_dir / "frames" / name);
    index << tick << ',' << name << ',' << format_number(ox) << ',' << format_number(oy) << ','
          << format_number(opts.scale) << '\n';
    ++summary.frames;
  }
  return summary;
}

}  // namespace limsim
