#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "limsim/road/opendrive.hpp"
#include "limsim/road/road_network.hpp"

namespace limsim::test {

inline std::filesystem::path source_dir() { return LIMSIM_SOURCE_DIR; }
inline std::filesystem::path map_path(const std::string& name) { return source_dir() / "maps" / (name + ".xodr"); }
inline std::filesystem::path scenario_path(const std::string& name) {
  return source_dir() / "scenarios" / (name + ".toml");
}
inline const std::vector<std::string>& fixture_names() {
  static const std::vector<std::string> names{"highway", "ramp", "intersection", "roundabout", "long_route"};
  return names;
}

inline std::shared_ptr<const RoadNetwork> load_map(const std::string& name) {
  return std::make_shared<const RoadNetwork>(load_opendrive(map_path(name)));
}

// Parallel straight lanes along +x; lane i (0 = rightmost) is "r<road>_<i>"
// centered at y = i * width. Roads follow one another end to end.
inline std::shared_ptr<const RoadNetwork> straight_network(int lanes, std::vector<double> road_lengths,
                                                           double speed_limit = 13.89, double width = 3.5) {
  std::vector<Lane> out;
  double x0 = 0.0;
  for (std::size_t r = 0; r < road_lengths.size(); ++r) {
    for (int i = 0; i < lanes; ++i) {
      Lane l;
      l.id = "r" + std::to_string(r) + "_" + std::to_string(i);
      l.road_id = "r" + std::to_string(r);
      l.section_lane = -(i + 1);
      l.width = width;
      l.speed_limit = speed_limit;
      l.reference_line = ReferenceLine({Segment{{x0, i * width, 0.0}, road_lengths[r], 0.0}});
      if (i > 0) l.right_neighbor = "r" + std::to_string(r) + "_" + std::to_string(i - 1);
      if (i + 1 < lanes) l.left_neighbor = "r" + std::to_string(r) + "_" + std::to_string(i + 1);
      if (r + 1 < road_lengths.size()) l.successors = {"r" + std::to_string(r + 1) + "_" + std::to_string(i)};
      out.push_back(std::move(l));
    }
    x0 += road_lengths[r];
  }
  return std::make_shared<const RoadNetwork>(RoadNetwork::from_lanes(std::move(out), {}, "straight"));
}

inline std::string lane_id(int road, int lane) { return "r" + std::to_string(road) + "_" + std::to_string(lane); }

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Runs a helper script under python3; returns its exit status.
inline int run_python(const std::filesystem::path& script, const std::string& args) {
  const std::string cmd = "python3 \"" + script.string() + "\" " + args;
  return std::system(cmd.c_str());
}

inline std::filesystem::path oracle(const std::string& name) { return source_dir() / "tests" / "oracles" / name; }

inline std::filesystem::path temp_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() / ("limsim_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace limsim::test
