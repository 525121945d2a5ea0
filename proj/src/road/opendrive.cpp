#include "limsim/road/opendrive.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "limsim/common/error.hpp"

namespace limsim {

namespace {

namespace pt = boost::property_tree;

struct RoadLink {
  std::string element_type;
  std::string element_id;
};

struct RawLane {
  int id = 0;
  std::string type;
  double width = 0.0;
  std::optional<double> speed;
  std::optional<int> predecessor;
  std::optional<int> successor;
};

struct RawRoad {
  std::string id;
  std::string junction = "-1";
  std::optional<RoadLink> predecessor;
  std::optional<RoadLink> successor;
  std::vector<Segment> geometry;
  std::map<int, RawLane> lanes;  // includes non-driving lanes (their widths still count)
  std::optional<double> speed;
};

struct RawJunction {
  std::string id;
  std::vector<JunctionConnection> connections;
};

const pt::ptree* attrs(const pt::ptree& node) {
  auto a = node.get_child_optional("<xmlattr>");
  return a ? &*a : nullptr;
}

std::optional<std::string> opt_attr(const pt::ptree& node, const std::string& name) {
  const pt::ptree* a = attrs(node);
  if (!a) return std::nullopt;
  auto v = a->get_optional<std::string>(name);
  if (!v) return std::nullopt;
  return *v;
}

std::string attr(const pt::ptree& node, const std::string& name, const std::string& where) {
  auto v = opt_attr(node, name);
  if (!v) throw MalformedDocument(where + ": missing attribute '" + name + "'");
  return *v;
}

double to_number(const std::string& text, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() && text.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw MalformedDocument(where + ": '" + text + "' is not a number");
  }
}

double num_attr(const pt::ptree& node, const std::string& name, const std::string& where) {
  return to_number(attr(node, name, where), where);
}

double opt_num_attr(const pt::ptree& node, const std::string& name, double fallback, const std::string& where) {
  auto v = opt_attr(node, name);
  return v ? to_number(*v, where) : fallback;
}

int int_attr(const pt::ptree& node, const std::string& name, const std::string& where) {
  const double v = num_attr(node, name, where);
  if (v != std::floor(v)) throw MalformedDocument(where + ": '" + name + "' must be an integer");
  return static_cast<int>(v);
}

double speed_in_mps(const pt::ptree& node, const std::string& where) {
  const double max = num_attr(node, "max", where);
  const std::string unit = opt_attr(node, "unit").value_or("m/s");
  if (unit == "m/s") return max;
  if (unit == "km/h") return max / 3.6;
  if (unit == "mph") return max * 0.44704;
  throw MalformedDocument(where + ": unknown speed unit '" + unit + "'");
}

std::optional<RoadLink> parse_road_link(const pt::ptree& link, const std::string& which, const std::string& where) {
  auto node = link.get_child_optional(which);
  if (!node) return std::nullopt;
  return RoadLink{attr(*node, "elementType", where + " " + which),
                  attr(*node, "elementId", where + " " + which)};
}

class Parser {
 public:
  RoadNetwork run(const std::string& xml_text) {
    pt::ptree doc;
    try {
      std::istringstream in(xml_text);
      pt::read_xml(in, doc, pt::xml_parser::trim_whitespace);
    } catch (const pt::xml_parser_error& e) {
      throw MalformedDocument(std::string("XML error: ") + e.what());
    }
    auto root = doc.get_child_optional("OpenDRIVE");
    if (!root) throw MalformedDocument("root element <OpenDRIVE> not found");

    for (const auto& [tag, node] : *root) {
      if (tag == "header") {
        name_ = opt_attr(node, "name").value_or("");
      } else if (tag == "road") {
        parse_road(node);
      } else if (tag == "junction") {
        parse_junction(node);
      } else if (tag == "<xmlattr>" || tag == "<xmlcomment>") {
        continue;
      } else {
        warnings_.push_back("ignored top-level element <" + tag + ">");
      }
    }
    if (roads_.empty()) throw MalformedDocument("document contains no <road>");
    return build();
  }

 private:
  void parse_road(const pt::ptree& node) {
    RawRoad road;
    road.id = attr(node, "id", "road");
    const std::string where = "road " + road.id;
    road.junction = opt_attr(node, "junction").value_or("-1");
    const double declared_length = num_attr(node, "length", where);

    if (auto link = node.get_child_optional("link")) {
      road.predecessor = parse_road_link(*link, "predecessor", where);
      road.successor = parse_road_link(*link, "successor", where);
    }
    for (const auto& [tag, child] : node) {
      if (tag == "type") {
        if (auto sp = child.get_child_optional("speed")) road.speed = speed_in_mps(*sp, where + " type speed");
      } else if (tag == "elevationProfile" || tag == "lateralProfile" || tag == "signals" || tag == "objects" ||
                 tag == "surface") {
        warnings_.push_back(where + ": ignored <" + tag + ">");
      }
    }

    auto plan = node.get_child_optional("planView");
    if (!plan) throw MalformedDocument(where + ": missing <planView>");
    std::vector<std::pair<double, Segment>> geometry;
    for (const auto& [tag, g] : *plan) {
      if (tag != "geometry") continue;
      const double s = num_attr(g, "s", where + " geometry");
      const std::string gwhere = where + " geometry at s=" + attr(g, "s", where);
      Segment seg;
      seg.start = {num_attr(g, "x", gwhere), num_attr(g, "y", gwhere), num_attr(g, "hdg", gwhere)};
      seg.length = num_attr(g, "length", gwhere);
      bool shaped = false;
      for (const auto& [kind, prim] : g) {
        if (kind == "<xmlattr>" || kind == "<xmlcomment>") continue;
        if (kind == "line") {
          seg.curvature = 0.0;
        } else if (kind == "arc") {
          seg.curvature = num_attr(prim, "curvature", gwhere + " arc");
        } else {
          throw UnsupportedGeometry(gwhere + ": unsupported geometry primitive <" + kind + ">");
        }
        shaped = true;
      }
      if (!shaped) throw MalformedDocument(gwhere + ": geometry without a primitive");
      geometry.emplace_back(s, seg);
    }
    if (geometry.empty()) throw MalformedDocument(where + ": planView has no geometry");
    std::stable_sort(geometry.begin(), geometry.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    double total = 0.0;
    for (auto& [s, seg] : geometry) {
      if (std::abs(s - total) > 1e-6) warnings_.push_back(where + ": geometry s=" + std::to_string(s) + " does not match accumulated length");
      total += seg.length;
      road.geometry.push_back(seg);
    }
    if (std::abs(total - declared_length) > 1e-6) {
      warnings_.push_back(where + ": declared length differs from geometry length");
    }

    auto lanes = node.get_child_optional("lanes");
    if (!lanes) throw MalformedDocument(where + ": missing <lanes>");
    int sections = 0;
    for (const auto& [tag, child] : *lanes) {
      if (tag == "laneOffset") {
        for (const char* c : {"a", "b", "c", "d"}) {
          if (opt_num_attr(child, c, 0.0, where) != 0.0) {
            throw UnsupportedGeometry(where + ": non-zero <laneOffset> is not supported");
          }
        }
      } else if (tag == "laneSection") {
        if (++sections > 1) throw UnsupportedGeometry(where + ": more than one <laneSection> is not supported");
        parse_section(child, road, where);
      }
    }
    if (sections == 0) throw MalformedDocument(where + ": missing <laneSection>");
    const std::string id = road.id;
    if (!roads_.emplace(id, std::move(road)).second) throw MalformedDocument("duplicate road id " + id);
  }

  void parse_section(const pt::ptree& section, RawRoad& road, const std::string& where) {
    for (const char* side : {"left", "center", "right"}) {
      auto group = section.get_child_optional(side);
      if (!group) continue;
      for (const auto& [tag, node] : *group) {
        if (tag != "lane") continue;
        RawLane lane;
        lane.id = int_attr(node, "id", where + " lane");
        const std::string lwhere = where + " lane " + std::to_string(lane.id);
        lane.type = opt_attr(node, "type").value_or("none");
        if (lane.id == 0) {
          road.lanes[0] = lane;
          continue;
        }
        int widths = 0;
        for (const auto& [wt, w] : node) {
          if (wt == "width") {
            const double a = num_attr(w, "a", lwhere + " width");
            if (widths == 0) lane.width = a;
            if (widths > 0 && a != lane.width) warnings_.push_back(lwhere + ": several width records, using the first");
            for (const char* c : {"b", "c", "d"}) {
              if (opt_num_attr(w, c, 0.0, lwhere) != 0.0) {
                warnings_.push_back(lwhere + ": non-constant width, using the constant term");
                break;
              }
            }
            ++widths;
          } else if (wt == "speed") {
            lane.speed = speed_in_mps(w, lwhere + " speed");
          } else if (wt == "link") {
            if (auto p = w.get_child_optional("predecessor")) lane.predecessor = int_attr(*p, "id", lwhere + " predecessor");
            if (auto s = w.get_child_optional("successor")) lane.successor = int_attr(*s, "id", lwhere + " successor");
          }
        }
        if (widths == 0) throw MalformedDocument(lwhere + ": missing <width>");
        if (!(lane.width > 0.0) && lane.type == "driving") throw MalformedDocument(lwhere + ": width must be positive");
        road.lanes[lane.id] = lane;
      }
    }
  }

  void parse_junction(const pt::ptree& node) {
    RawJunction j;
    j.id = attr(node, "id", "junction");
    for (const auto& [tag, c] : node) {
      if (tag != "connection") continue;
      const std::string where = "junction " + j.id + " connection";
      JunctionConnection conn;
      conn.junction_id = j.id;
      conn.connection_id = opt_attr(c, "id").value_or("");
      conn.incoming_road = attr(c, "incomingRoad", where);
      conn.connecting_road = attr(c, "connectingRoad", where);
      for (const auto& [lt, ll] : c) {
        if (lt == "laneLink") conn.lane_links.emplace_back(int_attr(ll, "from", where), int_attr(ll, "to", where));
      }
      j.connections.push_back(std::move(conn));
    }
    const std::string id = j.id;
    if (!junctions_.emplace(id, std::move(j)).second) throw MalformedDocument("duplicate junction id " + id);
  }

  static std::string lane_key(const std::string& road, int lane) { return road + "_" + std::to_string(lane); }

  bool is_driving(const std::string& road, int lane) const {
    auto r = roads_.find(road);
    if (r == roads_.end()) return false;
    auto l = r->second.lanes.find(lane);
    return l != r->second.lanes.end() && l->second.type == "driving";
  }

  void require_lane(const std::string& from, const std::string& road, int lane) const {
    auto r = roads_.find(road);
    if (r == roads_.end()) throw DanglingLink(from + " references missing road " + road);
    if (!r->second.lanes.count(lane)) throw DanglingLink(from + " references missing lane " + lane_key(road, lane));
  }

  void check_link(const RawRoad& road, const std::optional<RoadLink>& link) const {
    if (!link) return;
    if (link->element_type == "road") {
      if (!roads_.count(link->element_id)) throw DanglingLink("road " + road.id + " links to missing road " + link->element_id);
    } else if (link->element_type == "junction") {
      if (!junctions_.count(link->element_id)) throw DanglingLink("road " + road.id + " links to missing junction " + link->element_id);
    } else {
      throw MalformedDocument("road " + road.id + ": unknown link elementType '" + link->element_type + "'");
    }
  }

  std::vector<LaneId> successors_of(const RawRoad& road, const RawLane& lane) const {
    const bool forward = lane.id < 0;
    const auto& link = forward ? road.successor : road.predecessor;
    const auto& lane_link = forward ? lane.successor : lane.predecessor;
    const std::string from = "lane " + lane_key(road.id, lane.id);
    std::vector<LaneId> out;
    if (!link) return out;
    if (link->element_type == "road") {
      if (!lane_link) return out;
      require_lane(from, link->element_id, *lane_link);
      if (is_driving(link->element_id, *lane_link)) out.push_back(lane_key(link->element_id, *lane_link));
    } else {
      const RawJunction& j = junctions_.at(link->element_id);
      for (const JunctionConnection& c : j.connections) {
        if (c.incoming_road != road.id) continue;
        for (const auto& [f, t] : c.lane_links) {
          if (f != lane.id) continue;
          require_lane("junction " + j.id + " connection " + c.connection_id, c.connecting_road, t);
          if (is_driving(c.connecting_road, t)) out.push_back(lane_key(c.connecting_road, t));
        }
      }
    }
    return out;
  }

  RoadNetwork build() {
    for (const auto& [jid, j] : junctions_) {
      for (const JunctionConnection& c : j.connections) {
        if (!roads_.count(c.incoming_road)) throw DanglingLink("junction " + jid + " references missing road " + c.incoming_road);
        if (!roads_.count(c.connecting_road)) throw DanglingLink("junction " + jid + " references missing road " + c.connecting_road);
        for (const auto& [f, t] : c.lane_links) {
          require_lane("junction " + jid, c.incoming_road, f);
          require_lane("junction " + jid, c.connecting_road, t);
        }
      }
    }

    std::vector<Lane> lanes;
    std::vector<JunctionConnection> connections;
    for (const auto& [jid, j] : junctions_) {
      connections.insert(connections.end(), j.connections.begin(), j.connections.end());
    }
    for (const auto& [rid, road] : roads_) {
      check_link(road, road.predecessor);
      check_link(road, road.successor);
      if (road.junction != "-1" && !junctions_.count(road.junction)) {
        throw DanglingLink("road " + rid + " belongs to missing junction " + road.junction);
      }
      ReferenceLine center;
      try {
        center = ReferenceLine(road.geometry);
      } catch (const std::invalid_argument& e) {
        throw MalformedDocument("road " + rid + ": " + e.what());
      }
      const bool in_junction = road.junction != "-1";
      for (const auto& [lid, raw] : road.lanes) {
        if (lid == 0 || raw.type != "driving") continue;
        // distance from the road reference line to the lane center
        const int dir = lid > 0 ? 1 : -1;
        double inner = 0.0;
        for (int k = dir; k != lid; k += dir) {
          auto it = road.lanes.find(k);
          if (it == road.lanes.end()) throw MalformedDocument("road " + rid + ": lane ids are not contiguous");
          inner += it->second.width;
        }
        const double d = dir * (inner + 0.5 * raw.width);
        Lane lane;
        lane.id = lane_key(rid, lid);
        lane.road_id = rid;
        lane.section_lane = lid;
        lane.in_junction = in_junction;
        lane.width = raw.width;
        lane.speed_limit = raw.speed.value_or(road.speed.value_or(kDefaultSpeedLimit));
        try {
          lane.reference_line = dir < 0 ? center.offset(d) : center.offset(d).reversed();
        } catch (const std::invalid_argument& e) {
          throw MalformedDocument("lane " + lane.id + ": " + e.what());
        }
        lane.successors = successors_of(road, raw);
        if (raw.predecessor && road.predecessor && road.predecessor->element_type == "road") {
          require_lane("lane " + lane.id, road.predecessor->element_id, *raw.predecessor);
        }
        if (!in_junction) {
          // left/right in the lane's own driving direction
          const int toward_center = lid - dir;
          const int away = lid + dir;
          if (toward_center != 0 && is_driving(rid, toward_center)) lane.left_neighbor = lane_key(rid, toward_center);
          if (is_driving(rid, away)) lane.right_neighbor = lane_key(rid, away);
        }
        lanes.push_back(std::move(lane));
      }
    }
    if (lanes.empty()) throw MalformedDocument("document contains no driving lanes");
    RoadNetwork net = RoadNetwork::from_lanes(std::move(lanes), std::move(connections), name_);
    for (auto& w : warnings_) net.add_warning(std::move(w));
    return net;
  }

  static constexpr double kDefaultSpeedLimit = 13.89;

  std::string name_;
  std::map<std::string, RawRoad> roads_;
  std::map<std::string, RawJunction> junctions_;
  std::vector<std::string> warnings_;
};

}  // namespace

RoadNetwork parse_opendrive(const std::string& xml_text) { return Parser().run(xml_text); }

RoadNetwork load_opendrive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedDocument("cannot open map file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  RoadNetwork net = parse_opendrive(buf.str());
  if (net.name().empty()) {
    std::vector<Lane> lanes;
    for (const auto& [id, lane] : net.lanes()) lanes.push_back(lane);
    RoadNetwork named = RoadNetwork::from_lanes(std::move(lanes), net.junctions(), path.stem().string());
    for (const auto& w : net.warnings()) named.add_warning(w);
    return named;
  }
  return net;
}

}  // namespace limsim
