#pragma once

#include <filesystem>
#include <string>

#include "limsim/road/road_network.hpp"

namespace limsim {

// Parses the supported OpenDRIVE subset: `line` and `arc` plan-view geometry,
// one lane section per road with constant lane widths, driving lanes only.
// Road links and junction connections are resolved into lane successors.
//
// Throws MalformedDocument, UnsupportedGeometry (naming the element) or
// DanglingLink (naming the reference). Ignored features (elevation,
// superelevation, signals, objects, non-constant widths) are reported through
// RoadNetwork::warnings().
RoadNetwork parse_opendrive(const std::string& xml_text);

// Reads and parses a file; the network is named after the header or the file stem.
RoadNetwork load_opendrive(const std::filesystem::path& path);

}  // namespace limsim
