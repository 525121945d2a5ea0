#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

namespace limsim {

// Kinds: episode_start, spawn, despawn, spawn_blocked, collision, lane_change,
// fallback, override, restore, episode_end.
struct Event {
  std::int64_t tick = 0;
  double time = 0.0;
  std::string kind;
  nlohmann::json payload = nlohmann::json::object();
};

nlohmann::json to_json(const Event& e);
Event event_from_json(const nlohmann::json& j);

}  // namespace limsim
