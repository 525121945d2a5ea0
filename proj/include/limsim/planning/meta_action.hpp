#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace limsim {

// Declaration order is the tie-break order used by the decision layer.
enum class MetaActionKind { keep_lane_cruise, keep_lane_accelerate, keep_lane_decelerate, change_left, change_right };

inline constexpr std::array<MetaActionKind, 5> kAllMetaActions = {
    MetaActionKind::keep_lane_cruise, MetaActionKind::keep_lane_accelerate, MetaActionKind::keep_lane_decelerate,
    MetaActionKind::change_left, MetaActionKind::change_right};

struct MetaAction {
  MetaActionKind kind = MetaActionKind::keep_lane_cruise;
  double duration = 1.0;  // decision epoch, s
  bool operator==(const MetaAction&) const = default;
};

inline bool is_lane_change(MetaActionKind k) {
  return k == MetaActionKind::change_left || k == MetaActionKind::change_right;
}

inline std::string_view to_string(MetaActionKind k) {
  switch (k) {
    case MetaActionKind::keep_lane_cruise: return "keep_lane_cruise";
    case MetaActionKind::keep_lane_accelerate: return "keep_lane_accelerate";
    case MetaActionKind::keep_lane_decelerate: return "keep_lane_decelerate";
    case MetaActionKind::change_left: return "change_left";
    case MetaActionKind::change_right: return "change_right";
  }
  return "keep_lane_cruise";
}

inline std::optional<MetaActionKind> meta_action_from_string(std::string_view s) {
  for (MetaActionKind k : kAllMetaActions) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

}  // namespace limsim
