#include "limsim/planning/driving_model.hpp"

#include <algorithm>
#include <cmath>

namespace limsim {

namespace {

struct Lead {
  double gap = kNoLeader;
  double speed = 0.0;
};

Lead find_leader(const DrivingState& st, std::size_t i) {
  const AbstractVehicle& me = st.vehicles[i];
  Lead lead;
  for (std::size_t j = 0; j < st.vehicles.size(); ++j) {
    if (j == i) continue;
    const AbstractVehicle& o = st.vehicles[j];
    if (o.lane != me.lane) continue;
    if (o.s < me.s || (o.s == me.s && j < i)) continue;
    const double gap = o.s - me.s - 0.5 * (o.length + me.length);
    if (gap < lead.gap) lead = {gap, o.v};
  }
  return lead;
}

double idm_or_brake(double v, const Lead& lead, const IdmParams& p) {
  if (lead.gap == kNoLeader) return idm_acceleration(v, kNoLeader, 0.0, p);
  if (lead.gap <= 0.0) return -p.emergency_decel;
  return idm_acceleration(v, lead.gap, v - lead.speed, p);
}

}  // namespace

std::vector<MetaActionKind> DrivingModel::legal_actions(const DrivingState& s) const {
  if (s.ego_collided || s.vehicles.empty()) return {};
  std::vector<MetaActionKind> out{MetaActionKind::keep_lane_cruise, MetaActionKind::keep_lane_accelerate,
                                  MetaActionKind::keep_lane_decelerate};
  const int lane = s.vehicles[s.ego].lane;
  const auto n = static_cast<int>(s.lanes.size());
  if (lane >= 0 && lane < n) {
    if (s.lanes[lane].left_ok && lane + 1 < n) out.push_back(MetaActionKind::change_left);
    if (s.lanes[lane].right_ok && lane > 0) out.push_back(MetaActionKind::change_right);
  }
  return out;
}

DrivingTransition DrivingModel::step(const DrivingState& s, MetaActionKind a, Rng&) const {
  DrivingTransition tr;
  tr.next = s;
  DrivingState& st = tr.next;
  const std::size_t n = st.vehicles.size();
  const std::size_t ego = st.ego;
  bool changed = false;
  if (a == MetaActionKind::change_left) {
    st.vehicles[ego].lane += 1;
    changed = true;
  } else if (a == MetaActionKind::change_right) {
    st.vehicles[ego].lane -= 1;
    changed = true;
  }

  const int substeps = std::max(1, static_cast<int>(std::lround(cfg_.epoch / cfg_.substep)));
  const double h = cfg_.epoch / substeps;
  std::vector<double> safety(n, 1.0), efficiency(n, 0.0), abs_accel(n, 0.0);
  std::vector<char> collided(n, 0);
  std::vector<double> acc(n, 0.0);

  for (int k = 0; k < substeps; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      const AbstractVehicle& v = st.vehicles[i];
      const Lead lead = find_leader(st, i);
      double cmd = idm_or_brake(v.v, lead, v.idm);
      if (i == ego) {
        const auto& lane = st.lanes[static_cast<std::size_t>(v.lane)];
        if (lane.stop_s && *lane.stop_s > v.s) {
          const double gap = *lane.stop_s - v.s - 0.5 * v.length;
          cmd = std::min(cmd, idm_or_brake(v.v, {gap, 0.0}, v.idm));
        }
        if (a == MetaActionKind::keep_lane_accelerate) cmd = std::min(v.idm.max_accel, cmd + cfg_.accel_boost);
        if (a == MetaActionKind::keep_lane_decelerate) cmd = std::min(cmd, cfg_.hard_decel);
      }
      acc[i] = cmd;
    }
    for (std::size_t i = 0; i < n; ++i) {
      AbstractVehicle& v = st.vehicles[i];
      const double v_new = std::max(0.0, v.v + acc[i] * h);
      abs_accel[i] += std::abs((v_new - v.v) / h);
      v.v = v_new;
      v.s += v.v * h;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const AbstractVehicle& v = st.vehicles[i];
      const Lead lead = find_leader(st, i);
      if (lead.gap <= 0.0) {
        collided[i] = 1;
        for (std::size_t j = 0; j < n; ++j) {
          const AbstractVehicle& o = st.vehicles[j];
          if (j != i && o.lane == v.lane && std::abs(o.s - v.s) < 0.5 * (o.length + v.length)) collided[j] = 1;
        }
      } else if (lead.gap != kNoLeader && v.v > lead.speed) {
        safety[i] = std::min(safety[i], std::min(1.0, lead.gap / (v.v - lead.speed) / cfg_.ttc_ref));
      }
      efficiency[i] += std::min(1.0, v.v / std::max(v.idm.desired_speed, 1e-6));
    }
  }

  auto vehicle_reward = [&](std::size_t i) {
    const double safe = collided[i] ? 0.0 : safety[i];
    const double eff = efficiency[i] / substeps;
    double comfort = 1.0 - 0.5 * std::min(1.0, abs_accel[i] / substeps / cfg_.accel_ref);
    if (i == ego && changed) comfort -= cfg_.change_penalty;
    return 0.5 * safe + 0.3 * eff + 0.2 * std::max(0.0, comfort);
  };

  const double own = vehicle_reward(ego);
  double group_sum = 0.0;
  int members = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == ego) continue;
    if (std::find(svo_.group.begin(), svo_.group.end(), st.vehicles[i].id) != svo_.group.end()) {
      group_sum += vehicle_reward(i);
      ++members;
    }
  }
  const double group = members > 0 ? group_sum / members : own;
  tr.reward = std::clamp(svo_.self_weight * own + svo_.group_weight * group, 0.0, 1.0);
  st.ego_collided = st.ego_collided || collided[ego];

  tr.key.reserve(3 * n + 1);
  tr.key.push_back(st.ego_collided ? 1 : 0);
  for (const AbstractVehicle& v : st.vehicles) {
    tr.key.push_back(v.lane);
    tr.key.push_back(static_cast<std::int64_t>(std::floor(v.s / cfg_.s_bin)));
    tr.key.push_back(static_cast<std::int64_t>(std::floor(v.v / cfg_.v_bin)));
  }
  return tr;
}

std::vector<MetaActionKind> mcts_rank(const DrivingState& root, const MctsConfig& cfg, const SvoWeights& svo,
                                      std::uint64_t rng_seed, const DrivingModelConfig& model_cfg) {
  const DrivingModel model(svo, model_cfg);
  Mcts<DrivingModel> search(model, cfg);
  search.search(root, rng_seed);
  return search.ranked();
}

MetaActionKind mcts_decide(const DrivingState& root, const MctsConfig& cfg, const SvoWeights& svo,
                           std::uint64_t rng_seed, const DrivingModelConfig& model_cfg) {
  return mcts_rank(root, cfg, svo, rng_seed, model_cfg).front();
}

}  // namespace limsim
