#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "limsim/behavior/idm.hpp"
#include "limsim/behavior/mobil.hpp"
#include "limsim/common/rng.hpp"
#include "limsim/frenet/frenet.hpp"
#include "limsim/planning/driving_model.hpp"
#include "limsim/planning/mcts.hpp"
#include "limsim/planning/quintic.hpp"
#include "support.hpp"

// Checks shared by the unit tests and the acceptance binary.
namespace limsim::test {

struct RoundTrip {
  double pos = 0.0, heading = 0.0, s = 0.0, l = 0.0;
  int poses = 0;
};

inline RoundTrip round_trip_map(const RoadNetwork& net, int count, std::uint64_t seed) {
  std::vector<const Lane*> lanes;
  for (const auto& [id, l] : net.lanes()) {
    if (l.length() > 4.0) lanes.push_back(&l);
  }
  Rng rng(seed);
  RoundTrip worst;
  while (worst.poses < count) {
    const Lane& lane = *lanes[rng.below(lanes.size())];
    const ReferenceLine& ref = lane.reference_line;
    FrenetPose f;
    f.s = rng.uniform(1.0, lane.length() - 1.0);
    f.l = rng.uniform(-3.0, 3.0);
    const double k = ref.evaluate(f.s).curvature;
    if (f.l * k > 0.5) continue;
    f.s_dot = rng.uniform(0.5, 25.0);
    f.l_prime = rng.uniform(-0.2, 0.2);
    f.s_ddot = rng.uniform(-3.0, 3.0);
    f.l_pprime = rng.uniform(-0.02, 0.02);
    const CartesianPose c = frenet_to_cartesian(ref, f);
    const FrenetPose f2 = cartesian_to_frenet(ref, c);
    const CartesianPose c2 = frenet_to_cartesian(ref, f2);
    worst.pos = std::max(worst.pos, std::hypot(c.x - c2.x, c.y - c2.y));
    worst.heading = std::max(worst.heading, std::abs(angle_diff(c.heading, c2.heading)));
    worst.s = std::max(worst.s, std::abs(f.s - f2.s));
    worst.l = std::max(worst.l, std::abs(f.l - f2.l));
    ++worst.poses;
  }
  return worst;
}

inline IdmParams random_idm(Rng& rng) {
  IdmParams p;
  p.desired_speed = rng.uniform(5, 35);
  p.time_headway = rng.uniform(0.5, 2.5);
  p.min_gap = rng.uniform(0.5, 4);
  p.max_accel = rng.uniform(0.5, 3);
  p.comfort_decel = rng.uniform(1, 4);
  p.accel_exponent = rng.uniform(1, 6);
  p.emergency_decel = 8.0;
  return p;
}

// Semi-implicit Euler platoon behind a scripted stop-and-go leader on a
// single 2 km lane. Returns the smallest bumper gap seen.
inline double platoon_min_gap(std::uint64_t seed, int vehicles, int steps, double dt) {
  IdmParams p;
  const double len = 4.5;
  Rng rng(seed);
  std::vector<double> x(vehicles), v(vehicles);
  x[0] = 400.0;
  v[0] = 0.0;
  for (int i = 1; i < vehicles; ++i) {
    x[i] = x[i - 1] - len - (p.min_gap + 2.0 + rng.uniform(0, 15));
    v[i] = rng.uniform(0, 12);
  }
  double min_gap = kNoLeader;
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    // Leader: 40 s cycle of accelerate, cruise, hard brake, wait; parks near the lane end.
    const double phase = std::fmod(t, 40.0);
    double a0 = phase < 10 ? 1.0 : phase < 20 ? 0.0 : phase < 24 ? -6.0 : -6.0;
    if (x[0] > 1950.0) a0 = -6.0;
    std::vector<double> acc(vehicles);
    acc[0] = a0;
    for (int i = 1; i < vehicles; ++i) {
      const double gap = x[i - 1] - x[i] - len;
      acc[i] = idm_acceleration(v[i], gap, v[i] - v[i - 1], p);
    }
    for (int i = 0; i < vehicles; ++i) {
      v[i] = std::max(0.0, v[i] + acc[i] * dt);
      x[i] += v[i] * dt;
    }
    for (int i = 1; i < vehicles; ++i) min_gap = std::min(min_gap, x[i - 1] - x[i] - len);
  }
  return min_gap;
}

// Textbook IDM written out again so MOBIL can be checked without reusing the
// library's own acceleration routine.
inline double oracle_idm(double v, double gap, double dv, const IdmParams& p) {
  if (gap <= 0) return -1e9;  // marks an overlap
  const double s_star = p.min_gap + std::max(0.0, v * p.time_headway + v * dv / (2 * std::sqrt(p.max_accel * p.comfort_decel)));
  const double inter = std::isinf(gap) ? 0.0 : (s_star / gap) * (s_star / gap);
  return std::clamp(p.max_accel * (1 - std::pow(v / p.desired_speed, p.accel_exponent) - inter), -p.emergency_decel,
                    p.max_accel);
}

struct OracleEval {
  bool ok = false;
  double incentive = 0.0;
};

inline OracleEval oracle_change(const MobilContext& c, const AdjacentLane& t, bool right, const IdmParams& p,
                         const MobilParams& m) {
  OracleEval e;
  if (!t.available) return e;
  auto gap_or_inf = [](const NeighborVehicle& n) { return n.present() ? n.gap : kNoLeader; };
  for (double g : {c.leader.gap, c.follower.gap, t.leader.gap, t.follower.gap}) {
    if (g <= 0) return e;
  }
  const double v = c.speed;
  const double a_old = oracle_idm(v, gap_or_inf(c.leader), v - c.leader.speed, p);
  const double a_new = oracle_idm(v, gap_or_inf(t.leader), v - t.leader.speed, p);
  double nf_before = 0, nf_after = 0, of_before = 0, of_after = 0;
  if (t.follower.present()) {
    const double vf = t.follower.speed;
    const double gap_before = t.leader.present() ? t.follower.gap + c.length + t.leader.gap : kNoLeader;
    nf_before = oracle_idm(vf, gap_before, vf - t.leader.speed, p);
    nf_after = oracle_idm(vf, t.follower.gap, vf - v, p);
  }
  if (c.follower.present()) {
    const double vo = c.follower.speed;
    of_before = oracle_idm(vo, c.follower.gap, vo - v, p);
    const double gap_after = c.leader.present() ? c.follower.gap + c.length + c.leader.gap : kNoLeader;
    of_after = oracle_idm(vo, gap_after, vo - c.leader.speed, p);
  }
  const bool safe = !t.follower.present() || nf_after >= -m.safe_decel;
  e.incentive = a_new - a_old + m.politeness * ((nf_after - nf_before) + (of_after - of_before)) + (right ? m.bias_right : 0.0);
  e.ok = safe && e.incentive > m.change_threshold;
  return e;
}

inline LaneChoice oracle_decide(const MobilContext& c, const IdmParams& p, const MobilParams& m) {
  // Enumerate the three options; keep the best admissible one, right on ties.
  const OracleEval l = oracle_change(c, c.left, false, p, m);
  const OracleEval r = oracle_change(c, c.right, true, p, m);
  LaneChoice best = LaneChoice::stay;
  double best_inc = -1e18;
  for (auto [choice, ev] : {std::pair{LaneChoice::change_right, r}, std::pair{LaneChoice::change_left, l}}) {
    if (ev.ok && ev.incentive > best_inc) {
      best = choice;
      best_inc = ev.incentive;
    }
  }
  return best;
}

inline NeighborVehicle random_neighbor(Rng& rng, double presence = 0.7) {
  if (rng.uniform() > presence) return {};
  return {rng.uniform(0.5, 60), rng.uniform(0, 30)};
}

// Coefficients of the quintic matching (x0, v0, a0) at 0 and (x1, v1, a1) at T,
// from a dense 6x6 solve.
inline Eigen::Matrix<double, 6, 1> solve_quintic(double x0, double v0, double a0, double x1, double v1, double a1, double T) {
  Eigen::Matrix<double, 6, 6> A;
  Eigen::Matrix<double, 6, 1> b;
  auto row = [&](int r, double t, int order) {
    for (int i = 0; i < 6; ++i) {
      double c = 0.0;
      if (i >= order) {
        c = 1.0;
        for (int k = 0; k < order; ++k) c *= (i - k);
        c *= std::pow(t, i - order);
      }
      A(r, i) = c;
    }
  };
  row(0, 0, 0), row(1, 0, 1), row(2, 0, 2), row(3, T, 0), row(4, T, 1), row(5, T, 2);
  b << x0, v0, a0, x1, v1, a1;
  return A.fullPivLu().solve(b);
}

inline std::uint64_t h(std::uint64_t a, std::uint64_t b) { return splitmix64(a * 0x9e3779b97f4a7c15ULL ^ splitmix64(b)); }
inline double u01(std::uint64_t x) { return static_cast<double>(splitmix64(x) >> 11) * 0x1.0p-53; }

// Random finite MDP defined lazily by hashing the history.
struct ToyMdp {
  struct State {
    std::uint64_t path = 0;
    int depth = 0;
  };
  using Action = int;
  struct Transition {
    State next;
    double reward = 0.0;
    int key = 0;
  };

  std::uint64_t salt = 0;
  int actions = 2;
  int depth = 2;
  int max_outcomes = 3;

  int outcomes(const State& s, int a) const { return 1 + static_cast<int>(h(h(salt, s.path), a + 100) % max_outcomes); }
  double prob_weight(const State& s, int a, int o) const { return 0.2 + u01(h(h(h(salt, s.path), a), o + 7)); }
  double reward(const State& s, int a, int o) const { return u01(h(h(h(salt ^ 0xabc, s.path), a), o)); }
  State child(const State& s, int a, int o) const { return {h(h(s.path, a + 1), o + 1), s.depth + 1}; }

  std::vector<int> legal_actions(const State& s) const {
    if (s.depth >= depth) return {};
    std::vector<int> out(actions);
    for (int i = 0; i < actions; ++i) out[i] = i;
    return out;
  }
  Transition step(const State& s, int a, Rng& rng) const {
    const int n = outcomes(s, a);
    double total = 0;
    for (int o = 0; o < n; ++o) total += prob_weight(s, a, o);
    double x = rng.uniform() * total;
    int o = 0;
    for (; o < n - 1; ++o) {
      x -= prob_weight(s, a, o);
      if (x < 0) break;
    }
    return {child(s, a, o), reward(s, a, o), o};
  }
  int rollout_action(const State&) const { return 0; }

  // Exact expectimax value of each root action.
  double value(const State& s, double discount) const {
    if (s.depth >= depth) return 0.0;
    double best = -1;
    for (int a = 0; a < actions; ++a) best = std::max(best, q(s, a, discount));
    return best;
  }
  double q(const State& s, int a, double discount) const {
    const int n = outcomes(s, a);
    double total = 0, acc = 0;
    for (int o = 0; o < n; ++o) total += prob_weight(s, a, o);
    for (int o = 0; o < n; ++o) {
      acc += prob_weight(s, a, o) / total * (reward(s, a, o) + discount * value(child(s, a, o), discount));
    }
    return acc;
  }
  int best_action(double discount) const {
    int best = 0;
    for (int a = 1; a < actions; ++a) {
      if (q({}, a, discount) > q({}, best, discount)) best = a;
    }
    return best;
  }
};

inline DrivingState stopped_leader_state() {
  DrivingState st;
  st.lanes.resize(2);
  st.lanes[0].left_ok = true;
  st.lanes[1].right_ok = true;
  AbstractVehicle ego;
  ego.id = 0;
  ego.lane = 0;
  ego.s = 0;
  ego.v = 12;
  AbstractVehicle lead;
  lead.id = 1;
  lead.lane = 0;
  lead.s = 25 + 4.5;  // 25 m bumper gap
  lead.v = 0;
  st.vehicles = {ego, lead};
  return st;
}

// Depth-limited exhaustive search over the deterministic driving model.
inline double drive_value(const DrivingModel& m, const DrivingState& s, int depth, double discount, Rng& rng) {
  if (depth == 0) return 0.0;
  const auto actions = m.legal_actions(s);
  if (actions.empty()) return 0.0;
  double best = -1;
  for (auto a : actions) {
    const auto tr = m.step(s, a, rng);
    best = std::max(best, tr.reward + discount * drive_value(m, tr.next, depth - 1, discount, rng));
  }
  return best;
}

struct IdmScriptCheck {
  bool script_ok = false;
  std::size_t cases = 0, answered = 0;
  double worst = 0.0;
  IdmParams first;  // the hand-worked tuple (v 10, gap 30, dv 2)
};

// Writes random tuples to a CSV, runs the independent formula script over them
// and compares with idm_acceleration.
inline IdmScriptCheck idm_against_script(std::uint64_t seed, std::size_t count) {
  const auto dir = temp_dir("idm" + std::to_string(seed));
  const auto in = dir / "in.csv", out = dir / "out.csv";
  Rng rng(seed);
  struct Case {
    IdmParams p;
    double v, gap, dv;
  };
  std::vector<Case> cases;
  {
    IdmParams fixed;
    fixed.desired_speed = 15;
    fixed.time_headway = 1.5;
    fixed.min_gap = 2;
    fixed.max_accel = 2;
    fixed.comfort_decel = 3;
    fixed.accel_exponent = 4;
    cases.push_back({fixed, 10, 30, 2});
  }
  while (cases.size() < count) {
    const IdmParams p = random_idm(rng);
    const double gap = rng.uniform() < 0.1 ? kNoLeader : rng.uniform(0.2, 120);
    cases.push_back({p, rng.uniform(0, 35), gap, rng.uniform(-10, 10)});
  }
  {
    std::ofstream f(in);
    f << "v0,T,s0,a_max,b,delta,b_emergency,v,gap,dv\n";
    char buf[512];
    for (const Case& c : cases) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    c.p.desired_speed, c.p.time_headway, c.p.min_gap, c.p.max_accel, c.p.comfort_decel,
                    c.p.accel_exponent, c.p.emergency_decel, c.v, c.gap, c.dv);
      f << buf;
    }
  }
  IdmScriptCheck r;
  r.cases = cases.size();
  r.first = cases[0].p;
  r.script_ok = run_python(oracle("idm_formula.py"), "\"" + in.string() + "\" \"" + out.string() + "\"") == 0;
  std::ifstream res(out);
  for (std::string line; std::getline(res, line) && r.answered < cases.size(); ++r.answered) {
    const Case& c = cases[r.answered];
    r.worst = std::max(r.worst, std::abs(std::stod(line) - idm_acceleration(c.v, c.gap, c.dv, c.p)));
  }
  std::filesystem::remove_all(dir);
  return r;
}

struct MobilCheck {
  int agree = 0, changes = 0, total = 0;
  std::vector<int> disagreements;
};

inline MobilCheck mobil_against_brute_force(std::uint64_t seed, int count) {
  Rng rng(seed);
  MobilCheck r;
  for (int i = 0; i < count; ++i) {
    MobilContext c;
    c.speed = rng.uniform(0, 30);
    c.length = rng.uniform(3.5, 6);
    c.leader = random_neighbor(rng);
    c.follower = random_neighbor(rng);
    c.left = {rng.uniform() < 0.7, random_neighbor(rng), random_neighbor(rng)};
    c.right = {rng.uniform() < 0.7, random_neighbor(rng), random_neighbor(rng)};
    const IdmParams p = random_idm(rng);
    MobilParams m;
    m.politeness = rng.uniform(0, 1);
    m.change_threshold = rng.uniform(0.05, 0.5);
    m.safe_decel = rng.uniform(2, 6);
    m.bias_right = rng.uniform(0, 0.4);
    const LaneChoice want = oracle_decide(c, p, m);
    if (mobil_decide(c, p, m) == want) {
      ++r.agree;
    } else {
      r.disagreements.push_back(i);
    }
    r.changes += want != LaneChoice::stay;
    ++r.total;
  }
  return r;
}

struct QuinticCheck {
  double boundary = 0.0, coefficients = 0.0;
};

inline QuinticCheck quintic_boundaries(std::uint64_t seed, int count) {
  Rng rng(seed);
  QuinticCheck r;
  for (int i = 0; i < count; ++i) {
    const double x0 = rng.uniform(-50, 50), v0 = rng.uniform(-10, 30), a0 = rng.uniform(-4, 4);
    const double x1 = rng.uniform(-50, 150), v1 = rng.uniform(-10, 30), a1 = rng.uniform(-4, 4);
    const double T = rng.uniform(0.5, 8);
    const QuinticPolynomial q(x0, v0, a0, x1, v1, a1, T);
    const double want[6] = {x0, v0, a0, x1, v1, a1};
    const double got[6] = {q.eval(0, 0), q.eval(0, 1), q.eval(0, 2), q.eval(T, 0), q.eval(T, 1), q.eval(T, 2)};
    for (int k = 0; k < 6; ++k) r.boundary = std::max(r.boundary, std::abs(want[k] - got[k]));
    const auto c = solve_quintic(x0, v0, a0, x1, v1, a1, T);
    for (int k = 0; k < 6; ++k) {
      r.coefficients = std::max(r.coefficients, std::abs(c(k) - q.coefficients()[k]) / std::max(1.0, std::abs(c(k))));
    }
  }
  return r;
}

// Replans every second from the state the previous plan reaches at 1 s, on a
// straight-then-arc line; returns the worst position/speed/accel jump.
inline double splice_discontinuity(std::uint64_t seed, int replans) {
  const ReferenceLine a({Segment{{0, 0, 0}, 80, 0}});
  const ReferenceLine b({Segment{a.segments()[0].end(), 150, 0.01}});
  const ReferenceLine* parts[] = {&a, &b};
  const ReferenceLine ref = ReferenceLine::concatenate(parts);
  Rng rng(seed);
  double worst = 0.0;
  FrenetPose start;
  start.s = 5;
  start.s_dot = 6;
  FrenetPlan plan = make_frenet_plan(start, FrenetPose{50, 0.8, 10, 0, 0, 0}, 5.0, 3.0);
  for (int k = 0; k < replans; ++k) {
    const Trajectory old_traj = sample_plan(ref, plan, 1.0, 0.1);
    const Kinematics1D lon = eval_extended(plan.lon, 1.0, true);
    const Kinematics1D lat = eval_extended(plan.lat, 1.0, false);
    const FrenetPose splice = from_temporal(lon.x, lon.v, lon.a, {lat.x, lat.v, lat.a});
    FrenetPose goal;
    goal.s = splice.s + rng.uniform(20, 60);
    goal.s_dot = rng.uniform(4, 14);
    goal.l = rng.uniform(-1.5, 1.5);
    plan = make_frenet_plan(splice, goal, 5.0, 3.0);
    const Trajectory new_traj = sample_plan(ref, plan, 1.0, 0.1);
    const auto& p = old_traj.samples.back();
    const auto& q = new_traj.samples.front();
    worst = std::max({worst, std::hypot(p.x - q.x, p.y - q.y), std::abs(p.speed - q.speed), std::abs(p.accel - q.accel)});
  }
  return worst;
}

// Random toy MDPs (2..5 actions, depth 1..3); counts searches that pick the
// expectimax action.
inline int toy_mdp_agreement(int instances, int iterations) {
  int agree = 0;
  for (int i = 0; i < instances; ++i) {
    Rng rng(mix_seed(9, i));
    ToyMdp m;
    m.salt = rng.next();
    m.actions = 2 + static_cast<int>(rng.below(4));
    m.depth = 1 + static_cast<int>(rng.below(3));
    MctsConfig cfg;
    cfg.iterations = iterations;
    cfg.max_depth = m.depth;
    Mcts<ToyMdp> search(m, cfg);
    agree += search.search({}, rng.next()) == m.best_action(cfg.discount);
  }
  return agree;
}

// Best first action of the stopped-leader state by exhaustive search.
inline MetaActionKind stopped_leader_expectimax(const MctsConfig& cfg) {
  const DrivingState st = stopped_leader_state();
  const DrivingModel model;
  Rng rng(0);
  MetaActionKind best = MetaActionKind::keep_lane_cruise;
  double best_v = -1;
  for (auto a : model.legal_actions(st)) {
    const auto tr = model.step(st, a, rng);
    const double v = tr.reward + cfg.discount * drive_value(model, tr.next, cfg.max_depth - 1, cfg.discount, rng);
    if (v > best_v + 1e-12) {
      best_v = v;
      best = a;
    }
  }
  return best;
}

}  // namespace limsim::test
