#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "limsim/common/error.hpp"
#include "limsim/common/rng.hpp"

namespace limsim {

struct MctsConfig {
  int iterations = 500;
  double uct_c = std::numbers::sqrt2;
  int max_depth = 3;
  double discount = 0.9;
};

// A search model: actions are totally ordered (the order is the tie-break),
// step() returns one sampled outcome with a reward in [0, 1] and a key that
// identifies the outcome's abstract state.
template <class M>
concept SearchModel = requires(const M& m, const typename M::State& s, typename M::Action a, Rng& rng) {
  { m.legal_actions(s) } -> std::convertible_to<std::vector<typename M::Action>>;
  { m.step(s, a, rng) } -> std::same_as<typename M::Transition>;
  { m.rollout_action(s) } -> std::same_as<typename M::Action>;
};

template <SearchModel Model>
class Mcts {
 public:
  using State = typename Model::State;
  using Action = typename Model::Action;
  using Key = decltype(std::declval<typename Model::Transition>().key);

  struct DecisionNode;
  // Statistics of one action at a node; outcome children keyed by abstract state.
  struct Edge {
    Action action;
    int visits = 0;
    double total_reward = 0.0;
    std::map<Key, std::unique_ptr<DecisionNode>> children;
  };
  struct DecisionNode {
    State state;
    int depth = 0;
    int visits = 0;
    double total_reward = 0.0;
    std::vector<Edge> edges;  // one per legal action, in action order
  };

  Mcts(const Model& model, MctsConfig cfg) : model_(model), cfg_(cfg) {}

  // Throws NoLegalAction when the root has no legal action.
  Action search(const State& root_state, std::uint64_t seed) {
    if (cfg_.iterations < 1) throw std::invalid_argument("mcts needs at least one iteration");
    root_ = make_node(root_state, 0);
    if (root_->edges.empty()) throw NoLegalAction("no legal action at the search root");
    Rng rng(seed);
    for (int i = 0; i < cfg_.iterations; ++i) iterate(rng);
    return ranked().front();
  }

  // Root actions by visit count, descending; ties keep action order.
  std::vector<Action> ranked() const {
    std::vector<const Edge*> edges;
    for (const Edge& e : root_->edges) edges.push_back(&e);
    std::stable_sort(edges.begin(), edges.end(), [](const Edge* a, const Edge* b) { return a->visits > b->visits; });
    std::vector<Action> out;
    for (const Edge* e : edges) out.push_back(e->action);
    return out;
  }

  const DecisionNode& root() const { return *root_; }

 private:
  std::unique_ptr<DecisionNode> make_node(const State& s, int depth) const {
    auto node = std::make_unique<DecisionNode>();
    node->state = s;
    node->depth = depth;
    if (depth < cfg_.max_depth) {
      for (const Action& a : model_.legal_actions(s)) node->edges.push_back(Edge{a, 0, 0.0, {}});
    }
    return node;
  }

  // Largest return obtainable from `depth` onward.
  double return_scale(int depth) const {
    double sum = 0.0, g = 1.0;
    for (int d = depth; d < cfg_.max_depth; ++d) {
      sum += g;
      g *= cfg_.discount;
    }
    return sum > 0.0 ? sum : 1.0;
  }

  Edge& select(DecisionNode& node) const {
    for (Edge& e : node.edges) {
      if (e.visits == 0) return e;
    }
    const double scale = return_scale(node.depth);
    const double log_n = std::log(static_cast<double>(node.visits));
    Edge* best = &node.edges.front();
    double best_value = -std::numeric_limits<double>::infinity();
    for (Edge& e : node.edges) {
      const double n = static_cast<double>(e.visits);
      const double value = e.total_reward / n / scale + cfg_.uct_c * std::sqrt(log_n / n);
      if (value > best_value) {
        best_value = value;
        best = &e;
      }
    }
    return *best;
  }

  void iterate(Rng& rng) {
    struct Visit {
      DecisionNode* node;
      Edge* edge;
      double reward;
    };
    std::vector<Visit> path;
    DecisionNode* node = root_.get();
    while (!node->edges.empty()) {
      const bool expanding =
          std::any_of(node->edges.begin(), node->edges.end(), [](const Edge& e) { return e.visits == 0; });
      Edge& edge = select(*node);
      auto tr = model_.step(node->state, edge.action, rng);
      auto& child = edge.children[tr.key];
      if (!child) child = make_node(tr.next, node->depth + 1);
      path.push_back({node, &edge, tr.reward});
      node = child.get();
      if (expanding) break;
    }

    // Rollout from the leaf with the default policy.
    double tail = 0.0;
    {
      std::vector<double> rewards;
      State s = node->state;
      for (int d = node->depth; d < cfg_.max_depth; ++d) {
        const auto legal = model_.legal_actions(s);
        if (legal.empty()) break;
        auto tr = model_.step(s, model_.rollout_action(s), rng);
        rewards.push_back(tr.reward);
        s = tr.next;
      }
      for (auto it = rewards.rbegin(); it != rewards.rend(); ++it) tail = *it + cfg_.discount * tail;
    }
    node->visits += 1;
    node->total_reward += tail;

    double g = tail;
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      g = it->reward + cfg_.discount * g;
      it->edge->visits += 1;
      it->edge->total_reward += g;
      it->node->visits += 1;
      it->node->total_reward += g;
    }
  }

  const Model& model_;
  MctsConfig cfg_;
  std::unique_ptr<DecisionNode> root_;
};

}  // namespace limsim
