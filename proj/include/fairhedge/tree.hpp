#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fairhedge/errors.hpp"

namespace fairhedge {

using Index = Eigen::Index;

/// Scalar adapted process: one value per tree node.
template <typename Scalar>
using NodeVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Vector adapted process: one row per tree node.
template <typename Scalar>
using NodeMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Tolerance on the sum of the children's conditional probabilities.
inline constexpr double kProbabilitySumTolerance = 1e-12;

/// A node as it appears in a model description, before validation.
struct NodeSpec {
  std::string id;
  int time = 0;
  std::optional<std::string> parent;
  double cond_prob = 1.0;
  std::vector<double> prices;
};

/// Finite filtered probability space stored as a rooted tree.
///
/// Nodes at depth n are the atoms of F_n. Nodes are kept in level order and the
/// children of a node are contiguous, so the leaves below any node form a
/// contiguous block of the last level. Transition probabilities are stored per
/// edge; every one of them is strictly positive.
template <typename Scalar = double>
class ScenarioTree {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  ScenarioTree() = default;

  /// Validates `nodes` and builds the tree. Throws ModelError naming the offending node.
  static ScenarioTree from_nodes(int horizon, int asset_count, const std::vector<NodeSpec>& nodes);

  int horizon() const { return horizon_; }
  int asset_count() const { return asset_count_; }
  Index node_count() const { return static_cast<Index>(time_.size()); }
  Index leaf_count() const { return level_end(horizon_) - level_begin(horizon_); }
  Index root() const { return 0; }

  int time(Index u) const { return time_[u]; }
  Index parent(Index u) const { return parent_[u]; }
  Index first_child(Index u) const { return first_child_[u]; }
  Index child_count(Index u) const { return child_count_[u]; }
  bool is_leaf(Index u) const { return time_[u] == horizon_; }

  /// Nodes at time t occupy [level_begin(t), level_end(t)).
  Index level_begin(int t) const { return level_begin_[t]; }
  Index level_end(int t) const { return level_begin_[t + 1]; }

  /// Leaves below u occupy the node range [leaf_begin(u), leaf_end(u)).
  Index leaf_begin(Index u) const { return leaf_begin_[u]; }
  Index leaf_end(Index u) const { return leaf_end_[u]; }

  Scalar cond_prob(Index u) const { return cond_prob_[u]; }
  Scalar path_prob(Index u) const { return path_prob_[u]; }
  const Vector& cond_probs() const { return cond_prob_; }
  const Vector& path_probs() const { return path_prob_; }

  /// Stock prices, one row per node (the bank account is implicit and equal to one).
  const Matrix& prices() const { return prices_; }

  Index ancestor(Index u, int t) const {
    while (time_[u] > t) u = parent_[u];
    return u;
  }

  const std::string& id(Index u) const { return ids_[u]; }
  std::optional<Index> find(const std::string& id) const {
    auto it = index_of_.find(id);
    if (it == index_of_.end()) return std::nullopt;
    return it->second;
  }

  /// Same tree with probabilities and prices converted to another scalar type.
  template <typename NewScalar>
  ScenarioTree<NewScalar> cast() const {
    ScenarioTree<NewScalar> out;
    out.horizon_ = horizon_;
    out.asset_count_ = asset_count_;
    out.time_ = time_;
    out.parent_ = parent_;
    out.first_child_ = first_child_;
    out.child_count_ = child_count_;
    out.level_begin_ = level_begin_;
    out.leaf_begin_ = leaf_begin_;
    out.leaf_end_ = leaf_end_;
    out.ids_ = ids_;
    out.index_of_ = index_of_;
    out.cond_prob_ = cond_prob_.template cast<NewScalar>();
    out.path_prob_ = path_prob_.template cast<NewScalar>();
    out.prices_ = prices_.template cast<NewScalar>();
    return out;
  }

  /// The original node descriptions, in level order.
  std::vector<NodeSpec> node_specs() const;

 private:
  template <typename>
  friend class ScenarioTree;

  int horizon_ = 0;
  int asset_count_ = 0;
  std::vector<int> time_;
  std::vector<Index> parent_;
  std::vector<Index> first_child_;
  std::vector<Index> child_count_;
  std::vector<Index> level_begin_;
  std::vector<Index> leaf_begin_;
  std::vector<Index> leaf_end_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, Index> index_of_;
  Vector cond_prob_;
  Vector path_prob_;
  Matrix prices_;
};

template <typename Scalar>
ScenarioTree<Scalar> ScenarioTree<Scalar>::from_nodes(int horizon, int asset_count,
                                                      const std::vector<NodeSpec>& nodes) {
  using Kind = ModelError::Kind;
  if (horizon < 1) throw ModelError(Kind::kStructure, "", "horizon must be a positive integer");
  if (asset_count < 1) throw ModelError(Kind::kDimension, "", "asset count must be positive");
  if (nodes.empty()) throw ModelError(Kind::kStructure, "", "model has no nodes");

  std::unordered_map<std::string, std::size_t> input_index;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!input_index.emplace(nodes[i].id, i).second)
      throw ModelError(Kind::kStructure, nodes[i].id, "duplicate node id");
  }

  std::optional<std::size_t> root;
  std::vector<std::vector<std::size_t>> children(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const NodeSpec& n = nodes[i];
    if (n.time < 0 || n.time > horizon)
      throw ModelError(Kind::kStructure, n.id, "time outside 0..horizon");
    if (static_cast<int>(n.prices.size()) != asset_count)
      throw ModelError(Kind::kDimension, n.id, "price vector has wrong dimension");
    for (double p : n.prices) {
      if (!std::isfinite(p) || p <= 0.0)
        throw ModelError(Kind::kPositivity, n.id, "stock prices must be finite and strictly positive");
    }
    if (!std::isfinite(n.cond_prob) || n.cond_prob <= 0.0 || n.cond_prob > 1.0)
      throw ModelError(Kind::kProbability, n.id, "conditional probability must lie in (0, 1]");
    if (!n.parent) {
      if (root) throw ModelError(Kind::kStructure, n.id, "more than one root");
      if (n.time != 0) throw ModelError(Kind::kStructure, n.id, "root must be at time 0");
      if (std::abs(n.cond_prob - 1.0) > kProbabilitySumTolerance)
        throw ModelError(Kind::kProbability, n.id, "root probability must be 1");
      root = i;
      continue;
    }
    auto it = input_index.find(*n.parent);
    if (it == input_index.end()) throw ModelError(Kind::kStructure, n.id, "unknown parent " + *n.parent);
    if (nodes[it->second].time != n.time - 1)
      throw ModelError(Kind::kStructure, n.id, "parent must be one period earlier");
    children[it->second].push_back(i);
  }
  if (!root) throw ModelError(Kind::kStructure, "", "model has no root");

  // Breadth-first order keeps every node's children and every node's leaves contiguous.
  std::vector<std::size_t> order{*root};
  order.reserve(nodes.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    if (nodes[i].time < horizon && children[i].empty())
      throw ModelError(Kind::kStructure, nodes[i].id, "path ends before the horizon");
    double sum = 0.0;
    for (std::size_t c : children[i]) {
      sum += nodes[c].cond_prob;
      order.push_back(c);
    }
    if (!children[i].empty() && std::abs(sum - 1.0) > kProbabilitySumTolerance)
      throw ModelError(Kind::kProbability, nodes[i].id,
                       "children probabilities sum to " + detail::short_number(sum));
  }

  ScenarioTree tree;
  const auto count = static_cast<Index>(order.size());
  tree.horizon_ = horizon;
  tree.asset_count_ = asset_count;
  tree.time_.resize(order.size());
  tree.parent_.assign(order.size(), -1);
  tree.first_child_.assign(order.size(), -1);
  tree.child_count_.assign(order.size(), 0);
  tree.leaf_begin_.resize(order.size());
  tree.leaf_end_.resize(order.size());
  tree.ids_.resize(order.size());
  tree.cond_prob_.resize(count);
  tree.path_prob_.resize(count);
  tree.prices_.resize(count, asset_count);

  std::vector<Index> position(nodes.size());
  for (Index k = 0; k < count; ++k) position[order[k]] = k;

  for (Index k = 0; k < count; ++k) {
    const NodeSpec& n = nodes[order[k]];
    tree.time_[k] = n.time;
    tree.ids_[k] = n.id;
    tree.index_of_.emplace(n.id, k);
    tree.cond_prob_[k] = n.parent ? static_cast<Scalar>(n.cond_prob) : Scalar(1);
    for (int i = 0; i < asset_count; ++i) tree.prices_(k, i) = static_cast<Scalar>(n.prices[i]);
    const auto& ch = children[order[k]];
    if (!ch.empty()) {
      tree.first_child_[k] = position[ch.front()];
      tree.child_count_[k] = static_cast<Index>(ch.size());
      for (std::size_t c : ch) tree.parent_[position[c]] = k;
    }
  }

  tree.level_begin_.assign(horizon + 2, count);
  for (Index k = count - 1; k >= 0; --k) tree.level_begin_[tree.time_[k]] = k;

  tree.path_prob_[0] = Scalar(1);
  for (Index k = 1; k < count; ++k)
    tree.path_prob_[k] = tree.path_prob_[tree.parent_[k]] * tree.cond_prob_[k];

  for (Index k = count - 1; k >= 0; --k) {
    if (tree.time_[k] == horizon) {
      tree.leaf_begin_[k] = k;
      tree.leaf_end_[k] = k + 1;
    } else {
      const Index first = tree.first_child_[k];
      tree.leaf_begin_[k] = tree.leaf_begin_[first];
      tree.leaf_end_[k] = tree.leaf_end_[first + tree.child_count_[k] - 1];
    }
  }
  return tree;
}

template <typename Scalar>
std::vector<NodeSpec> ScenarioTree<Scalar>::node_specs() const {
  std::vector<NodeSpec> out(static_cast<std::size_t>(node_count()));
  for (Index u = 0; u < node_count(); ++u) {
    NodeSpec& n = out[u];
    n.id = ids_[u];
    n.time = time_[u];
    if (parent_[u] >= 0) n.parent = ids_[parent_[u]];
    n.cond_prob = static_cast<double>(cond_prob_[u]);
    n.prices.resize(asset_count_);
    for (int i = 0; i < asset_count_; ++i) n.prices[i] = static_cast<double>(prices_(u, i));
  }
  return out;
}

}  // namespace fairhedge
