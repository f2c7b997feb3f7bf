#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairhedge/market.hpp"

namespace fairhedge {

/// Published values a model is compared against, for one numeraire.
struct Reference {
  std::string numeraire;                                 ///< builtin name, e.g. "bank"
  std::optional<double> fair_price;
  std::map<std::string, std::vector<double>> strategy;  ///< node id -> position
  std::string note;
};

/// Everything a model file describes.
struct Model {
  ScenarioTree<double> tree;
  Claim<double> claim;
  std::optional<PredictableProcess<double>> generator;
  std::optional<double> rate;
  std::vector<Reference> references;
};

namespace fixtures {

inline NodeSpec node(std::string id, int time, std::optional<std::string> parent, double prob,
                     std::vector<double> prices) {
  return {std::move(id), time, std::move(parent), prob, std::move(prices)};
}

/// One-period trinomial model: S0 = 2, children 4, 2, 1 with probabilities 1/6, 1/2, 1/3,
/// and the call with strike 3, paying (1, 0, 0).
inline Model trinomial() {
  Model m;
  m.tree = ScenarioTree<double>::from_nodes(1, 1,
                                            {node("root", 0, std::nullopt, 1.0, {2.0}),
                                             node("up", 1, "root", 1.0 / 6.0, {4.0}),
                                             node("mid", 1, "root", 1.0 / 2.0, {2.0}),
                                             node("down", 1, "root", 1.0 / 3.0, {1.0})});
  m.claim = Claim<double>::from_leaves(m.tree, [&](Index l) { return std::max(m.tree.prices()(l, 0) - 3.0, 0.0); });
  m.references.push_back({"bank", 1.0 / 6.0, {{"root", {1.0 / 3.0}}}, "call with strike 3, unit numeraire"});
  m.references.push_back({"half-share", 471.0 / 4320.0, {{"root", {75.0 / 576.0}}},
                          "published values for N = 1 + dS / 2"});
  return m;
}

/// Two-state one-period model (4 or 1 from 2, even odds) with H = S_1.
inline Model binomial() {
  Model m;
  m.tree = ScenarioTree<double>::from_nodes(1, 1,
                                            {node("root", 0, std::nullopt, 1.0, {2.0}),
                                             node("up", 1, "root", 0.5, {4.0}),
                                             node("down", 1, "root", 0.5, {1.0})});
  m.claim = Claim<double>::from_leaves(m.tree, [&](Index l) { return m.tree.prices()(l, 0); });
  return m;
}

/// Two periods of a recombining-price trinomial with drift, and a call with strike 2.
inline Model two_period() {
  Model m;
  std::vector<NodeSpec> nodes{node("r", 0, std::nullopt, 1.0, {2.0})};
  const double up = 1.5, mid = 1.0, down = 0.6;
  const double pu = 0.3, pm = 0.45, pd = 0.25;
  const char* name[] = {"u", "m", "d"};
  const double move[] = {up, mid, down};
  const double prob[] = {pu, pm, pd};
  for (int i = 0; i < 3; ++i) {
    nodes.push_back(node(name[i], 1, "r", prob[i], {2.0 * move[i]}));
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      nodes.push_back(node(std::string(name[i]) + name[j], 2, name[i], prob[j], {2.0 * move[i] * move[j]}));
    }
  }
  m.tree = ScenarioTree<double>::from_nodes(2, 1, nodes);
  m.claim = Claim<double>::from_leaves(m.tree, [&](Index l) { return std::max(m.tree.prices()(l, 0) - 2.0, 0.0); });
  return m;
}

/// One period, two stocks, four states, and a spread option on the two.
inline Model two_asset() {
  Model m;
  m.tree = ScenarioTree<double>::from_nodes(1, 2,
                                            {node("root", 0, std::nullopt, 1.0, {2.0, 3.0}),
                                             node("a", 1, "root", 0.25, {3.0, 3.5}),
                                             node("b", 1, "root", 0.25, {2.5, 2.0}),
                                             node("c", 1, "root", 0.3, {1.5, 3.5}),
                                             node("e", 1, "root", 0.2, {1.0, 2.5})});
  m.claim = Claim<double>::from_leaves(
      m.tree, [&](Index l) { return std::max(m.tree.prices()(l, 1) - m.tree.prices()(l, 0), 0.0); });
  return m;
}

/// The trinomial with its stock listed twice: the two assets are redundant.
inline Model redundant() {
  Model m;
  m.tree = ScenarioTree<double>::from_nodes(1, 2,
                                            {node("root", 0, std::nullopt, 1.0, {2.0, 2.0}),
                                             node("up", 1, "root", 1.0 / 6.0, {4.0, 4.0}),
                                             node("mid", 1, "root", 1.0 / 2.0, {2.0, 2.0}),
                                             node("down", 1, "root", 1.0 / 3.0, {1.0, 1.0})});
  m.claim = Claim<double>::from_leaves(m.tree, [&](Index l) { return std::max(m.tree.prices()(l, 0) - 3.0, 0.0); });
  return m;
}

inline std::vector<std::string> names() { return {"trinomial", "binomial", "two-period", "two-asset", "redundant"}; }

inline std::optional<Model> by_name(const std::string& name) {
  if (name == "trinomial") return trinomial();
  if (name == "binomial") return binomial();
  if (name == "two-period") return two_period();
  if (name == "two-asset") return two_asset();
  if (name == "redundant") return redundant();
  return std::nullopt;
}

}  // namespace fixtures

/// Builtin generators: "bank" is eta = 0, "half-share" holds half a unit of the first
/// stock at every node.
inline std::optional<PredictableProcess<double>> builtin_generator(const ScenarioTree<double>& tree,
                                                                   const std::string& name) {
  if (name == "bank") return PredictableProcess<double>::zero(tree, tree.asset_count());
  if (name == "half-share") {
    Eigen::VectorXd eta = Eigen::VectorXd::Zero(tree.asset_count());
    eta[0] = 0.5;
    return PredictableProcess<double>::constant(tree, eta);
  }
  return std::nullopt;
}

}  // namespace fairhedge
