#pragma once

#include <algorithm>
#include <cmath>

#include "fairhedge/market.hpp"

namespace fairhedge {

/// Numeraires at or below this value are rejected.
inline constexpr double kNumerairePositivityFloor = 1e-12;

/// Tradable numeraire N = 1 + G(eta) together with prices expressed in units of N.
template <typename Scalar>
struct NumeraireSpec {
  PredictableProcess<Scalar> generator;  ///< eta
  NodeVector<Scalar> values;             ///< N, with N_0 = 1
  NodeMatrix<Scalar> denominated;        ///< S^N = (1/N, S/N), d+1 columns
};

/// Builds S^N from given numeraire values after checking positivity.
template <typename Scalar>
NumeraireSpec<Scalar> make_numeraire(const ScenarioTree<Scalar>& tree, PredictableProcess<Scalar> generator,
                                     NodeVector<Scalar> values) {
  for (Index u = 0; u < tree.node_count(); ++u) {
    if (!(values[u] > Scalar(kNumerairePositivityFloor)))
      throw NonPositiveNumeraire(tree.id(u), static_cast<double>(values[u]));
  }
  NodeMatrix<Scalar> denominated = prices_with_bank(tree);
  denominated.array().colwise() /= values.array();
  return {std::move(generator), std::move(values), std::move(denominated)};
}

/// N_n = 1 + sum_{k<=n} eta_k . dS_k. Throws NonPositiveNumeraire at the first node
/// (in level order) where N drops to the positivity floor.
template <typename Scalar>
NumeraireSpec<Scalar> build_numeraire(const ScenarioTree<Scalar>& tree, const PredictableProcess<Scalar>& eta) {
  if (eta.dimension() != tree.asset_count())
    throw std::invalid_argument("numeraire generator must have one column per stock");
  NodeVector<Scalar> values = gains(tree, eta);
  values.array() += Scalar(1);
  return make_numeraire(tree, eta, std::move(values));
}

/// The bank account itself, N = 1.
template <typename Scalar>
NumeraireSpec<Scalar> bank_numeraire(const ScenarioTree<Scalar>& tree) {
  return build_numeraire(tree, PredictableProcess<Scalar>::zero(tree, tree.asset_count()));
}

/// X / N, node by node.
template <typename Scalar>
NodeVector<Scalar> denominate_wealth(const NumeraireSpec<Scalar>& spec, const NodeVector<Scalar>& x) {
  return x.cwiseQuotient(spec.values);
}

/// Self-financing strategy on (bank, stocks) with the given initial wealth.
template <typename Scalar>
struct LiftedStrategy {
  PredictableProcess<Scalar> position;  ///< d+1 columns, bank first
  Scalar initial_wealth{};

  /// The stock positions alone.
  PredictableProcess<Scalar> stocks() const {
    return {position.values.rightCols(position.values.cols() - 1)};
  }
};

/// Adds the bank position that makes xi self-financing from initial wealth v0:
/// bank_n = W_{n-1} - xi_n . S_{n-1} with W = v0 + G(xi) in original units.
template <typename Scalar>
LiftedStrategy<Scalar> lift_self_financing(const ScenarioTree<Scalar>& tree, Scalar v0,
                                           const PredictableProcess<Scalar>& xi) {
  const NodeVector<Scalar> wealth = (gains(tree, xi).array() + v0).matrix();
  LiftedStrategy<Scalar> out{PredictableProcess<Scalar>::zero(tree, xi.dimension() + 1), v0};
  for (Index u = 0; u < tree.level_begin(tree.horizon()); ++u) {
    out.position.values(u, 0) = wealth[u] - xi.at(u).dot(tree.prices().row(u));
    out.position.values.row(u).tail(xi.dimension()) = xi.at(u);
  }
  return out;
}

/// Wealth of a lifted strategy measured in units of the numeraire:
/// v0 + sum_k bar_xi_k . dS^N_k (N_0 = 1, so the initial wealth carries over).
template <typename Scalar>
NodeVector<Scalar> numeraire_wealth(const ScenarioTree<Scalar>& tree, const NumeraireSpec<Scalar>& spec,
                                    const LiftedStrategy<Scalar>& lifted) {
  NodeVector<Scalar> g = gains(tree, lifted.position, spec.denominated);
  g.array() += lifted.initial_wealth;
  return g;
}

template <typename Scalar>
struct WealthCorrespondence {
  Scalar max_deviation{};        ///< max |W^N - W/N| over nodes
  Scalar original_sf_residual{}; ///< max |bar_xi_n . bar S_n - W_n|
  Scalar numeraire_sf_residual{};///< max |bar_xi_n . S^N_n - W^N_n|
};

/// Checks that lifting xi and measuring its wealth in units of N gives W / N.
template <typename Scalar>
WealthCorrespondence<Scalar> verify_wealth_correspondence(const ScenarioTree<Scalar>& tree,
                                                          const NumeraireSpec<Scalar>& spec, Scalar v0,
                                                          const PredictableProcess<Scalar>& xi) {
  const LiftedStrategy<Scalar> lifted = lift_self_financing(tree, v0, xi);
  const NodeVector<Scalar> wealth = (gains(tree, xi).array() + v0).matrix();
  const NodeVector<Scalar> wealth_n = numeraire_wealth(tree, spec, lifted);
  const NodeMatrix<Scalar> bar_s = prices_with_bank(tree);

  WealthCorrespondence<Scalar> out;
  out.max_deviation = (wealth_n - wealth.cwiseQuotient(spec.values)).cwiseAbs().maxCoeff();
  for (Index u = 1; u < tree.node_count(); ++u) {
    const auto held = lifted.position.at(tree.parent(u));
    out.original_sf_residual =
        std::max<Scalar>(out.original_sf_residual, std::abs(held.dot(bar_s.row(u)) - wealth[u]));
    out.numeraire_sf_residual = std::max<Scalar>(
        out.numeraire_sf_residual, std::abs(held.dot(spec.denominated.row(u)) - wealth_n[u]));
  }
  return out;
}

}  // namespace fairhedge
