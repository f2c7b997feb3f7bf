#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fairhedge/hedging.hpp"

namespace fairhedge {

/// Pivot ratio below which the normal equations are declared rank deficient.
inline constexpr double kRankTolerance = 1e-10;
/// Residual sum of squares at or below which a claim counts as replicable.
inline constexpr double kReplicableRss = 1e-18;

/// Weighted least-squares problem over (V0, xi at every non-terminal node).
///
/// One row per leaf, scaled by sqrt(path probability) / N_T, so that the residual sum
/// of squares equals E[((H - V0 - sum xi . dS) / N_T)^2].
template <typename Scalar>
struct RegressionSystem {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Matrix design;
  Vector target;
  std::vector<Index> column_node;   ///< -1 for the price column
  std::vector<Index> column_asset;  ///< -1 for the price column
};

template <typename Scalar>
RegressionSystem<Scalar> build_regression(const ScenarioTree<Scalar>& tree, const NumeraireSpec<Scalar>& spec,
                                          const Claim<Scalar>& h) {
  const int T = tree.horizon();
  const Index d = tree.asset_count();
  const Index leaves = tree.level_begin(T);
  const Index rows = tree.leaf_count();
  const Index cols = 1 + d * leaves;
  const NodeMatrix<Scalar> ds = price_increments(tree);

  RegressionSystem<Scalar> sys;
  sys.design = RegressionSystem<Scalar>::Matrix::Zero(rows, cols);
  sys.target.resize(rows);
  sys.column_node.assign(cols, -1);
  sys.column_asset.assign(cols, -1);
  for (Index u = 0; u < leaves; ++u) {
    for (Index i = 0; i < d; ++i) {
      sys.column_node[1 + u * d + i] = u;
      sys.column_asset[1 + u * d + i] = i;
    }
  }
  for (Index l = leaves; l < tree.node_count(); ++l) {
    const Index r = l - leaves;
    const Scalar s = std::sqrt(tree.path_prob(l)) / spec.values[l];
    sys.design(r, 0) = s;
    sys.target[r] = s * h.payoff[l];
    for (Index v = l; v != 0; v = tree.parent(v)) {
      const Index p = tree.parent(v);
      sys.design.block(r, 1 + p * d, 1, d) = s * ds.row(v);
    }
  }
  return sys;
}

template <typename Scalar>
struct OracleSolution {
  Scalar V0{};
  PredictableProcess<Scalar> xi;
  Scalar rss{};
  bool replicable = false;
  Scalar normal_residual{};  ///< norm of X^T (X theta - y), zero at the least-squares solution
  Scalar target_norm{};
};

/// Exact minimizer of E[((H - V0 - G_T(xi)) / N_T)^2] over all (V0, xi).
template <typename Scalar>
OracleSolution<Scalar> solve_global(const ScenarioTree<Scalar>& tree, const NumeraireSpec<Scalar>& spec,
                                    const Claim<Scalar>& h) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const RegressionSystem<Scalar> sys = build_regression(tree, spec, h);
  // Column-pivoted QR of the design with unit-norm columns; squared diagonal ratios of R
  // are the pivot ratios of the equilibrated normal equations, without forming them.
  const Vector norms = sys.design.colwise().norm().transpose();
  Vector scale = Vector::Ones(norms.size());
  for (Index k = 0; k < norms.size(); ++k)
    if (norms[k] > Scalar(0)) scale[k] = Scalar(1) / norms[k];
  const Eigen::ColPivHouseholderQR<Matrix> qr(sys.design * scale.asDiagonal());
  const Vector diag = qr.matrixR().diagonal().cwiseAbs();
  const Scalar largest = diag.size() > 0 ? diag[0] : Scalar(0);
  Index weakest = 0;
  const Scalar smallest = diag.size() > 0 ? diag.minCoeff(&weakest) : Scalar(0);
  const Scalar ratio = largest > Scalar(0) ? (smallest / largest) * (smallest / largest) : Scalar(0);
  if (sys.design.rows() < sys.design.cols() || !(ratio >= Scalar(kRankTolerance))) {
    const Index column = weakest < qr.colsPermutation().size() ? qr.colsPermutation().indices()[weakest] : 0;
    throw RankDeficientDesign(static_cast<long>(column), static_cast<double>(ratio));
  }
  const Vector theta = scale.asDiagonal() * qr.solve(sys.target);
  const Vector resid = sys.design * theta - sys.target;

  OracleSolution<Scalar> out;
  out.V0 = theta[0];
  out.xi = PredictableProcess<Scalar>::zero(tree, tree.asset_count());
  for (Index k = 1; k < theta.size(); ++k) out.xi.values(sys.column_node[k], sys.column_asset[k]) = theta[k];
  out.rss = resid.squaredNorm();
  out.replicable = out.rss <= Scalar(kReplicableRss);
  out.normal_residual = (sys.design.transpose() * resid).norm();
  out.target_norm = sys.target.norm();
  return out;
}

template <typename Scalar>
struct OracleComparison {
  Scalar v0_deviation{};
  Scalar xi_deviation{};
  Scalar max_deviation{};
  Scalar oracle_objective{};
  Scalar recursion_objective{};
  bool recursion_exceeds = false;  ///< recursion objective above the oracle's by more than 1e-10 relative
};

/// Objective tolerance used by check_against_recursion: relative part and an absolute floor
/// at the replicability scale.
inline constexpr double kObjectiveRelativeTolerance = 1e-10;

template <typename Scalar>
OracleComparison<Scalar> compare(const ScenarioTree<Scalar>& tree, const OracleSolution<Scalar>& oracle,
                                 const Decomposition<Scalar>& dec) {
  OracleComparison<Scalar> out;
  out.v0_deviation = std::abs(oracle.V0 - dec.V0);
  const Index inner = tree.level_begin(tree.horizon());
  if (inner > 0) {
    out.xi_deviation = (oracle.xi.values.topRows(inner) - dec.xi.values.topRows(inner)).cwiseAbs().maxCoeff();
  }
  out.max_deviation = std::max(out.v0_deviation, out.xi_deviation);
  out.oracle_objective = oracle.rss;
  out.recursion_objective = dec.diagnostics.objective;
  out.recursion_exceeds = out.recursion_objective - out.oracle_objective >
                          Scalar(kObjectiveRelativeTolerance) * out.oracle_objective + Scalar(kReplicableRss);
  return out;
}

/// Solves the global problem on the same inputs and compares it with a recursion result.
template <typename Scalar>
OracleComparison<Scalar> check_against_recursion(const ScenarioTree<Scalar>& tree,
                                                 const NumeraireSpec<Scalar>& spec, const Claim<Scalar>& h,
                                                 const Decomposition<Scalar>& dec) {
  return compare(tree, solve_global(tree, spec, h), dec);
}

}  // namespace fairhedge
