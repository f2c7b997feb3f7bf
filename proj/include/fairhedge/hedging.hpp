#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fairhedge/numeraire.hpp"

namespace fairhedge {

/// Covariance matrices whose scaled reciprocal condition number falls below this are singular.
inline constexpr double kSingularRcond = 1e-10;

/// Per non-terminal node, the d x d matrix of weighted covariances of the next increments.
template <typename Scalar>
struct CovMatrixProcess {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  std::vector<Matrix> matrices;  ///< indexed by node, empty at leaves
  std::vector<Matrix> inverses;
  NodeVector<Scalar> rcond;      ///< scaled reciprocal condition number, zero at leaves
};

template <typename Scalar>
struct DecompositionDiagnostics {
  Scalar identity_residual{};      ///< max |H/N_T - V0 - sum bar_xi . dS^N - L_T| over leaves
  Scalar martingale_residual{};    ///< max |E_n[L_{n+1}] - L_n|
  Scalar price_foc_residual{};     ///< max |E_n[(tilde V_{n+1} - V_n - xi_{n+1} . dS_{n+1}) N_T^-2]|
  Scalar strategy_foc_residual{};  ///< max |C^N_{n-1}(tilde V_n - xi_n . dS_n, dS^j_n)|
  Scalar weighted_residual_mean{}; ///< E[L_T / N_T]
  Scalar residual_mean{};          ///< E[L_T]
  Scalar orthogonality{};          ///< max |E_{n-1}[dL_n dM^i_n]|, M the martingale part of S^N
  Scalar objective{};              ///< E[L_T^2] = E[((H - W_T) / N_T)^2]
  Scalar min_rcond{};
};

/// Numeraire-adjusted Follmer-Schweizer decomposition
///   H / N_T = V0 + sum_k bar_xi_k . dS^N_k + L_T.
template <typename Scalar>
struct Decomposition {
  Scalar V0{};
  NodeVector<Scalar> V;              ///< conditional fair price; H / N_T at the leaves
  PredictableProcess<Scalar> xi;     ///< stock positions
  PredictableProcess<Scalar> c;      ///< right-hand sides of the normal equations
  LiftedStrategy<Scalar> lifted;     ///< (bank, xi), self-financing from V0
  NodeVector<Scalar> wealth;         ///< W = V0 + G(xi), original units
  NodeVector<Scalar> L;              ///< residual martingale
  CovMatrixProcess<Scalar> cov;
  DecompositionDiagnostics<Scalar> diagnostics;
};

namespace detail {

/// Reciprocal condition number of D^-1/2 C D^-1/2 with D the given second moments.
/// Scaling by the uncentered moments makes the test meaningful for d = 1 as well.
template <typename Scalar>
Scalar scaled_rcond(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& c,
                    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& second_moment) {
  if ((second_moment.array() <= Scalar(0)).any()) return Scalar(0);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> s = second_moment.cwiseSqrt().cwiseInverse();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> scaled = s.asDiagonal() * c * s.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> eig(
      scaled, Eigen::EigenvaluesOnly);
  const Scalar hi = eig.eigenvalues().maxCoeff();
  const Scalar lo = eig.eigenvalues().minCoeff();
  if (!(hi > Scalar(0))) return Scalar(0);
  return std::max(lo / hi, Scalar(0));
}

template <typename Scalar>
NodeVector<Scalar> leaf_weights(const ScenarioTree<Scalar>& tree, const NodeVector<Scalar>& numeraire) {
  NodeVector<Scalar> w = NodeVector<Scalar>::Zero(tree.node_count());
  const Index count = tree.leaf_count();
  w.tail(count) = numeraire.tail(count).array().square().inverse();
  return w;
}

template <typename Scalar>
Scalar expectation(const ScenarioTree<Scalar>& tree, const NodeVector<Scalar>& x) {
  return rollback(tree, x)[0];
}

/// Common tail of both decomposition routes: wealth, residual martingale, lift and diagnostics.
template <typename Scalar>
Decomposition<Scalar> assemble(const ScenarioTree<Scalar>& tree, const NumeraireSpec<Scalar>& spec,
                               const Claim<Scalar>& h, NodeVector<Scalar> v, PredictableProcess<Scalar> xi,
                               PredictableProcess<Scalar> c, CovMatrixProcess<Scalar> cov) {
  const int T = tree.horizon();
  const Index leaves = tree.level_begin(T);
  const Index count = tree.leaf_count();
  const NodeVector<Scalar>& n_val = spec.values;
  const NodeVector<Scalar> w = leaf_weights(tree, n_val);

  Decomposition<Scalar> d;
  d.V0 = v[0];
  d.V = std::move(v);
  d.V.tail(count) = h.payoff.tail(count).cwiseQuotient(n_val.tail(count));
  d.xi = std::move(xi);
  d.c = std::move(c);
  d.cov = std::move(cov);
  d.wealth = gains(tree, d.xi);
  d.wealth.array() += d.V0;
  d.lifted = lift_self_financing(tree, d.V0, d.xi);

  NodeVector<Scalar> l_t = NodeVector<Scalar>::Zero(tree.node_count());
  l_t.tail(count) = (h.payoff.tail(count) - d.wealth.tail(count)).cwiseQuotient(n_val.tail(count));
  d.L = rollback(tree, l_t);

  auto& diag = d.diagnostics;
  const NodeVector<Scalar> wealth_n = numeraire_wealth(tree, spec, d.lifted);
  for (Index l = leaves; l < tree.node_count(); ++l) {
    diag.identity_residual = std::max<Scalar>(
        diag.identity_residual, std::abs(h.payoff[l] / n_val[l] - wealth_n[l] - d.L[l]));
  }
  for (Index u = 0; u < leaves; ++u) {
    Scalar next(0);
    for (Index ch = tree.first_child(u); ch < tree.first_child(u) + tree.child_count(u); ++ch)
      next += tree.cond_prob(ch) * d.L[ch];
    diag.martingale_residual = std::max<Scalar>(diag.martingale_residual, std::abs(next - d.L[u]));
  }

  // First-order conditions, recomputed from the finished strategy.
  const NodeMatrix<Scalar> ds = price_increments(tree);
  for (int n = 0; n < T; ++n) {
    // tilde V_{n+1} - xi_{n+1} . dS_{n+1} = H - (G_T - G_n)
    NodeVector<Scalar> residual = NodeVector<Scalar>::Zero(tree.node_count());
    const NodeVector<Scalar> g_n = broadcast(tree, d.wealth, n);
    residual.tail(count) = h.payoff.tail(count) - d.wealth.tail(count) + g_n.tail(count);
    const NodeVector<Scalar> v_n = broadcast(tree, d.V, n);
    NodeVector<Scalar> price_term = NodeVector<Scalar>::Zero(tree.node_count());
    price_term.tail(count) = (residual.tail(count) - v_n.tail(count)).cwiseProduct(w.tail(count));
    const NodeVector<Scalar> foc = cond_expect(tree, price_term, T, n);
    for (Index u = tree.level_begin(n); u < tree.level_end(n); ++u)
      diag.price_foc_residual = std::max<Scalar>(diag.price_foc_residual, std::abs(foc[u]));
    for (Index j = 0; j < tree.asset_count(); ++j) {
      const NodeVector<Scalar> cj =
          weighted_bilinear(tree, n_val, residual, step_increment(tree, ds, n + 1, j), n);
      for (Index u = tree.level_begin(n); u < tree.level_end(n); ++u)
        diag.strategy_foc_residual = std::max<Scalar>(diag.strategy_foc_residual, std::abs(cj[u]));
    }
  }

  NodeVector<Scalar> weighted = NodeVector<Scalar>::Zero(tree.node_count());
  weighted.tail(count) = l_t.tail(count).cwiseQuotient(n_val.tail(count));
  diag.weighted_residual_mean = expectation(tree, weighted);
  diag.residual_mean = d.L[0];
  NodeVector<Scalar> sq = NodeVector<Scalar>::Zero(tree.node_count());
  sq.tail(count) = l_t.tail(count).array().square();
  diag.objective = expectation(tree, sq);

  const DoobDecomposition<Scalar> doob = doob_decompose(tree, spec.denominated);
  const NodeMatrix<Scalar> dm = increments(tree, doob.martingale);
  for (Index u = 0; u < leaves; ++u) {
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> acc =
        Eigen::Matrix<Scalar, 1, Eigen::Dynamic>::Zero(dm.cols());
    for (Index ch = tree.first_child(u); ch < tree.first_child(u) + tree.child_count(u); ++ch)
      acc += tree.cond_prob(ch) * (d.L[ch] - d.L[u]) * dm.row(ch);
    diag.orthogonality = std::max<Scalar>(diag.orthogonality, acc.cwiseAbs().maxCoeff());
  }
  diag.min_rcond = d.cov.rcond.head(leaves).minCoeff();
  return d;
}

}  // namespace detail

/// Fair price, hedging strategy and residual under a tradable numeraire, by backward
/// recursion: xi_n solves C_n xi_n = c_n with C_n the weighted covariance matrix of dS_n
/// and c_n the weighted covariances of tilde V_n = H - sum_{k>n} xi_k . dS_k (original
/// units) with dS_n. The conditional fair price is V_n = E_n[tilde V_n N_T^-2] / E_n[N_T^-2]
/// before the horizon and H / N_T at it.
template <typename Scalar>
Decomposition<Scalar> fs_decompose(const ScenarioTree<Scalar>& tree, const NumeraireSpec<Scalar>& spec,
                                   const Claim<Scalar>& h) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const int T = tree.horizon();
  const Index d = tree.asset_count();
  const Index count = tree.leaf_count();
  const NodeMatrix<Scalar> ds = price_increments(tree);
  const NodeVector<Scalar>& n_val = spec.values;
  const NodeVector<Scalar> w = detail::leaf_weights(tree, n_val);

  PredictableProcess<Scalar> xi = PredictableProcess<Scalar>::zero(tree, d);
  PredictableProcess<Scalar> c = PredictableProcess<Scalar>::zero(tree, d);
  CovMatrixProcess<Scalar> cov{std::vector<Matrix>(tree.node_count()), std::vector<Matrix>(tree.node_count()),
                              NodeVector<Scalar>::Zero(tree.node_count())};
  NodeVector<Scalar> v = NodeVector<Scalar>::Zero(tree.node_count());

  // residual = tilde V_n on the leaves, starting from H.
  NodeVector<Scalar> residual = NodeVector<Scalar>::Zero(tree.node_count());
  residual.tail(count) = h.payoff.tail(count);

  for (int n = T; n >= 1; --n) {
    std::vector<NodeVector<Scalar>> inc(d);
    for (Index i = 0; i < d; ++i) inc[i] = step_increment(tree, ds, n, i);

    std::vector<NodeVector<Scalar>> cmat(d * d);
    std::vector<NodeVector<Scalar>> rhs(d);
    std::vector<NodeVector<Scalar>> moment(d);
    for (Index i = 0; i < d; ++i) {
      rhs[i] = weighted_bilinear(tree, n_val, residual, inc[i], n - 1);
      for (Index j = i; j < d; ++j) cmat[i * d + j] = weighted_bilinear(tree, n_val, inc[i], inc[j], n - 1);
      NodeVector<Scalar> sq = NodeVector<Scalar>::Zero(tree.node_count());
      sq.tail(count) = inc[i].tail(count).array().square() * w.tail(count).array();
      moment[i] = cond_expect(tree, sq, T, n - 1);
    }

    for (Index u = tree.level_begin(n - 1); u < tree.level_end(n - 1); ++u) {
      Matrix cu(d, d);
      Vector bu(d), mu(d);
      for (Index i = 0; i < d; ++i) {
        bu[i] = rhs[i][u];
        mu[i] = moment[i][u];
        for (Index j = i; j < d; ++j) cu(i, j) = cu(j, i) = cmat[i * d + j][u];
      }
      const Scalar rc = detail::scaled_rcond(cu, mu);
      if (!(rc >= Scalar(kSingularRcond))) throw SingularCovariance(tree.id(u), static_cast<double>(rc));
      cov.matrices[u] = cu;
      cov.inverses[u] = cu.ldlt().solve(Matrix::Identity(d, d));
      cov.rcond[u] = rc;
      c.at(u) = bu.transpose();
      xi.at(u) = cu.ldlt().solve(bu).transpose();
    }

    // tilde V_{n-1} = tilde V_n - xi_n . dS_n
    for (Index l = tree.level_begin(T); l < tree.node_count(); ++l) {
      const Index at_n = tree.ancestor(l, n);
      residual[l] -= xi.at(tree.parent(at_n)).dot(ds.row(at_n));
    }
    NodeVector<Scalar> rw = NodeVector<Scalar>::Zero(tree.node_count());
    rw.tail(count) = residual.tail(count).cwiseProduct(w.tail(count));
    const NodeVector<Scalar> num = cond_expect(tree, rw, T, n - 1);
    const NodeVector<Scalar> den = cond_expect(tree, w, T, n - 1);
    for (Index u = tree.level_begin(n - 1); u < tree.level_end(n - 1); ++u) v[u] = num[u] / den[u];
  }
  return detail::assemble(tree, spec, h, std::move(v), std::move(xi), std::move(c), std::move(cov));
}

/// Classical decomposition with the bank account as numeraire, computed by one-step
/// regressions: xi_n = Cov_{n-1}(dS_n)^-1 Cov_{n-1}(E_n[tilde V_n], dS_n) and
/// V_n = E_n[H - sum_{k>n} xi_k . dS_k]. Independent of the weighted route above.
template <typename Scalar>
Decomposition<Scalar> classical_fs(const ScenarioTree<Scalar>& tree, const Claim<Scalar>& h) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const int T = tree.horizon();
  const Index d = tree.asset_count();
  const Index count = tree.leaf_count();
  const NodeMatrix<Scalar> ds = price_increments(tree);

  PredictableProcess<Scalar> xi = PredictableProcess<Scalar>::zero(tree, d);
  PredictableProcess<Scalar> c = PredictableProcess<Scalar>::zero(tree, d);
  CovMatrixProcess<Scalar> cov{std::vector<Matrix>(tree.node_count()), std::vector<Matrix>(tree.node_count()),
                              NodeVector<Scalar>::Zero(tree.node_count())};
  NodeVector<Scalar> v = NodeVector<Scalar>::Zero(tree.node_count());

  NodeVector<Scalar> residual = NodeVector<Scalar>::Zero(tree.node_count());
  residual.tail(count) = h.payoff.tail(count);

  for (int n = T; n >= 1; --n) {
    // E_n[tilde V_n] at the time-n nodes
    const NodeVector<Scalar> target = cond_expect(tree, residual, T, n);
    for (Index u = tree.level_begin(n - 1); u < tree.level_end(n - 1); ++u) {
      const Index first = tree.first_child(u);
      const Index kids = tree.child_count(u);
      Vector mean_ds = Vector::Zero(d);
      Scalar mean_y(0);
      Vector second = Vector::Zero(d);
      for (Index ch = first; ch < first + kids; ++ch) {
        mean_ds += tree.cond_prob(ch) * ds.row(ch).transpose();
        mean_y += tree.cond_prob(ch) * target[ch];
        second += tree.cond_prob(ch) * ds.row(ch).transpose().cwiseAbs2();
      }
      Matrix cu = Matrix::Zero(d, d);
      Vector bu = Vector::Zero(d);
      for (Index ch = first; ch < first + kids; ++ch) {
        const Vector centred = ds.row(ch).transpose() - mean_ds;
        cu += tree.cond_prob(ch) * centred * centred.transpose();
        bu += tree.cond_prob(ch) * (target[ch] - mean_y) * centred;
      }
      const Scalar rc = detail::scaled_rcond(cu, second);
      if (!(rc >= Scalar(kSingularRcond))) throw ZeroConditionalVariance(tree.id(u), static_cast<double>(rc));
      cov.matrices[u] = cu;
      cov.inverses[u] = cu.ldlt().solve(Matrix::Identity(d, d));
      cov.rcond[u] = rc;
      c.at(u) = bu.transpose();
      if (d == 1) {
        xi.at(u)(0) = bu[0] / cu(0, 0);
      } else {
        xi.at(u) = cu.ldlt().solve(bu).transpose();
      }
    }
    for (Index l = tree.level_begin(T); l < tree.node_count(); ++l) {
      const Index at_n = tree.ancestor(l, n);
      residual[l] -= xi.at(tree.parent(at_n)).dot(ds.row(at_n));
    }
    const NodeVector<Scalar> mean = cond_expect(tree, residual, T, n - 1);
    for (Index u = tree.level_begin(n - 1); u < tree.level_end(n - 1); ++u) v[u] = mean[u];
  }
  return detail::assemble(tree, bank_numeraire(tree), h, std::move(v), std::move(xi), std::move(c),
                          std::move(cov));
}

template <typename Scalar>
struct RateAdjustedPrice {
  Scalar V0{};
  PredictableProcess<Scalar> xi;
};

/// One-period fair price when the bank account earns a constant rate r:
///   V0 = E[H / (1 + r)] - xi_1 . E[S_1 / (1 + r) - S_0],
/// with xi_1 the classical strategy, which does not depend on r.
template <typename Scalar>
RateAdjustedPrice<Scalar> interest_rate_fair_price(const ScenarioTree<Scalar>& tree, const Claim<Scalar>& h,
                                                   Scalar rate) {
  if (tree.horizon() != 1) throw HorizonNotOne(tree.horizon());
  if (!(rate >= Scalar(0))) throw InputError("interest rate must be non-negative");
  const Decomposition<Scalar> base = classical_fs(tree, h);
  const Scalar growth = Scalar(1) + rate;
  Scalar eh(0);
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> es = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>::Zero(tree.asset_count());
  for (Index l = tree.level_begin(1); l < tree.node_count(); ++l) {
    eh += tree.cond_prob(l) * h.payoff[l];
    es += tree.cond_prob(l) * tree.prices().row(l);
  }
  const Scalar v0 = eh / growth - base.xi.at(0).dot(es / growth - tree.prices().row(0));
  return {v0, base.xi};
}

}  // namespace fairhedge
