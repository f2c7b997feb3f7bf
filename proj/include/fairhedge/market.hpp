#pragma once

#include <stdexcept>
#include <string>

#include "fairhedge/tree.hpp"

namespace fairhedge {

/// Predictable process: row u holds the position chosen at the non-terminal node u
/// and held over the step into each of its children. Rows of leaves are zero.
template <typename Scalar>
struct PredictableProcess {
  NodeMatrix<Scalar> values;

  static PredictableProcess zero(const ScenarioTree<Scalar>& tree, Index columns) {
    return {NodeMatrix<Scalar>::Zero(tree.node_count(), columns)};
  }

  /// Same position at every non-terminal node.
  static PredictableProcess constant(const ScenarioTree<Scalar>& tree,
                                     const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& position) {
    PredictableProcess p = zero(tree, position.size());
    for (Index u = 0; u < tree.level_begin(tree.horizon()); ++u) p.values.row(u) = position.transpose();
    return p;
  }

  Index dimension() const { return values.cols(); }
  auto at(Index u) const { return values.row(u); }
  auto at(Index u) { return values.row(u); }

  template <typename NewScalar>
  PredictableProcess<NewScalar> cast() const {
    return {values.template cast<NewScalar>()};
  }
};

/// Terminal payoff; only the leaf entries are meaningful.
template <typename Scalar>
struct Claim {
  NodeVector<Scalar> payoff;

  template <typename Fn>
  static Claim from_leaves(const ScenarioTree<Scalar>& tree, Fn&& value_at_leaf) {
    Claim c{NodeVector<Scalar>::Zero(tree.node_count())};
    for (Index l = tree.level_begin(tree.horizon()); l < tree.node_count(); ++l)
      c.payoff[l] = value_at_leaf(l);
    return c;
  }

  template <typename NewScalar>
  Claim<NewScalar> cast() const {
    return {payoff.template cast<NewScalar>()};
  }
};

namespace detail {

template <typename Scalar>
void check_size(const ScenarioTree<Scalar>& tree, Index size, const char* what) {
  if (size != tree.node_count())
    throw std::invalid_argument(std::string(what) + ": process is not defined on every node");
}

template <typename Scalar>
void check_times(const ScenarioTree<Scalar>& tree, int m, int n) {
  if (n < 0 || m > tree.horizon() || n > m)
    throw std::out_of_range("conditional expectation needs 0 <= n <= m <= horizon");
}

}  // namespace detail

/// E_{F_t}[X] for every t in [n, m], where X is read at the time-m nodes.
///
/// Entries at times in [n, m] hold the conditional expectations (time m keeps X);
/// every other entry is zero. Children are summed left to right in stored order.
template <typename Scalar>
NodeVector<Scalar> cond_expect(const ScenarioTree<Scalar>& tree, const NodeVector<Scalar>& x, int m,
                               int n) {
  detail::check_size(tree, x.size(), "cond_expect");
  detail::check_times(tree, m, n);
  NodeVector<Scalar> out = NodeVector<Scalar>::Zero(tree.node_count());
  out.segment(tree.level_begin(m), tree.level_end(m) - tree.level_begin(m)) =
      x.segment(tree.level_begin(m), tree.level_end(m) - tree.level_begin(m));
  for (int t = m - 1; t >= n; --t) {
    for (Index u = tree.level_begin(t); u < tree.level_end(t); ++u) {
      Scalar acc(0);
      const Index first = tree.first_child(u);
      for (Index c = first; c < first + tree.child_count(u); ++c) acc += tree.cond_prob(c) * out[c];
      out[u] = acc;
    }
  }
  return out;
}

/// E_{F_t}[X] at every node, for a terminal random variable X.
template <typename Scalar>
NodeVector<Scalar> rollback(const ScenarioTree<Scalar>& tree, const NodeVector<Scalar>& x) {
  return cond_expect(tree, x, tree.horizon(), 0);
}

/// Views the time-n values of x as a random variable at every later time.
/// Entries at times <= n are copied unchanged.
template <typename Scalar>
NodeVector<Scalar> broadcast(const ScenarioTree<Scalar>& tree, const NodeVector<Scalar>& x, int n) {
  detail::check_size(tree, x.size(), "broadcast");
  NodeVector<Scalar> out = x;
  for (Index u = tree.level_end(n); u < tree.node_count(); ++u) out[u] = out[tree.parent(u)];
  return out;
}

/// Row u is X_u - X_parent(u); the root row is zero.
template <typename Derived>
NodeMatrix<typename Derived::Scalar> increments(
    const ScenarioTree<typename Derived::Scalar>& tree, const Eigen::MatrixBase<Derived>& x) {
  NodeMatrix<typename Derived::Scalar> out(x.rows(), x.cols());
  out.row(0).setZero();
  for (Index u = 1; u < tree.node_count(); ++u) out.row(u) = x.row(u) - x.row(tree.parent(u));
  return out;
}

template <typename Scalar>
NodeMatrix<Scalar> price_increments(const ScenarioTree<Scalar>& tree) {
  return increments(tree, tree.prices());
}

/// Discounted prices including the bank account, (1, S).
template <typename Scalar>
NodeMatrix<Scalar> prices_with_bank(const ScenarioTree<Scalar>& tree) {
  NodeMatrix<Scalar> out(tree.node_count(), tree.asset_count() + 1);
  out.col(0).setOnes();
  out.rightCols(tree.asset_count()) = tree.prices();
  return out;
}

/// Gains process G_n = sum_{k<=n} xi_k . dX_k along every path, for a price process X
/// with as many columns as xi.
template <typename Scalar, typename Derived>
NodeVector<Scalar> gains(const ScenarioTree<Scalar>& tree, const PredictableProcess<Scalar>& xi,
                         const Eigen::MatrixBase<Derived>& x) {
  detail::check_size(tree, xi.values.rows(), "gains");
  if (xi.dimension() != x.cols()) throw std::invalid_argument("gains: strategy dimension mismatch");
  NodeVector<Scalar> g(tree.node_count());
  g[0] = Scalar(0);
  for (Index u = 1; u < tree.node_count(); ++u) {
    const Index p = tree.parent(u);
    g[u] = g[p] + xi.at(p).dot(x.row(u) - x.row(p));
  }
  return g;
}

template <typename Scalar>
NodeVector<Scalar> gains(const ScenarioTree<Scalar>& tree, const PredictableProcess<Scalar>& xi) {
  return gains(tree, xi, tree.prices());
}

template <typename Scalar>
struct DoobDecomposition {
  NodeMatrix<Scalar> martingale;    ///< M, with M_0 = X_0
  NodeMatrix<Scalar> compensator;   ///< A, cumulative, A_0 = 0
  NodeMatrix<Scalar> drift;         ///< E_{F_{n-1}}[dX_n], one row per non-terminal node
};

/// X = M + A with dA_n = E_{F_{n-1}}[dX_n].
template <typename Scalar, typename Derived>
DoobDecomposition<Scalar> doob_decompose(const ScenarioTree<Scalar>& tree,
                                         const Eigen::MatrixBase<Derived>& x) {
  const Index cols = x.cols();
  DoobDecomposition<Scalar> out{NodeMatrix<Scalar>(tree.node_count(), cols),
                                NodeMatrix<Scalar>::Zero(tree.node_count(), cols),
                                NodeMatrix<Scalar>::Zero(tree.node_count(), cols)};
  const NodeMatrix<Scalar> dx = increments(tree, x);
  for (Index u = 0; u < tree.level_begin(tree.horizon()); ++u) {
    const Index first = tree.first_child(u);
    for (Index c = first; c < first + tree.child_count(u); ++c)
      out.drift.row(u) += tree.cond_prob(c) * dx.row(c);
  }
  for (Index u = 1; u < tree.node_count(); ++u) {
    const Index p = tree.parent(u);
    out.compensator.row(u) = out.compensator.row(p) + out.drift.row(p);
  }
  out.martingale = x - out.compensator;
  return out;
}

template <typename Scalar>
DoobDecomposition<Scalar> doob_decompose(const ScenarioTree<Scalar>& tree) {
  return doob_decompose(tree, tree.prices());
}

/// Numeraire-weighted bilinear form of two terminal random variables, at every time-n node:
///
///   E_n[(X - a_X)(Y - a_Y) N^-2],  a_X = E_n[X N^-2] / E_n[N^-2],  N = N_T.
///
/// Only the leaf entries of `terminal_numeraire`, `x` and `y` are read. The result holds
/// values at time-n nodes and zero elsewhere. With N = 1 this is the conditional covariance.
template <typename Scalar>
NodeVector<Scalar> weighted_bilinear(const ScenarioTree<Scalar>& tree,
                                     const NodeVector<Scalar>& terminal_numeraire,
                                     const NodeVector<Scalar>& x, const NodeVector<Scalar>& y, int n) {
  const int T = tree.horizon();
  if (n < 0 || n >= T) throw std::out_of_range("weighted_bilinear needs 0 <= n < horizon");
  detail::check_size(tree, terminal_numeraire.size(), "weighted_bilinear");
  const Index leaves = tree.level_begin(T);
  const Index count = tree.leaf_count();
  for (Index l = leaves; l < tree.node_count(); ++l) {
    if (!(terminal_numeraire[l] > Scalar(0)))
      throw NonPositiveNumeraire(tree.id(l), static_cast<double>(terminal_numeraire[l]));
  }

  NodeVector<Scalar> w = NodeVector<Scalar>::Zero(tree.node_count());
  w.tail(count) = terminal_numeraire.tail(count).array().square().inverse();
  NodeVector<Scalar> xw = NodeVector<Scalar>::Zero(tree.node_count());
  NodeVector<Scalar> yw = NodeVector<Scalar>::Zero(tree.node_count());
  xw.tail(count) = x.tail(count).cwiseProduct(w.tail(count));
  yw.tail(count) = y.tail(count).cwiseProduct(w.tail(count));

  const NodeVector<Scalar> ew = cond_expect(tree, w, T, n);
  NodeVector<Scalar> ax = cond_expect(tree, xw, T, n);
  NodeVector<Scalar> ay = cond_expect(tree, yw, T, n);
  for (Index u = tree.level_begin(n); u < tree.level_end(n); ++u) {
    ax[u] /= ew[u];
    ay[u] /= ew[u];
  }
  ax = broadcast(tree, ax, n);
  ay = broadcast(tree, ay, n);

  NodeVector<Scalar> z = NodeVector<Scalar>::Zero(tree.node_count());
  z.tail(count) = (x.tail(count) - ax.tail(count))
                      .cwiseProduct(y.tail(count) - ay.tail(count))
                      .cwiseProduct(w.tail(count));
  NodeVector<Scalar> out = NodeVector<Scalar>::Zero(tree.node_count());
  const NodeVector<Scalar> ez = cond_expect(tree, z, T, n);
  out.segment(tree.level_begin(n), tree.level_end(n) - tree.level_begin(n)) =
      ez.segment(tree.level_begin(n), tree.level_end(n) - tree.level_begin(n));
  return out;
}

/// Same form for X and Y observed at time m (n < m <= T).
template <typename Scalar>
NodeVector<Scalar> weighted_bilinear(const ScenarioTree<Scalar>& tree,
                                     const NodeVector<Scalar>& terminal_numeraire,
                                     const NodeVector<Scalar>& x, const NodeVector<Scalar>& y, int m,
                                     int n) {
  if (m <= n || m > tree.horizon()) throw std::out_of_range("weighted_bilinear needs n < m <= horizon");
  return weighted_bilinear(tree, terminal_numeraire, broadcast(tree, x, m), broadcast(tree, y, m), n);
}

/// Conditional covariance Cov_{F_n}(X, Y) of terminal random variables, at time-n nodes.
template <typename Scalar>
NodeVector<Scalar> conditional_covariance(const ScenarioTree<Scalar>& tree, const NodeVector<Scalar>& x,
                                          const NodeVector<Scalar>& y, int n) {
  const int T = tree.horizon();
  const NodeVector<Scalar> mx = broadcast(tree, cond_expect(tree, x, T, n), n);
  const NodeVector<Scalar> my = broadcast(tree, cond_expect(tree, y, T, n), n);
  const NodeVector<Scalar> z = (x - mx).cwiseProduct(y - my);
  NodeVector<Scalar> out = NodeVector<Scalar>::Zero(tree.node_count());
  const NodeVector<Scalar> ez = cond_expect(tree, z, T, n);
  out.segment(tree.level_begin(n), tree.level_end(n) - tree.level_begin(n)) =
      ez.segment(tree.level_begin(n), tree.level_end(n) - tree.level_begin(n));
  return out;
}

/// Increment of column i of X over the step into time n, as a terminal random variable.
template <typename Scalar, typename Derived>
NodeVector<Scalar> step_increment(const ScenarioTree<Scalar>& tree, const Eigen::MatrixBase<Derived>& dx,
                                  int n, Index i) {
  NodeVector<Scalar> v = NodeVector<Scalar>::Zero(tree.node_count());
  v.segment(tree.level_begin(n), tree.level_end(n) - tree.level_begin(n)) =
      dx.col(i).segment(tree.level_begin(n), tree.level_end(n) - tree.level_begin(n));
  return broadcast(tree, v, n);
}

}  // namespace fairhedge
