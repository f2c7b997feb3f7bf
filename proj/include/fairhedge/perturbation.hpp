#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "fairhedge/hedging.hpp"

namespace fairhedge {

/// Fraction of the positivity range of the family that is considered usable.
inline constexpr double kFamilySafetyFactor = 0.99;
/// Minimum empirical order of the central-difference agreement.
inline constexpr double kMinimumFdOrder = 1.5;
/// Central-difference deviations below the floor are roundoff. At step eps the floor is
/// kFdFloor * (1 + scale) + kFdRoundoff * u * (1 + size) / (rcond * |eps|), u the unit
/// roundoff of the re-solves, size the magnitude of the base solution.
inline constexpr double kFdFloor = 1e-11;
inline constexpr double kFdRoundoff = 64.0;

/// How the strategy correction term built from A' is centred.
///   kConditional, kUnconditional: centre A' by E_{F_{n-1}}[A'] or by E[A'].
///   kLiteral: the expansion exactly as first written down, kept as a negative control.
enum class CTildeVariant { kAuto, kConditional, kUnconditional, kLiteral };

inline const char* to_string(CTildeVariant v) {
  switch (v) {
    case CTildeVariant::kAuto: return "auto";
    case CTildeVariant::kConditional: return "conditional";
    case CTildeVariant::kUnconditional: return "unconditional";
    case CTildeVariant::kLiteral: return "literal";
  }
  return "unknown";
}

inline std::optional<CTildeVariant> parse_variant(std::string_view name) {
  for (CTildeVariant v : {CTildeVariant::kAuto, CTildeVariant::kConditional, CTildeVariant::kUnconditional,
                          CTildeVariant::kLiteral}) {
    if (name == to_string(v)) return v;
  }
  return std::nullopt;
}

/// Linear family N^eps = 1 + eps N' with N' = G(eta), positive for eps in (eps_lower, eps_upper).
template <typename Scalar>
struct PerturbationFamily {
  PredictableProcess<Scalar> eta;
  NodeVector<Scalar> n_prime;
  Scalar eps_lower = -std::numeric_limits<Scalar>::infinity();
  Scalar eps_upper = std::numeric_limits<Scalar>::infinity();

  bool contains(Scalar eps) const { return eps > eps_lower && eps < eps_upper; }

  /// The member of the family at eps, built as 1 + eps N' with generator eps eta.
  NumeraireSpec<Scalar> at(const ScenarioTree<Scalar>& tree, Scalar eps) const {
    if (!contains(eps))
      throw FamilyBoundsError(static_cast<double>(eps), "perturbation size outside the family bounds (" +
                                                            detail::short_number(eps_lower) + ", " +
                                                            detail::short_number(eps_upper) + ")");
    PredictableProcess<Scalar> g{eps * eta.values};
    NodeVector<Scalar> values = (Scalar(1) + eps * n_prime.array()).matrix();
    return make_numeraire(tree, std::move(g), std::move(values));
  }

  template <typename NewScalar>
  PerturbationFamily<NewScalar> cast() const {
    return {eta.template cast<NewScalar>(), n_prime.template cast<NewScalar>(), static_cast<NewScalar>(eps_lower),
            static_cast<NewScalar>(eps_upper)};
  }
};

template <typename Scalar>
PerturbationFamily<Scalar> build_family(const ScenarioTree<Scalar>& tree, const PredictableProcess<Scalar>& eta) {
  if (eta.dimension() != tree.asset_count())
    throw std::invalid_argument("perturbation generator must have one column per stock");
  PerturbationFamily<Scalar> f{eta, gains(tree, eta)};
  Scalar up_limit = std::numeric_limits<Scalar>::infinity();
  Scalar down_limit = std::numeric_limits<Scalar>::infinity();
  for (Index u = 0; u < tree.node_count(); ++u) {
    const Scalar np = f.n_prime[u];
    if (np < Scalar(0)) up_limit = std::min(up_limit, Scalar(1) / -np);
    if (np > Scalar(0)) down_limit = std::min(down_limit, Scalar(1) / np);
  }
  f.eps_upper = Scalar(kFamilySafetyFactor) * up_limit;
  f.eps_lower = -Scalar(kFamilySafetyFactor) * down_limit;
  return f;
}

namespace detail {

/// Least-squares slope of log(dev) against log|eps| over the points with dev > 0.
template <typename Scalar>
Scalar fitted_order(const std::vector<Scalar>& eps, const std::vector<Scalar>& dev) {
  std::vector<Scalar> x, y;
  for (std::size_t k = 0; k < eps.size(); ++k) {
    if (dev[k] > Scalar(0)) {
      x.push_back(std::log(std::abs(eps[k])));
      y.push_back(std::log(dev[k]));
    }
  }
  if (x.size() < 2) return std::numeric_limits<Scalar>::quiet_NaN();
  Scalar mx(0), my(0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= Scalar(x.size());
  my /= Scalar(x.size());
  Scalar sxy(0), sxx(0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  return sxy / sxx;
}

template <typename Scalar>
bool strictly_decreasing(const std::vector<Scalar>& dev) {
  for (std::size_t k = 1; k < dev.size(); ++k) {
    if (!(dev[k] < dev[k - 1]) && !(dev[k] == Scalar(0) && dev[k - 1] == Scalar(0))) return false;
  }
  return true;
}

template <typename Scalar>
Scalar inner_max_abs(const ScenarioTree<Scalar>& tree, const NodeMatrix<Scalar>& a, const NodeMatrix<Scalar>& b) {
  const Index inner = tree.level_begin(tree.horizon());
  if (inner == 0) return Scalar(0);
  return (a.topRows(inner) - b.topRows(inner)).cwiseAbs().maxCoeff();
}

/// E_{F_n}[x] seen as a terminal random variable.
template <typename Scalar>
NodeVector<Scalar> leaf_mean(const ScenarioTree<Scalar>& tree, const NodeVector<Scalar>& x, int n) {
  return broadcast(tree, cond_expect(tree, x, tree.horizon(), n), n);
}

/// E_{F_n}[(x - E_n x) k (y - E_n y)] at the time-n nodes; k = 1 when null.
template <typename Scalar>
NodeVector<Scalar> centred_moment(const ScenarioTree<Scalar>& tree, const NodeVector<Scalar>& x,
                                  const NodeVector<Scalar>& y, const NodeVector<Scalar>* kernel, int n) {
  const Index count = tree.leaf_count();
  const NodeVector<Scalar> mx = leaf_mean(tree, x, n);
  const NodeVector<Scalar> my = leaf_mean(tree, y, n);
  NodeVector<Scalar> z = NodeVector<Scalar>::Zero(tree.node_count());
  z.tail(count) = (x.tail(count) - mx.tail(count)).cwiseProduct(y.tail(count) - my.tail(count));
  if (kernel) z.tail(count) = z.tail(count).cwiseProduct(kernel->tail(count));
  return cond_expect(tree, z, tree.horizon(), n);
}

template <typename Scalar>
NodeVector<Scalar> leaf_product(const ScenarioTree<Scalar>& tree, const NodeVector<Scalar>& x,
                                 const NodeVector<Scalar>& y) {
  NodeVector<Scalar> z = NodeVector<Scalar>::Zero(tree.node_count());
  const Index count = tree.leaf_count();
  z.tail(count) = x.tail(count).cwiseProduct(y.tail(count));
  return z;
}

}  // namespace detail

template <typename Scalar>
struct StabilityReport {
  std::vector<Scalar> eps;
  std::vector<Scalar> xi_deviation;     ///< max |xi^eps - xi^0|
  std::vector<Scalar> price_deviation;  ///< max |dS^{N^eps} - dbar S|
  std::vector<Scalar> v0_deviation;     ///< |V0^eps - V0^0|
  std::vector<Scalar> l_deviation;      ///< max |L^eps - L^0|
  std::vector<Scalar> max_deviation;    ///< largest of the four at each eps
  Scalar fitted_order{};                ///< slope of log(max_deviation) against log|eps|
  Scalar xi_order{}, price_order{}, v0_order{}, l_order{};
  bool monotone = false;                ///< every family strictly decreasing along the grid
};

namespace detail {

template <typename Scalar>
void check_grid(const PerturbationFamily<Scalar>& family, const std::vector<Scalar>& grid, bool symmetric) {
  if (grid.empty()) throw InputError("perturbation grid is empty");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Scalar e = grid[k];
    if (!(e != Scalar(0)) || !std::isfinite(static_cast<double>(e)))
      throw FamilyBoundsError(static_cast<double>(e), "perturbation sizes must be finite and nonzero");
    if (!family.contains(e) || (symmetric && !family.contains(-e)))
      throw FamilyBoundsError(static_cast<double>(e), "perturbation size outside the family bounds (" +
                                                         short_number(family.eps_lower) + ", " +
                                                         short_number(family.eps_upper) + ")");
    if (k > 0 && !(std::abs(e) < std::abs(grid[k - 1])))
      throw FamilyBoundsError(static_cast<double>(e), "perturbation grid must be strictly decreasing in |eps|");
  }
}

template <typename Scalar>
Decomposition<Scalar> solve_member(const ScenarioTree<Scalar>& tree, const PerturbationFamily<Scalar>& family,
                                   const Claim<Scalar>& h, Scalar eps) {
  const NumeraireSpec<Scalar> spec = family.at(tree, eps);
  try {
    return fs_decompose(tree, spec, h);
  } catch (const NumericalError& e) {
    throw PerturbationFailure(static_cast<double>(eps), e.what());
  }
}

}  // namespace detail

/// Re-solves the decomposition along the grid and measures the distance to eps = 0.
template <typename Scalar>
StabilityReport<Scalar> stability_sweep(const ScenarioTree<Scalar>& tree, const PerturbationFamily<Scalar>& family,
                                        const Claim<Scalar>& h, const std::vector<Scalar>& grid) {
  detail::check_grid(family, grid, false);
  const Decomposition<Scalar> base = detail::solve_member(tree, family, h, Scalar(0));
  const NodeMatrix<Scalar> bar_inc = increments(tree, prices_with_bank(tree));

  StabilityReport<Scalar> r;
  r.eps = grid;
  for (Scalar e : grid) {
    const NumeraireSpec<Scalar> spec = family.at(tree, e);
    const Decomposition<Scalar> dec = detail::solve_member(tree, family, h, e);
    r.xi_deviation.push_back(detail::inner_max_abs(tree, dec.xi.values, base.xi.values));
    r.price_deviation.push_back((increments(tree, spec.denominated) - bar_inc).cwiseAbs().maxCoeff());
    r.v0_deviation.push_back(std::abs(dec.V0 - base.V0));
    r.l_deviation.push_back((dec.L - base.L).cwiseAbs().maxCoeff());
    r.max_deviation.push_back(std::max({r.xi_deviation.back(), r.price_deviation.back(), r.v0_deviation.back(),
                                        r.l_deviation.back()}));
  }
  r.fitted_order = detail::fitted_order(r.eps, r.max_deviation);
  r.xi_order = detail::fitted_order(r.eps, r.xi_deviation);
  r.price_order = detail::fitted_order(r.eps, r.price_deviation);
  r.v0_order = detail::fitted_order(r.eps, r.v0_deviation);
  r.l_order = detail::fitted_order(r.eps, r.l_deviation);
  r.monotone = detail::strictly_decreasing(r.xi_deviation) && detail::strictly_decreasing(r.price_deviation) &&
               detail::strictly_decreasing(r.v0_deviation) && detail::strictly_decreasing(r.l_deviation);
  return r;
}

/// First-order corrections at eps = 0 of the family N^eps = 1 + eps N'.
template <typename Scalar>
struct AsymptoticCorrections {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  CTildeVariant variant = CTildeVariant::kConditional;
  Decomposition<Scalar> base;              ///< eps = 0, i.e. N = 1
  NodeVector<Scalar> n_prime;              ///< N' at every node
  std::vector<NodeVector<Scalar>> j_prime; ///< [n], n < T: J'_n = -2 N'_T + 2 E_n[N'_T] on the leaves
  std::vector<Matrix> cov_prime;           ///< per non-terminal node, derivative of the covariance matrix
  PredictableProcess<Scalar> c_prime;      ///< derivative of the normal-equation right-hand side
  std::vector<NodeVector<Scalar>> a_prime; ///< [n]: A' = -sum_{k>n} xi'_k . dS_k on the leaves
  NodeVector<Scalar> lifted_gain;          ///< sum_k bar xi^0_k . d(bar S N')_k on the leaves
  PredictableProcess<Scalar> xi_prime;
  Scalar V0_prime{};
  NodeVector<Scalar> L_prime;
  Scalar coupling{};                       ///< E[L^0_T N'_T]
};

/// Closed-form eps-derivatives of xi, V0 and L, by a backward sweep over the base model.
///
/// With D_n(X, Y) = E_n[(X - E_n X) J'_n (Y - E_n Y)] - 2 E_n[N'_T] Cov_n(X, Y), the
/// derivative of the weighted form at eps = 0,
///   xi'_n = Cov_{n-1}(dS_n)^-1 (c'_n - D_{n-1}(dS_n, dS_n) xi^0_n),
///   c'_n  = D_{n-1}(tilde V^0_n, dS_n) + E_{n-1}[(A' - m)(dS_n - E_{n-1} dS_n)],
/// with A' = -sum_{k>n} xi'_k . dS_k and m its mean (conditional or unconditional, both give
/// the same value). Then with B = sum_k bar xi^0_k . d(bar S N')_k,
///   V0' = E[B - H N'_T - G_T(xi')] - E[L^0_T N'_T],
///   L'_n = E_n[B - H N'_T - G_T(xi')] - V0'.
/// The literal variant uses the symmetrised form -E[X J'(Y - EY)] - E[Y J'(X - EX)] -
/// 2 E[(X - EX) N'(Y - EY)], adds B over k > n to A', and drops the E[L^0 N'] term.
template <typename Scalar>
AsymptoticCorrections<Scalar> asymptotic_corrections(const ScenarioTree<Scalar>& tree,
                                                     const PerturbationFamily<Scalar>& family,
                                                     const Claim<Scalar>& h,
                                                     CTildeVariant variant = CTildeVariant::kConditional) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (variant == CTildeVariant::kAuto) throw std::invalid_argument("resolve the auto variant before calling");
  const bool literal = variant == CTildeVariant::kLiteral;
  const int T = tree.horizon();
  const Index d = tree.asset_count();
  const Index count = tree.leaf_count();
  const Index leaves = tree.level_begin(T);
  const NodeMatrix<Scalar> ds = price_increments(tree);

  AsymptoticCorrections<Scalar> out;
  out.variant = variant;
  out.base = classical_fs(tree, h);
  out.n_prime = family.n_prime;
  out.j_prime.assign(T, NodeVector<Scalar>());
  out.cov_prime.assign(tree.node_count(), Matrix());
  out.c_prime = PredictableProcess<Scalar>::zero(tree, d);
  out.a_prime.assign(T + 1, NodeVector<Scalar>());
  out.xi_prime = PredictableProcess<Scalar>::zero(tree, d);

  const NodeVector<Scalar>& np = out.n_prime;
  NodeMatrix<Scalar> sbar_np = prices_with_bank(tree);
  sbar_np.array().colwise() *= np.array();
  const PredictableProcess<Scalar>& lifted = out.base.lifted.position;

  NodeVector<Scalar> vt = NodeVector<Scalar>::Zero(tree.node_count());
  vt.tail(count) = h.payoff.tail(count);
  NodeVector<Scalar> a = NodeVector<Scalar>::Zero(tree.node_count());

  for (int n = T; n >= 1; --n) {
    out.a_prime[n] = a;
    const int m = n - 1;
    NodeVector<Scalar> jp = NodeVector<Scalar>::Zero(tree.node_count());
    const NodeVector<Scalar> mean_np = detail::leaf_mean(tree, np, m);
    jp.tail(count) = Scalar(-2) * np.tail(count) + Scalar(2) * mean_np.tail(count);
    out.j_prime[m] = jp;

    // Derivative of the weighted form at eps = 0, evaluated at the time-m nodes.
    auto derivative = [&](const NodeVector<Scalar>& x, const NodeVector<Scalar>& y) -> NodeVector<Scalar> {
      if (literal) {
        const NodeVector<Scalar> mx = detail::leaf_mean(tree, x, m);
        const NodeVector<Scalar> my = detail::leaf_mean(tree, y, m);
        NodeVector<Scalar> z = NodeVector<Scalar>::Zero(tree.node_count());
        z.tail(count) = -(x.tail(count).cwiseProduct(jp.tail(count)).cwiseProduct(y.tail(count) - my.tail(count))) -
                        y.tail(count).cwiseProduct(jp.tail(count)).cwiseProduct(x.tail(count) - mx.tail(count));
        return cond_expect(tree, z, T, m) - Scalar(2) * detail::centred_moment(tree, x, y, &np, m);
      }
      const NodeVector<Scalar> e_np = cond_expect(tree, np, T, m);
      return detail::centred_moment(tree, x, y, &jp, m) -
             Scalar(2) * e_np.cwiseProduct(detail::centred_moment<Scalar>(tree, x, y, nullptr, m));
    };

    std::vector<NodeVector<Scalar>> inc(d);
    for (Index i = 0; i < d; ++i) inc[i] = step_increment(tree, ds, n, i);

    NodeVector<Scalar> a_centred = a;
    if (variant == CTildeVariant::kConditional) {
      a_centred.tail(count) -= detail::leaf_mean(tree, a, m).tail(count);
    } else {
      a_centred.tail(count).array() -= rollback(tree, a)[0];
    }

    std::vector<NodeVector<Scalar>> cp(d * d), rhs(d);
    for (Index i = 0; i < d; ++i) {
      for (Index j = i; j < d; ++j) cp[i * d + j] = derivative(inc[i], inc[j]);
      const NodeVector<Scalar> inc_mean = detail::leaf_mean(tree, inc[i], m);
      NodeVector<Scalar> inc_centred = inc[i];
      inc_centred.tail(count) -= inc_mean.tail(count);
      rhs[i] = derivative(vt, inc[i]) + cond_expect(tree, detail::leaf_product(tree, a_centred, inc_centred), T, m);
    }

    for (Index u = tree.level_begin(m); u < tree.level_end(m); ++u) {
      Matrix cu(d, d);
      Vector bu(d);
      for (Index i = 0; i < d; ++i) {
        bu[i] = rhs[i][u];
        for (Index j = i; j < d; ++j) cu(i, j) = cu(j, i) = cp[i * d + j][u];
      }
      out.cov_prime[u] = cu;
      out.c_prime.at(u) = bu.transpose();
      const Vector xi0 = out.base.xi.at(u).transpose();
      out.xi_prime.at(u) = out.base.cov.matrices[u].ldlt().solve(bu - cu * xi0).transpose();
    }

    for (Index l = leaves; l < tree.node_count(); ++l) {
      const Index at_n = tree.ancestor(l, n);
      const Index p = tree.parent(at_n);
      vt[l] -= out.base.xi.at(p).dot(ds.row(at_n));
      a[l] -= out.xi_prime.at(p).dot(ds.row(at_n));
      if (literal) a[l] += lifted.at(p).dot(sbar_np.row(at_n) - sbar_np.row(p));
    }
  }
  out.a_prime[0] = a;

  out.lifted_gain = gains(tree, lifted, sbar_np);
  const NodeVector<Scalar> g_prime = gains(tree, out.xi_prime);
  NodeVector<Scalar> z = NodeVector<Scalar>::Zero(tree.node_count());
  z.tail(count) = out.lifted_gain.tail(count) - h.payoff.tail(count).cwiseProduct(np.tail(count)) -
                  g_prime.tail(count);
  const NodeVector<Scalar> mean_z = rollback(tree, z);
  out.coupling = rollback(tree, detail::leaf_product(tree, out.base.L, np))[0];
  if (literal) {
    out.V0_prime = mean_z[0];
    out.L_prime = (mean_z.array() - mean_z[0]).matrix();
  } else {
    out.V0_prime = mean_z[0] - out.coupling;
    out.L_prime = (mean_z.array() - out.V0_prime).matrix();
  }
  return out;
}

/// Agreement between the closed-form corrections and central differences of re-solves.
struct FdValidation {
  CTildeVariant variant = CTildeVariant::kConditional;
  std::vector<double> eps;
  std::vector<double> xi_deviation;
  std::vector<double> v0_deviation;
  std::vector<double> l_deviation;
  double xi_order = 0, v0_order = 0, l_order = 0;  ///< smallest order over consecutive eps pairs
  std::vector<double> floor;                       ///< roundoff floor at each eps
  bool xi_ok = false, v0_ok = false, l_ok = false;
  bool passed = false;
};

namespace detail {

inline double pairwise_order(const std::vector<double>& eps, const std::vector<double>& dev) {
  double order = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < eps.size(); ++k) {
    const double r = std::log(dev[k - 1] / dev[k]) / std::log(std::abs(eps[k - 1] / eps[k]));
    order = std::min(order, std::isnan(r) ? std::numeric_limits<double>::infinity() : r);
  }
  return order;
}

inline bool order_ok(const std::vector<double>& dev, double order, const std::vector<double>& floor) {
  bool below = true;
  for (std::size_t k = 0; k < dev.size(); ++k) below = below && dev[k] <= floor[k];
  if (below) return true;
  return dev.size() >= 2 && order >= kMinimumFdOrder;
}

}  // namespace detail

/// Compares the corrections with (q^eps - q^-eps) / (2 eps) for xi, V0 and L.
/// The re-solves run in extended precision so that the differences are not swamped
/// by cancellation at small eps.
inline FdValidation finite_difference_validate(const ScenarioTree<double>& tree,
                                               const PerturbationFamily<double>& family, const Claim<double>& h,
                                               const AsymptoticCorrections<double>& corr,
                                               const std::vector<double>& eps_list) {
  using Wide = long double;
  detail::check_grid(family, eps_list, true);
  const ScenarioTree<Wide> wt = tree.cast<Wide>();
  const PerturbationFamily<Wide> wf = family.cast<Wide>();
  const Claim<Wide> wh = h.cast<Wide>();
  const NodeMatrix<Wide> xi_p = corr.xi_prime.values.cast<Wide>();
  const NodeVector<Wide> l_p = corr.L_prime.cast<Wide>();

  FdValidation r;
  r.variant = corr.variant;
  r.eps = eps_list;
  for (double e : eps_list) {
    const Wide we = static_cast<Wide>(e);
    const Decomposition<Wide> plus = detail::solve_member(wt, wf, wh, we);
    const Decomposition<Wide> minus = detail::solve_member(wt, wf, wh, -we);
    const NodeMatrix<Wide> fd_xi = (plus.xi.values - minus.xi.values) / (Wide(2) * we);
    const NodeVector<Wide> fd_l = (plus.L - minus.L) / (Wide(2) * we);
    const Wide fd_v0 = (plus.V0 - minus.V0) / (Wide(2) * we);
    r.xi_deviation.push_back(static_cast<double>(detail::inner_max_abs(wt, fd_xi, xi_p)));
    r.v0_deviation.push_back(static_cast<double>(std::abs(fd_v0 - Wide(corr.V0_prime))));
    r.l_deviation.push_back(static_cast<double>((fd_l - l_p).cwiseAbs().maxCoeff()));
  }
  double scale = std::abs(corr.V0_prime);
  scale = std::max(scale, corr.L_prime.cwiseAbs().maxCoeff());
  const Index inner = tree.level_begin(tree.horizon());
  if (inner > 0) scale = std::max(scale, corr.xi_prime.values.topRows(inner).cwiseAbs().maxCoeff());
  const auto& b = corr.base;
  double size = std::max({std::abs(b.V0), b.L.cwiseAbs().maxCoeff(),
                          inner > 0 ? b.xi.values.topRows(inner).cwiseAbs().maxCoeff() : 0.0});
  const double unit = static_cast<double>(std::numeric_limits<Wide>::epsilon());
  const double rcond = std::max(b.diagnostics.min_rcond, std::numeric_limits<double>::min());
  for (double e : eps_list)
    r.floor.push_back(kFdFloor * (1.0 + scale) + kFdRoundoff * unit * (1.0 + size) / (rcond * std::abs(e)));
  r.xi_order = detail::pairwise_order(r.eps, r.xi_deviation);
  r.v0_order = detail::pairwise_order(r.eps, r.v0_deviation);
  r.l_order = detail::pairwise_order(r.eps, r.l_deviation);
  r.xi_ok = detail::order_ok(r.xi_deviation, r.xi_order, r.floor);
  r.v0_ok = detail::order_ok(r.v0_deviation, r.v0_order, r.floor);
  r.l_ok = detail::order_ok(r.l_deviation, r.l_order, r.floor);
  r.passed = r.xi_ok && r.v0_ok && r.l_ok;
  return r;
}

struct VariantAttempt {
  CTildeVariant variant;
  bool passed;
};

struct ValidatedCorrections {
  AsymptoticCorrections<double> corrections;
  FdValidation validation;
  bool trusted = false;
  std::vector<VariantAttempt> attempts;
};

/// Computes the corrections and validates them. With kAuto the conditional variant is
/// tried first, then the unconditional one; if neither passes the conditional result is
/// returned untrusted.
inline ValidatedCorrections validated_corrections(const ScenarioTree<double>& tree,
                                                  const PerturbationFamily<double>& family,
                                                  const Claim<double>& h, CTildeVariant variant,
                                                  const std::vector<double>& eps_list) {
  std::vector<CTildeVariant> order;
  if (variant == CTildeVariant::kAuto) {
    order = {CTildeVariant::kConditional, CTildeVariant::kUnconditional};
  } else {
    order = {variant};
  }
  std::optional<ValidatedCorrections> first;
  std::vector<VariantAttempt> attempts;
  for (CTildeVariant v : order) {
    ValidatedCorrections c{asymptotic_corrections(tree, family, h, v), {}, false, {}};
    c.validation = finite_difference_validate(tree, family, h, c.corrections, eps_list);
    c.trusted = c.validation.passed;
    attempts.push_back({v, c.trusted});
    if (c.trusted) {
      c.attempts = attempts;
      return c;
    }
    if (!first) first = std::move(c);
  }
  first->attempts = attempts;
  return std::move(*first);
}

}  // namespace fairhedge
