#include <gtest/gtest.h>

#include "fairhedge.hpp"
#include "support/instances.hpp"

using namespace fairhedge;

namespace {

PredictableProcess<double> half_share(const ScenarioTree<double>& t) { return *builtin_generator(t, "half-share"); }

}  // namespace

TEST(FsDecompose, TrinomialUnitNumeraire) {
  const Model m = fixtures::trinomial();
  const auto d = fs_decompose(m.tree, bank_numeraire(m.tree), m.claim);
  EXPECT_NEAR(d.xi.at(0)(0), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(d.V0, 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(d.lifted.position.values(0, 0), -0.5, 1e-12);
}

TEST(FsDecompose, TrinomialHalfShare) {
  const Model m = fixtures::trinomial();
  const auto d = fs_decompose(m.tree, build_numeraire(m.tree, half_share(m.tree)), m.claim);
  // C(dS, dS) = 2/3 and C(H, dS) = 1/9 under N = 1 + dS / 2.
  EXPECT_NEAR(d.c.at(0)(0), 1.0 / 9.0, 1e-12);
  EXPECT_NEAR(d.cov.matrices[0](0, 0), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(d.xi.at(0)(0), 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(d.V0, 2.0 / 15.0, 1e-12);
  EXPECT_NEAR(d.V[1], 0.5, 1e-15);
  EXPECT_NEAR(d.cov.inverses[0](0, 0) * d.cov.matrices[0](0, 0), 1.0, 1e-12);
}

TEST(FsDecompose, ReplicableBinomial) {
  const Model m = fixtures::binomial();
  const auto d = fs_decompose(m.tree, bank_numeraire(m.tree), m.claim);
  EXPECT_NEAR(d.xi.at(0)(0), 1.0, 1e-12);
  EXPECT_NEAR(d.V0, 2.0, 1e-12);
  EXPECT_LE(d.L.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ClassicalFs, Examples) {
  const Model m = fixtures::trinomial();
  const auto d = classical_fs(m.tree, m.claim);
  EXPECT_NEAR(d.xi.at(0)(0), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(d.V0, 1.0 / 6.0, 1e-12);

  const Claim<double> constant = Claim<double>::from_leaves(m.tree, [](Index) { return 1.25; });
  const auto c = classical_fs(m.tree, constant);
  EXPECT_NEAR(c.xi.at(0)(0), 0.0, 1e-15);
  EXPECT_NEAR(c.V0, 1.25, 1e-15);
  EXPECT_LE(c.L.cwiseAbs().maxCoeff(), 1e-15);

  const Claim<double> incr = Claim<double>::from_leaves(m.tree, [&](Index l) { return m.tree.prices()(l, 0) - 2.0; });
  const auto s = classical_fs(m.tree, incr);
  EXPECT_NEAR(s.xi.at(0)(0), 1.0, 1e-12);
  EXPECT_NEAR(s.V0, 0.0, 1e-12);
  EXPECT_LE(s.L.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ClassicalFs, MatchesWeightedRouteWithUnitNumeraire) {
  testkit::InstanceGenerator gen(31);
  for (int rep = 0; rep < 50; ++rep) {
    const auto t = gen.random_tree();
    const auto h = gen.claim(t);
    const auto a = classical_fs(t, h);
    const auto b = fs_decompose(t, bank_numeraire(t), h);
    // Two different eliminations: agreement up to roundoff times conditioning.
    const double size = std::max(h.payoff.cwiseAbs().maxCoeff(), a.xi.values.cwiseAbs().maxCoeff());
    const double tol = 1e-13 * (1.0 + size) / a.diagnostics.min_rcond;
    EXPECT_NEAR(a.V0, b.V0, tol);
    EXPECT_LE((a.xi.values - b.xi.values).cwiseAbs().maxCoeff(), tol);
    EXPECT_LE((a.L - b.L).cwiseAbs().maxCoeff(), tol);
  }
}

TEST(ClassicalFs, ZeroVariance) {
  std::vector<NodeSpec> nodes{{"r", 0, std::nullopt, 1.0, {2.0}}, {"a", 1, "r", 0.5, {3.0}}, {"b", 1, "r", 0.5, {3.0}}};
  const auto t = ScenarioTree<double>::from_nodes(1, 1, nodes);
  const Claim<double> h = Claim<double>::from_leaves(t, [](Index l) { return static_cast<double>(l); });
  try {
    classical_fs(t, h);
    FAIL() << "expected ZeroConditionalVariance";
  } catch (const ZeroConditionalVariance& e) {
    EXPECT_EQ(e.node(), "r");
  }
  EXPECT_THROW(fs_decompose(t, bank_numeraire(t), h), SingularCovariance);
}

TEST(FsDecompose, RedundantAssets) {
  const Model m = fixtures::redundant();
  try {
    fs_decompose(m.tree, bank_numeraire(m.tree), m.claim);
    FAIL() << "expected SingularCovariance";
  } catch (const SingularCovariance& e) {
    EXPECT_EQ(e.node(), "root");
    EXPECT_LT(e.rcond(), kSingularRcond);
  }
}

TEST(FsDecompose, InvariantsOnRandomInstances) {
  testkit::InstanceGenerator gen(37);
  for (int rep = 0; rep < 60; ++rep) {
    const auto t = gen.random_tree();
    const auto h = gen.claim(t);
    const auto spec = build_numeraire(t, gen.generator(t));
    const auto d = fs_decompose(t, spec, h);
    const auto& g = d.diagnostics;
    EXPECT_LE(g.identity_residual, 1e-10);
    EXPECT_LE(g.martingale_residual, 1e-10);
    EXPECT_LE(g.price_foc_residual, 1e-10);
    EXPECT_LE(g.strategy_foc_residual, 1e-10);
    EXPECT_LE(std::abs(g.weighted_residual_mean), 1e-10);
    for (Index u = 0; u < t.level_begin(t.horizon()); ++u) {
      const Eigen::MatrixXd& c = d.cov.matrices[u];
      EXPECT_LE((c - c.transpose()).cwiseAbs().maxCoeff(), 1e-12);
      const Eigen::MatrixXd id = c * d.cov.inverses[u];
      EXPECT_LE((id - Eigen::MatrixXd::Identity(c.rows(), c.cols())).cwiseAbs().maxCoeff(), 1e-14 / d.cov.rcond[u]);
    }
  }
}

TEST(FsDecompose, OrthogonalityWithUnitNumeraire) {
  testkit::InstanceGenerator gen(41);
  for (int rep = 0; rep < 40; ++rep) {
    const auto t = gen.random_tree();
    const auto d = fs_decompose(t, bank_numeraire(t), gen.claim(t));
    EXPECT_LE(d.diagnostics.orthogonality, 1e-10);
    EXPECT_LE(std::abs(d.L[0]), 1e-10);
  }
}

TEST(FsDecompose, MartingaleStockGivesMartingaleRepresentation) {
  // Trinomial has E[dS] = 0: the martingale part is S itself.
  const Model m = fixtures::trinomial();
  const auto d = fs_decompose(m.tree, bank_numeraire(m.tree), m.claim);
  const NodeMatrix<double> ds = price_increments(m.tree);
  double acc = 0;
  for (Index c = 1; c < 4; ++c) acc += m.tree.cond_prob(c) * (d.L[c] - d.L[0]) * ds(c, 0);
  EXPECT_NEAR(acc, 0.0, 1e-12);
}

TEST(FsDecompose, EarlyDecidedClaim) {
  // H depends only on the first step, so the second-step positions vanish.
  testkit::InstanceGenerator gen(43);
  const auto t = gen.tree(2, 1);
  const Claim<double> h = Claim<double>::from_leaves(t, [&](Index l) { return t.prices()(t.ancestor(l, 1), 0); });
  const auto d = fs_decompose(t, bank_numeraire(t), h);
  for (Index u = t.level_begin(1); u < t.level_end(1); ++u) EXPECT_NEAR(d.xi.at(u)(0), 0.0, 1e-12);
}

TEST(InterestRate, Examples) {
  const Model m = fixtures::trinomial();
  const auto zero = interest_rate_fair_price(m.tree, m.claim, 0.0);
  const auto base = classical_fs(m.tree, m.claim);
  EXPECT_NEAR(zero.V0, base.V0, 1e-15);
  EXPECT_EQ(zero.xi.at(0)(0), base.xi.at(0)(0));

  const auto r = interest_rate_fair_price(m.tree, m.claim, 0.1);
  EXPECT_EQ(r.xi.at(0)(0), base.xi.at(0)(0));
  EXPECT_NEAR(r.V0, (1.0 / 6.0) / 1.1 - (1.0 / 3.0) * (2.0 / 1.1 - 2.0), 1e-12);
  const auto half = fs_decompose(m.tree, build_numeraire(m.tree, half_share(m.tree)), m.claim);
  EXPECT_GT(std::abs(r.V0 - half.V0), 1e-3);

  EXPECT_THROW(interest_rate_fair_price(fixtures::two_period().tree, fixtures::two_period().claim, 0.1), HorizonNotOne);
  EXPECT_THROW(interest_rate_fair_price(m.tree, m.claim, -0.5), InputError);
}
