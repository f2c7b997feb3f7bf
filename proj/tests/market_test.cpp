#include <gtest/gtest.h>

#include "fairhedge.hpp"
#include "support/instances.hpp"

using namespace fairhedge;

namespace {

NodeVector<double> leaf_vector(const ScenarioTree<double>& t, std::vector<double> values) {
  NodeVector<double> v = NodeVector<double>::Zero(t.node_count());
  for (std::size_t k = 0; k < values.size(); ++k) v[t.level_begin(t.horizon()) + static_cast<Index>(k)] = values[k];
  return v;
}

NodeVector<double> random_leaves(const ScenarioTree<double>& t, testkit::InstanceGenerator& gen) {
  NodeVector<double> v = NodeVector<double>::Zero(t.node_count());
  for (Index l = t.level_begin(t.horizon()); l < t.node_count(); ++l) v[l] = gen.normal();
  return v;
}

}  // namespace

TEST(ScenarioTree, TrinomialLayout) {
  const Model m = fixtures::trinomial();
  const auto& t = m.tree;
  EXPECT_EQ(t.horizon(), 1);
  EXPECT_EQ(t.node_count(), 4);
  EXPECT_EQ(t.leaf_count(), 3);
  EXPECT_EQ(t.id(1), "up");
  EXPECT_EQ(t.leaf_begin(0), 1);
  EXPECT_EQ(t.leaf_end(0), 4);
  EXPECT_DOUBLE_EQ(t.path_prob(3), 1.0 / 3.0);
  EXPECT_EQ(*t.find("mid"), 2);
  EXPECT_FALSE(t.find("nowhere").has_value());
}

TEST(ScenarioTree, RejectsBadProbabilities) {
  std::vector<NodeSpec> nodes{{"r", 0, std::nullopt, 1.0, {1.0}},
                              {"a", 1, "r", 0.5, {2.0}},
                              {"b", 1, "r", 0.4, {0.5}}};
  try {
    ScenarioTree<double>::from_nodes(1, 1, nodes);
    FAIL() << "expected a probability error";
  } catch (const ModelError& e) {
    EXPECT_EQ(e.kind(), ModelError::Kind::kProbability);
    EXPECT_EQ(e.node(), "r");
  }
}

TEST(ScenarioTree, RejectsZeroProbabilityAndShortPaths) {
  std::vector<NodeSpec> zero{{"r", 0, std::nullopt, 1.0, {1.0}}, {"a", 1, "r", 1.0, {2.0}}, {"b", 1, "r", 0.0, {0.5}}};
  EXPECT_THROW(ScenarioTree<double>::from_nodes(1, 1, zero), ModelError);
  std::vector<NodeSpec> short_path{{"r", 0, std::nullopt, 1.0, {1.0}}, {"a", 1, "r", 1.0, {2.0}}};
  try {
    ScenarioTree<double>::from_nodes(2, 1, short_path);
    FAIL() << "expected a structure error";
  } catch (const ModelError& e) {
    EXPECT_EQ(e.kind(), ModelError::Kind::kStructure);
    EXPECT_EQ(e.node(), "a");
  }
  std::vector<NodeSpec> bad_price{{"r", 0, std::nullopt, 1.0, {1.0}}, {"a", 1, "r", 1.0, {-2.0}}};
  EXPECT_THROW(ScenarioTree<double>::from_nodes(1, 1, bad_price), ModelError);
}

TEST(ScenarioTree, CastKeepsStructure) {
  testkit::InstanceGenerator gen(7);
  const auto t = gen.tree(3, 2);
  const auto w = t.cast<long double>();
  EXPECT_EQ(w.node_count(), t.node_count());
  for (Index u = 0; u < t.node_count(); ++u) EXPECT_EQ(static_cast<double>(w.path_prob(u)), t.path_prob(u));
}

TEST(CondExpect, TrinomialExamples) {
  const Model m = fixtures::trinomial();
  const auto& t = m.tree;
  // E[N_1^-2] for N = 1 + dS / 2
  const NodeVector<double> x = leaf_vector(t, {1.0 / 4.0, 1.0, 4.0});
  EXPECT_NEAR(rollback(t, x)[0], 45.0 / 24.0, 1e-12);
  const NodeVector<double> c = leaf_vector(t, {2.5, 2.5, 2.5});
  EXPECT_NEAR(rollback(t, c)[0], 2.5, 1e-15);
  const NodeVector<double> ds = price_increments(t).col(0);
  EXPECT_NEAR(cond_expect(t, ds, 1, 0)[0], 0.0, 1e-15);
}

TEST(CondExpect, TowerAndLinearity) {
  testkit::InstanceGenerator gen(11);
  for (int rep = 0; rep < 25; ++rep) {
    const auto t = gen.tree(gen.integer(1, 4), gen.integer(1, 3));
    const int T = t.horizon();
    const NodeVector<double> x = random_leaves(t, gen);
    const NodeVector<double> y = random_leaves(t, gen);
    for (int m = 0; m <= T; ++m) {
      const NodeVector<double> inner = cond_expect(t, x, T, m);
      for (int n = 0; n <= m; ++n) {
        const NodeVector<double> two_step = cond_expect(t, inner, m, n);
        const NodeVector<double> direct = cond_expect(t, x, T, n);
        for (Index u = t.level_begin(n); u < t.level_end(n); ++u) EXPECT_NEAR(two_step[u], direct[u], 1e-12);
      }
    }
    const double a = gen.normal(), b = gen.normal();
    const NodeVector<double> lhs = rollback(t, (a * x + b * y).eval());
    const NodeVector<double> rhs = a * rollback(t, x) + b * rollback(t, y);
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(CondExpect, RejectsBadTimes) {
  const Model m = fixtures::trinomial();
  const NodeVector<double> x = NodeVector<double>::Zero(m.tree.node_count());
  EXPECT_THROW(cond_expect(m.tree, x, 2, 0), std::out_of_range);
  EXPECT_THROW(cond_expect(m.tree, x, 0, 1), std::out_of_range);
  EXPECT_THROW(cond_expect(m.tree, NodeVector<double>(NodeVector<double>::Zero(2)), 1, 0), std::invalid_argument);
}

TEST(Gains, TrinomialExamples) {
  const Model m = fixtures::trinomial();
  const auto& t = m.tree;
  const NodeVector<double> zero = gains(t, PredictableProcess<double>::zero(t, 1));
  EXPECT_EQ(zero.cwiseAbs().maxCoeff(), 0.0);
  const NodeVector<double> g = gains(t, PredictableProcess<double>::constant(t, Eigen::VectorXd::Constant(1, 1.0 / 3.0)));
  EXPECT_NEAR(g[1], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(g[2], 0.0, 1e-15);
  EXPECT_NEAR(g[3], -1.0 / 3.0, 1e-15);
  const NodeVector<double> unit = gains(t, PredictableProcess<double>::constant(t, Eigen::VectorXd::Ones(1)));
  EXPECT_EQ(unit[1], 2.0);
  EXPECT_EQ(unit[3], -1.0);
}

TEST(Doob, TrinomialAndShifted) {
  const Model m = fixtures::trinomial();
  const auto doob = doob_decompose(m.tree);
  EXPECT_NEAR(doob.drift(0, 0), 0.0, 1e-15);
  EXPECT_LE((doob.martingale - m.tree.prices()).cwiseAbs().maxCoeff(), 1e-15);

  std::vector<NodeSpec> nodes = m.tree.node_specs();
  for (std::size_t k = 1; k < nodes.size(); ++k) nodes[k].cond_prob = 1.0 / 3.0;
  nodes[3].cond_prob = 1.0 - 2.0 / 3.0;
  const auto shifted = ScenarioTree<double>::from_nodes(1, 1, nodes);
  const auto d2 = doob_decompose(shifted);
  EXPECT_NEAR(d2.drift(0, 0), 1.0 / 3.0, 1e-15);
}

TEST(Doob, DeterministicPath) {
  std::vector<NodeSpec> nodes{{"r", 0, std::nullopt, 1.0, {1.0}}, {"a", 1, "r", 1.0, {1.5}}, {"b", 2, "a", 1.0, {1.2}}};
  const auto t = ScenarioTree<double>::from_nodes(2, 1, nodes);
  const auto doob = doob_decompose(t);
  for (Index u = 0; u < t.node_count(); ++u) EXPECT_NEAR(doob.martingale(u, 0), 1.0, 1e-15);
  EXPECT_NEAR(doob.compensator(2, 0), 0.2, 1e-15);
}

TEST(Doob, MartingaleIncrementsAreCentred) {
  testkit::InstanceGenerator gen(3);
  for (int rep = 0; rep < 20; ++rep) {
    const auto t = gen.random_tree();
    const auto doob = doob_decompose(t);
    const NodeMatrix<double> dm = increments(t, doob.martingale);
    for (Index u = 0; u < t.level_begin(t.horizon()); ++u) {
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(t.asset_count());
      for (Index c = t.first_child(u); c < t.first_child(u) + t.child_count(u); ++c) acc += t.cond_prob(c) * dm.row(c);
      EXPECT_LE(acc.cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(WeightedBilinear, TrinomialHalfShare) {
  const Model m = fixtures::trinomial();
  const auto& t = m.tree;
  const NodeVector<double> n = leaf_vector(t, {2.0, 1.0, 0.5});
  const NodeVector<double> ds = step_increment(t, price_increments(t), 1, 0);
  EXPECT_NEAR(weighted_bilinear(t, n, ds, ds, 0)[0], 2.0 / 3.0, 1e-12);
  const NodeVector<double> c = leaf_vector(t, {3.0, 3.0, 3.0});
  EXPECT_NEAR(weighted_bilinear(t, n, ds, c, 0)[0], 0.0, 1e-14);
  NodeVector<double> bad = n;
  bad[2] = 0.0;
  EXPECT_THROW(weighted_bilinear(t, bad, ds, ds, 0), NonPositiveNumeraire);
}

TEST(WeightedBilinear, UnitNumeraireIsCovariance) {
  testkit::InstanceGenerator gen(5);
  for (int rep = 0; rep < 20; ++rep) {
    const auto t = gen.random_tree();
    const NodeVector<double> one = NodeVector<double>::Ones(t.node_count());
    const NodeVector<double> x = random_leaves(t, gen), y = random_leaves(t, gen);
    for (int n = 0; n < t.horizon(); ++n) {
      const auto a = weighted_bilinear(t, one, x, y, n);
      const auto b = conditional_covariance(t, x, y, n);
      EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(WeightedBilinear, ShiftInvarianceAndSymmetry) {
  testkit::InstanceGenerator gen(13);
  for (int rep = 0; rep < 30; ++rep) {
    const auto t = gen.random_tree();
    const auto spec = build_numeraire(t, gen.generator(t));
    const NodeVector<double> x = random_leaves(t, gen), y = random_leaves(t, gen);
    for (int n = 0; n < t.horizon(); ++n) {
      NodeVector<double> shift = NodeVector<double>::Zero(t.node_count());
      for (Index u = t.level_begin(n); u < t.level_end(n); ++u) shift[u] = 5.0 * gen.normal();
      const NodeVector<double> shifted = x + broadcast(t, shift, n);
      const auto a = weighted_bilinear(t, spec.values, x, y, n);
      const auto b = weighted_bilinear(t, spec.values, shifted, y, n);
      const auto c = weighted_bilinear(t, spec.values, y, x, n);
      EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_LE((a - c).cwiseAbs().maxCoeff(), 1e-13);
    }
  }
}

TEST(WeightedBilinear, IntermediateTimeOverload) {
  testkit::InstanceGenerator gen(17);
  const auto t = gen.tree(3, 1);
  const auto spec = build_numeraire(t, gen.generator(t));
  NodeVector<double> x = NodeVector<double>::Zero(t.node_count());
  for (Index u = t.level_begin(2); u < t.level_end(2); ++u) x[u] = gen.normal();
  const auto a = weighted_bilinear(t, spec.values, x, x, 2, 0);
  const auto b = weighted_bilinear(t, spec.values, broadcast(t, x, 2), broadcast(t, x, 2), 0);
  EXPECT_EQ(a[0], b[0]);
  EXPECT_THROW(weighted_bilinear(t, spec.values, x, x, 0, 0), std::out_of_range);
}
