#include <cmath>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "fairhedge.hpp"
#include "fairhedge/cli.hpp"
#include "fairhedge/io.hpp"
#include "report.hpp"

namespace fairhedge::cli {
namespace {

using json = nlohmann::ordered_json;

/// Tolerance for declaring a published value reproduced.
constexpr double kReferenceTolerance = 1e-9;
/// Oracle agreement thresholds.
constexpr double kOracleDeviation = 1e-8;

struct Options {
  std::string command;
  std::vector<std::string> argv;
  std::string model_path;
  std::string numeraire;
  std::string eps;
  std::optional<double> rate;
  std::string format = "table";
  std::string variant = "auto";
  std::string example_name;
};

struct Loaded {
  Model model;
  std::string digest;
  std::string numeraire_name;
  PredictableProcess<double> eta;
};

std::vector<double> parse_eps(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw InputError("bad --eps value \"" + item + "\"");
    }
    if (used != item.size()) throw InputError("bad --eps value \"" + item + "\"");
    out.push_back(v);
  }
  if (out.empty()) throw InputError("--eps needs at least one value");
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Loaded load(const Options& opt) {
  Loaded l{io::load_model(opt.model_path), "", "", {}};
  l.digest = io::model_digest(l.model);
  if (opt.numeraire.empty()) {
    if (l.model.generator) {
      l.numeraire_name = "model";
      l.eta = *l.model.generator;
    } else {
      l.numeraire_name = "bank";
      l.eta = *builtin_generator(l.model.tree, "bank");
    }
  } else if (auto b = builtin_generator(l.model.tree, opt.numeraire)) {
    l.numeraire_name = opt.numeraire;
    l.eta = *b;
  } else {
    std::ifstream probe(opt.numeraire);
    if (!probe) throw InputError("--numeraire " + opt.numeraire + " is neither a builtin name nor a readable file");
    l.numeraire_name = opt.numeraire;
    l.eta = io::parse_generator(l.model.tree, read_file(opt.numeraire));
  }
  return l;
}

json node_values(const ScenarioTree<double>& tree, const NodeVector<double>& v, Index begin, Index end) {
  json out = json::object();
  for (Index u = begin; u < end; ++u) out[tree.id(u)] = v[u];
  return out;
}

std::vector<double> row(const PredictableProcess<double>& p, Index u) {
  std::vector<double> r(p.dimension());
  for (Index i = 0; i < p.dimension(); ++i) r[i] = p.values(u, i);
  return r;
}

json strategy_json(const ScenarioTree<double>& tree, const PredictableProcess<double>& p) {
  json out = json::object();
  for (Index u = 0; u < tree.level_begin(tree.horizon()); ++u) out[tree.id(u)] = row(p, u);
  return out;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(m.cols());
    for (Index j = 0; j < m.cols(); ++j) r[j] = m(i, j);
    out.push_back(r);
  }
  return out;
}

Report start(const Options& opt, const Loaded& l) {
  Report r;
  r.machine["command"] = opt.command;
  r.machine["argv"] = opt.argv;
  r.machine["inputs"] = {{"model", opt.model_path}, {"digest", l.digest}, {"numeraire", l.numeraire_name}};
  r.header.push_back("fairhedge " + opt.command);
  r.header.push_back("  model      " + opt.model_path + "  (digest " + l.digest + ")");
  r.header.push_back("  numeraire  " + l.numeraire_name);
  return r;
}

std::string yes_no(bool b) { return b ? "yes" : "no"; }

int cmd_validate(const Options& opt, Report& report) {
  const Loaded l = load(opt);
  report = start(opt, l);
  const ScenarioTree<double>& tree = l.model.tree;
  const NumeraireSpec<double> spec = build_numeraire(tree, l.eta);
  const Index leaves = tree.level_begin(tree.horizon());
  json out;
  out["valid"] = true;
  out["horizon"] = tree.horizon();
  out["assets"] = tree.asset_count();
  out["nodes"] = tree.node_count();
  out["leaves"] = tree.leaf_count();
  out["numeraire_min"] = spec.values.minCoeff();
  out["payoff_min"] = l.model.claim.payoff.tail(tree.leaf_count()).minCoeff();
  out["payoff_max"] = l.model.claim.payoff.tail(tree.leaf_count()).maxCoeff();
  out["has_rate"] = l.model.rate.has_value();
  out["references"] = l.model.references.size();
  report.machine["outputs"] = out;
  report.tables.push_back({"model",
                           {"field", "value"},
                           {{"horizon", std::to_string(tree.horizon())},
                            {"assets", std::to_string(tree.asset_count())},
                            {"nodes", std::to_string(tree.node_count())},
                            {"non-terminal nodes", std::to_string(leaves)},
                            {"leaves", std::to_string(tree.leaf_count())},
                            {"min numeraire", fmt6(spec.values.minCoeff())}}});
  report.notes.push_back("model is valid");
  return kOk;
}

void add_references(const Loaded& l, const Decomposition<double>& dec, Report& report) {
  const ScenarioTree<double>& tree = l.model.tree;
  json refs = json::array();
  Table t{"published values", {"quantity", "reported", "computed", "match"}, {}};
  for (const Reference& ref : l.model.references) {
    if (ref.numeraire != l.numeraire_name) continue;
    json j;
    j["numeraire"] = ref.numeraire;
    j["tolerance"] = kReferenceTolerance;
    if (ref.fair_price) {
      const bool match = std::abs(*ref.fair_price - dec.V0) <= kReferenceTolerance;
      j["fair_price"] = {{"reported", *ref.fair_price}, {"computed", dec.V0}, {"match", match}};
      t.rows.push_back({"V0", fmt6(*ref.fair_price), fmt6(dec.V0), match ? "match" : "MISMATCH"});
    }
    json st = json::object();
    for (const auto& [id, pos] : ref.strategy) {
      const auto u = tree.find(id);
      const std::vector<double> computed = row(dec.xi, *u);
      bool match = pos.size() == computed.size();
      for (std::size_t i = 0; match && i < pos.size(); ++i)
        match = std::abs(pos[i] - computed[i]) <= kReferenceTolerance;
      st[id] = {{"reported", pos}, {"computed", computed}, {"match", match}};
      t.rows.push_back({"xi at " + id, fmt_vector(pos), fmt_vector(computed), match ? "match" : "MISMATCH"});
    }
    j["strategy"] = st;
    if (!ref.note.empty()) j["note"] = ref.note;
    refs.push_back(j);
  }
  if (!refs.empty()) {
    report.machine["outputs"]["references"] = refs;
    report.tables.push_back(t);
  }
}

int cmd_hedge(const Options& opt, Report& report) {
  const Loaded l = load(opt);
  report = start(opt, l);
  const ScenarioTree<double>& tree = l.model.tree;
  const NumeraireSpec<double> spec = build_numeraire(tree, l.eta);
  const Decomposition<double> dec = fs_decompose(tree, spec, l.model.claim);
  const Index inner = tree.level_begin(tree.horizon());
  const auto& dg = dec.diagnostics;

  json out;
  out["fair_price"] = dec.V0;
  out["strategy"] = strategy_json(tree, dec.xi);
  json bank = json::object();
  for (Index u = 0; u < inner; ++u) bank[tree.id(u)] = dec.lifted.position.values(u, 0);
  out["bank_position"] = bank;
  out["numeraire_values"] = node_values(tree, spec.values, 0, tree.node_count());
  out["conditional_price"] = node_values(tree, dec.V, 0, tree.node_count());
  out["residual"] = node_values(tree, dec.L, 0, tree.node_count());
  out["diagnostics"] = {{"identity_residual", dg.identity_residual},
                        {"martingale_residual", dg.martingale_residual},
                        {"price_foc_residual", dg.price_foc_residual},
                        {"strategy_foc_residual", dg.strategy_foc_residual},
                        {"weighted_residual_mean", dg.weighted_residual_mean},
                        {"residual_mean", dg.residual_mean},
                        {"orthogonality", dg.orthogonality},
                        {"objective", dg.objective},
                        {"min_rcond", dg.min_rcond}};
  report.machine["outputs"] = out;

  Table summary{"fair price", {"quantity", "value"}, {{"V0", fmt6(dec.V0)}, {"objective E[L_T^2]", fmt6(dg.objective)}}};
  report.tables.push_back(summary);
  Table strat{"strategy", {"node", "time", "bank", "stocks"}, {}};
  for (Index u = 0; u < inner; ++u) {
    strat.rows.push_back({tree.id(u), std::to_string(tree.time(u)), fmt6(dec.lifted.position.values(u, 0)),
                          fmt_vector(row(dec.xi, u))});
  }
  report.tables.push_back(strat);
  Table proc{"processes", {"node", "time", "N", "V", "L"}, {}};
  for (Index u = 0; u < tree.node_count(); ++u) {
    proc.rows.push_back({tree.id(u), std::to_string(tree.time(u)), fmt6(spec.values[u]), fmt6(dec.V[u]), fmt6(dec.L[u])});
  }
  report.tables.push_back(proc);
  report.tables.push_back({"diagnostics",
                           {"check", "value"},
                           {{"identity residual", fmt6(dg.identity_residual)},
                            {"martingale residual", fmt6(dg.martingale_residual)},
                            {"price FOC residual", fmt6(dg.price_foc_residual)},
                            {"strategy FOC residual", fmt6(dg.strategy_foc_residual)},
                            {"E[L_T / N_T]", fmt6(dg.weighted_residual_mean)},
                            {"E[L_T]", fmt6(dg.residual_mean)},
                            {"orthogonality", fmt6(dg.orthogonality)},
                            {"min rcond", fmt6(dg.min_rcond)}}});
  add_references(l, dec, report);

  const std::optional<double> rate = opt.rate ? opt.rate : l.model.rate;
  if (rate) {
    const RateAdjustedPrice<double> rp = interest_rate_fair_price(tree, l.model.claim, *rate);
    report.machine["outputs"]["interest_rate"] = {
        {"rate", *rate}, {"fair_price", rp.V0}, {"strategy", strategy_json(tree, rp.xi)}};
    report.tables.push_back({"constant interest rate, unit numeraire strategy",
                             {"quantity", "value"},
                             {{"rate", fmt6(*rate)}, {"V0", fmt6(rp.V0)}, {"xi", fmt_vector(row(rp.xi, 0))}}});
  }
  return kOk;
}

int cmd_oracle(const Options& opt, Report& report) {
  const Loaded l = load(opt);
  report = start(opt, l);
  const ScenarioTree<double>& tree = l.model.tree;
  const NumeraireSpec<double> spec = build_numeraire(tree, l.eta);
  const OracleSolution<double> sol = solve_global(tree, spec, l.model.claim);
  const Decomposition<double> dec = fs_decompose(tree, spec, l.model.claim);
  const OracleComparison<double> cmp = compare(tree, sol, dec);
  const bool agrees = cmp.max_deviation <= kOracleDeviation && !cmp.recursion_exceeds;

  json out;
  out["oracle"] = {{"fair_price", sol.V0},
                   {"strategy", strategy_json(tree, sol.xi)},
                   {"rss", sol.rss},
                   {"replicable", sol.replicable},
                   {"normal_residual", sol.normal_residual}};
  out["recursion"] = {{"fair_price", dec.V0}, {"strategy", strategy_json(tree, dec.xi)}};
  out["comparison"] = {{"v0_deviation", cmp.v0_deviation},
                       {"xi_deviation", cmp.xi_deviation},
                       {"max_deviation", cmp.max_deviation},
                       {"oracle_objective", cmp.oracle_objective},
                       {"recursion_objective", cmp.recursion_objective},
                       {"recursion_exceeds", cmp.recursion_exceeds},
                       {"tolerance", kOracleDeviation},
                       {"agrees", agrees}};
  report.machine["outputs"] = out;

  Table t{"global least squares against backward recursion", {"node", "oracle", "recursion"}, {}};
  t.rows.push_back({"V0", fmt6(sol.V0), fmt6(dec.V0)});
  for (Index u = 0; u < tree.level_begin(tree.horizon()); ++u)
    t.rows.push_back({"xi at " + tree.id(u), fmt_vector(row(sol.xi, u)), fmt_vector(row(dec.xi, u))});
  t.rows.push_back({"objective", fmt6(cmp.oracle_objective), fmt6(cmp.recursion_objective)});
  report.tables.push_back(t);
  report.notes.push_back("max deviation " + fmt6(cmp.max_deviation) + ", rss " + fmt6(sol.rss) +
                         (sol.replicable ? " (replicable)" : ""));
  report.notes.push_back(agrees ? "recursion agrees with the oracle" : "recursion DISAGREES with the oracle");
  return agrees ? kOk : kValidationFailure;
}

int cmd_perturb(const Options& opt, Report& report) {
  const Loaded l = load(opt);
  report = start(opt, l);
  const ScenarioTree<double>& tree = l.model.tree;
  const std::vector<double> grid = parse_eps(opt.eps.empty() ? "1e-1,1e-2,1e-3,1e-4" : opt.eps);
  const PerturbationFamily<double> family = build_family(tree, l.eta);
  const StabilityReport<double> s = stability_sweep(tree, family, l.model.claim, grid);

  json out;
  out["family"] = {{"eps_lower", family.eps_lower}, {"eps_upper", family.eps_upper}};
  out["eps"] = s.eps;
  out["xi_deviation"] = s.xi_deviation;
  out["price_increment_deviation"] = s.price_deviation;
  out["v0_deviation"] = s.v0_deviation;
  out["l_deviation"] = s.l_deviation;
  out["max_deviation"] = s.max_deviation;
  out["fitted_order"] = s.fitted_order;
  out["orders"] = {{"xi", s.xi_order}, {"price_increment", s.price_order}, {"v0", s.v0_order}, {"l", s.l_order}};
  out["monotone"] = s.monotone;
  report.machine["outputs"] = out;

  Table t{"deviation from eps = 0", {"eps", "xi", "dS^N", "V0", "L"}, {}};
  for (std::size_t k = 0; k < s.eps.size(); ++k) {
    t.rows.push_back({fmt6(s.eps[k]), fmt6(s.xi_deviation[k]), fmt6(s.price_deviation[k]), fmt6(s.v0_deviation[k]),
                      fmt6(s.l_deviation[k])});
  }
  report.tables.push_back(t);
  report.notes.push_back("family bounds (" + fmt6(family.eps_lower) + ", " + fmt6(family.eps_upper) + ")");
  report.notes.push_back("fitted order " + fmt6(s.fitted_order) + ", monotone " + yes_no(s.monotone));
  return kOk;
}

int cmd_asymptotics(const Options& opt, Report& report) {
  const Loaded l = load(opt);
  report = start(opt, l);
  const ScenarioTree<double>& tree = l.model.tree;
  const auto variant = parse_variant(opt.variant);
  if (!variant) throw InputError("unknown --ctilde-variant " + opt.variant);
  const std::vector<double> eps = parse_eps(opt.eps.empty() ? "1e-3,1e-4" : opt.eps);
  const PerturbationFamily<double> family = build_family(tree, l.eta);
  const ValidatedCorrections vc = validated_corrections(tree, family, l.model.claim, *variant, eps);
  const AsymptoticCorrections<double>& c = vc.corrections;
  const FdValidation& v = vc.validation;
  const Index inner = tree.level_begin(tree.horizon());

  json out;
  out["variant"] = {{"requested", opt.variant}, {"selected", to_string(c.variant)}};
  json attempts = json::array();
  for (const auto& a : vc.attempts) attempts.push_back({{"variant", to_string(a.variant)}, {"passed", a.passed}});
  out["variant"]["attempts"] = attempts;
  out["trusted"] = vc.trusted;
  out["base"] = {{"fair_price", c.base.V0}, {"strategy", strategy_json(tree, c.base.xi)}};
  out["xi_prime"] = strategy_json(tree, c.xi_prime);
  out["V0_prime"] = c.V0_prime;
  out["L_prime"] = node_values(tree, c.L_prime, 0, tree.node_count());
  out["coupling"] = c.coupling;
  out["n_prime"] = node_values(tree, c.n_prime, 0, tree.node_count());
  json cov = json::object(), cp = json::object();
  for (Index u = 0; u < inner; ++u) {
    cov[tree.id(u)] = matrix_json(c.cov_prime[u]);
    cp[tree.id(u)] = row(c.c_prime, u);
  }
  out["cov_prime"] = cov;
  out["c_prime"] = cp;
  out["validation"] = {{"eps", v.eps},
                       {"xi_deviation", v.xi_deviation},
                       {"v0_deviation", v.v0_deviation},
                       {"l_deviation", v.l_deviation},
                       {"xi_order", v.xi_order},
                       {"v0_order", v.v0_order},
                       {"l_order", v.l_order},
                       {"floor", v.floor},
                       {"passed", v.passed}};
  report.machine["outputs"] = out;

  Table t{"first-order corrections", {"quantity", "base", "derivative"}, {}};
  t.rows.push_back({"V0", fmt6(c.base.V0), fmt6(c.V0_prime)});
  for (Index u = 0; u < inner; ++u)
    t.rows.push_back({"xi at " + tree.id(u), fmt_vector(row(c.base.xi, u)), fmt_vector(row(c.xi_prime, u))});
  for (Index u = 0; u < tree.node_count(); ++u)
    t.rows.push_back({"L at " + tree.id(u), fmt6(c.base.L[u]), fmt6(c.L_prime[u])});
  report.tables.push_back(t);
  Table fd{"central differences", {"eps", "xi", "V0", "L"}, {}};
  for (std::size_t k = 0; k < v.eps.size(); ++k)
    fd.rows.push_back({fmt6(v.eps[k]), fmt6(v.xi_deviation[k]), fmt6(v.v0_deviation[k]), fmt6(v.l_deviation[k])});
  fd.rows.push_back({"order", fmt6(v.xi_order), fmt6(v.v0_order), fmt6(v.l_order)});
  report.tables.push_back(fd);
  report.notes.push_back(std::string("variant ") + to_string(c.variant) + " (requested " + opt.variant + ")");
  report.notes.push_back(vc.trusted ? "corrections agree with central differences"
                                    : "corrections do NOT agree with central differences");
  return vc.trusted ? kOk : kValidationFailure;
}

int cmd_example(const Options& opt, std::ostream& out) {
  if (opt.example_name.empty()) {
    for (const auto& n : fixtures::names()) out << n << '\n';
    return kOk;
  }
  const auto m = fixtures::by_name(opt.example_name);
  if (!m) throw InputError("unknown example " + opt.example_name);
  out << io::serialize_model(*m);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options opt;
  opt.argv = args;
  CLI::App app{"Fair prices and hedges under a tradable numeraire on scenario trees", "fairhedge"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub, bool eps, bool variant, bool rate) {
    sub->add_option("--model", opt.model_path, "model file")->required();
    sub->add_option("--numeraire", opt.numeraire, "numeraire generator: bank, half-share or a file");
    sub->add_option("--format", opt.format, "output format")->check(CLI::IsMember({"table", "machine"}));
    if (eps) sub->add_option("--eps", opt.eps, "comma separated perturbation sizes");
    if (variant)
      sub->add_option("--ctilde-variant", opt.variant, "centring of the correction term")
          ->check(CLI::IsMember({"auto", "conditional", "unconditional", "literal"}));
    if (rate) sub->add_option("--rate", opt.rate, "constant interest rate for the comparison price");
  };
  add_common(app.add_subcommand("validate", "check a model file"), false, false, false);
  add_common(app.add_subcommand("hedge", "fair price, strategy and residual"), false, false, true);
  add_common(app.add_subcommand("oracle", "compare the recursion with global least squares"), false, false, false);
  add_common(app.add_subcommand("perturb", "stability under small numeraire perturbations"), true, false, false);
  add_common(app.add_subcommand("asymptotics", "first-order corrections and their check"), true, true, false);
  auto* example = app.add_subcommand("example", "print a bundled model, or list them");
  example->add_option("name", opt.example_name, "fixture name");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kInputError;
  }
  opt.command = app.get_subcommands().front()->get_name();

  try {
    if (opt.command == "example") return cmd_example(opt, out);
    Report report;
    int rc = kOk;
    if (opt.command == "validate") rc = cmd_validate(opt, report);
    if (opt.command == "hedge") rc = cmd_hedge(opt, report);
    if (opt.command == "oracle") rc = cmd_oracle(opt, report);
    if (opt.command == "perturb") rc = cmd_perturb(opt, report);
    if (opt.command == "asymptotics") rc = cmd_asymptotics(opt, report);
    out << (opt.format == "machine" ? render_machine(report) : render_table(report));
    return rc;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
}

}  // namespace fairhedge::cli
