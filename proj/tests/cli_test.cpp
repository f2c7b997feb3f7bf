#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fairhedge.hpp"
#include "fairhedge/cli.hpp"
#include "fairhedge/io.hpp"
#include "json.hpp"

using namespace fairhedge;
using json = nlohmann::json;

namespace {

class TempFiles {
 public:
  ~TempFiles() {
    for (const auto& p : paths_) std::filesystem::remove(p);
  }
  std::string write(const std::string& name, const std::string& text) {
    const auto p = std::filesystem::temp_directory_path() / ("fairhedge_cli_test_" + name);
    std::ofstream(p) << text;
    paths_.push_back(p);
    return p.string();
  }

 private:
  std::vector<std::filesystem::path> paths_;
};

struct Result {
  int rc;
  std::string out, err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int rc = cli::run(args, out, err);
  return {rc, out.str(), err.str()};
}

json trinomial_doc() { return json::parse(io::serialize_model(fixtures::trinomial())); }

ModelError::Kind parse_kind(const std::string& text) {
  try {
    io::parse_model(text);
  } catch (const ModelError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected a ModelError";
  return ModelError::Kind::kStructure;
}

}  // namespace

TEST(ModelIo, RoundTrip) {
  for (const auto& name : fixtures::names()) {
    const Model m = *fixtures::by_name(name);
    const std::string text = io::serialize_model(m);
    const Model back = io::parse_model(text);
    EXPECT_EQ(io::serialize_model(back), text) << name;
    EXPECT_EQ(back.tree.prices(), m.tree.prices()) << name;
    EXPECT_EQ(back.claim.payoff, m.claim.payoff) << name;
    for (Index u = 1; u < m.tree.node_count(); ++u) EXPECT_EQ(back.tree.cond_prob(u), m.tree.cond_prob(u));
  }
}

TEST(ModelIo, RoundTripWithGeneratorAndRate) {
  Model m = fixtures::two_period();
  m.generator = builtin_generator(m.tree, "half-share");
  m.generator->values(1, 0) = 0.125;
  m.rate = 0.05;
  const Model back = io::parse_model(io::serialize_model(m));
  ASSERT_TRUE(back.generator.has_value());
  EXPECT_EQ(back.generator->values, m.generator->values);
  EXPECT_EQ(*back.rate, 0.05);
}

TEST(ModelIo, Errors) {
  using Kind = ModelError::Kind;
  EXPECT_EQ(parse_kind("{ not json"), Kind::kParse);

  json doc = trinomial_doc();
  doc.erase("schema");
  EXPECT_EQ(parse_kind(doc.dump()), Kind::kSchema);

  doc = trinomial_doc();
  doc["payoff"].erase("mid");
  try {
    io::parse_model(doc.dump());
    FAIL() << "expected coverage error";
  } catch (const ModelError& e) {
    EXPECT_EQ(e.kind(), Kind::kCoverage);
    EXPECT_EQ(e.node(), "mid");
  }

  doc = trinomial_doc();
  doc["nodes"][1]["prob"] = 0.1;  // children now sum to 0.9
  try {
    io::parse_model(doc.dump());
    FAIL() << "expected probability error";
  } catch (const ModelError& e) {
    EXPECT_EQ(e.kind(), Kind::kProbability);
    EXPECT_EQ(e.node(), "root");
  }
}

TEST(ModelIo, DigestIsStable) {
  const Model m = fixtures::trinomial();
  EXPECT_EQ(io::model_digest(m), io::model_digest(io::parse_model(io::serialize_model(m))));
  EXPECT_EQ(io::model_digest(m).size(), 16u);
  EXPECT_NE(io::model_digest(m), io::model_digest(fixtures::binomial()));
  EXPECT_EQ(io::fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(io::fnv1a_hex("a"), "af63dc4c8601ec8c");
}

TEST(Cli, ExampleListsAndPrints) {
  const Result list = run({"example"});
  EXPECT_EQ(list.rc, cli::kOk);
  EXPECT_NE(list.out.find("trinomial"), std::string::npos);
  const Result tri = run({"example", "trinomial"});
  EXPECT_EQ(tri.rc, cli::kOk);
  EXPECT_EQ(tri.out, io::serialize_model(fixtures::trinomial()));
  EXPECT_EQ(run({"example", "nope"}).rc, cli::kInputError);
}

TEST(Cli, HedgeUnitNumeraire) {
  TempFiles files;
  const std::string path = files.write("tri.json", io::serialize_model(fixtures::trinomial()));
  const Result r = run({"hedge", "--model", path, "--format", "machine"});
  ASSERT_EQ(r.rc, cli::kOk) << r.err;
  const json doc = json::parse(r.out);
  EXPECT_EQ(doc["command"], "hedge");
  EXPECT_EQ(doc["inputs"]["numeraire"], "bank");
  EXPECT_EQ(doc["inputs"]["digest"], io::model_digest(fixtures::trinomial()));
  EXPECT_NEAR(doc["outputs"]["fair_price"].get<double>(), 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(doc["outputs"]["strategy"]["root"][0].get<double>(), 1.0 / 3.0, 1e-12);
  EXPECT_TRUE(doc["outputs"]["references"][0]["fair_price"]["match"].get<bool>());
}

TEST(Cli, HedgeHalfShareReportsMismatch) {
  TempFiles files;
  const std::string path = files.write("tri.json", io::serialize_model(fixtures::trinomial()));
  const Result r = run({"hedge", "--model", path, "--numeraire", "half-share"});
  ASSERT_EQ(r.rc, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("0.109028"), std::string::npos);
  EXPECT_NE(r.out.find("0.130208"), std::string::npos);
  EXPECT_NE(r.out.find("MISMATCH"), std::string::npos);
  EXPECT_NE(r.out.find("0.133333"), std::string::npos);
}

TEST(Cli, HedgeWithRate) {
  TempFiles files;
  const std::string path = files.write("tri.json", io::serialize_model(fixtures::trinomial()));
  const Result r = run({"hedge", "--model", path, "--rate", "0.1", "--format", "machine"});
  ASSERT_EQ(r.rc, cli::kOk) << r.err;
  const json doc = json::parse(r.out);
  EXPECT_NEAR(doc["outputs"]["interest_rate"]["fair_price"].get<double>(), 0.2121212121212121, 1e-12);
}

TEST(Cli, MachineOutputIsDeterministic) {
  TempFiles files;
  const std::string path = files.write("two.json", io::serialize_model(fixtures::two_asset()));
  for (const char* cmd : {"hedge", "oracle", "perturb", "asymptotics"}) {
    const Result a = run({cmd, "--model", path, "--numeraire", "half-share", "--format", "machine"});
    const Result b = run({cmd, "--model", path, "--numeraire", "half-share", "--format", "machine"});
    EXPECT_EQ(a.rc, b.rc) << cmd;
    EXPECT_EQ(a.out, b.out) << cmd;
    EXPECT_FALSE(a.out.empty()) << cmd;
  }
}

TEST(Cli, MachineNumbersCarrySeventeenDigits) {
  TempFiles files;
  const std::string path = files.write("tri.json", io::serialize_model(fixtures::trinomial()));
  const Result r = run({"hedge", "--model", path, "--format", "machine"});
  EXPECT_NE(r.out.find("0.16666666666666666"), std::string::npos);
}

TEST(Cli, OracleExitCodes) {
  TempFiles files;
  const std::string one = files.write("tri.json", io::serialize_model(fixtures::trinomial()));
  const Result a = run({"oracle", "--model", one, "--numeraire", "half-share", "--format", "machine"});
  EXPECT_EQ(a.rc, cli::kOk) << a.err;
  EXPECT_LE(json::parse(a.out)["outputs"]["comparison"]["max_deviation"].get<double>(), 1e-9);

  const std::string two = files.write("two_period.json", io::serialize_model(fixtures::two_period()));
  EXPECT_EQ(run({"oracle", "--model", two}).rc, cli::kValidationFailure);
}

TEST(Cli, AsymptoticsSelectsVariant) {
  TempFiles files;
  const std::string path = files.write("tri.json", io::serialize_model(fixtures::trinomial()));
  const Result r = run({"asymptotics", "--model", path, "--numeraire", "half-share", "--eps", "1e-3,1e-4",
                        "--format", "machine"});
  ASSERT_EQ(r.rc, cli::kOk) << r.err;
  const json doc = json::parse(r.out);
  EXPECT_EQ(doc["outputs"]["variant"]["selected"], "conditional");
  EXPECT_TRUE(doc["outputs"]["trusted"].get<bool>());
  const json& v = doc["outputs"]["validation"];
  EXPECT_TRUE(v["passed"].get<bool>());

  const Result lit = run({"asymptotics", "--model", path, "--numeraire", "half-share", "--ctilde-variant", "literal"});
  EXPECT_EQ(lit.rc, cli::kValidationFailure);
}

TEST(Cli, InputErrors) {
  TempFiles files;
  const std::string path = files.write("tri.json", io::serialize_model(fixtures::trinomial()));
  EXPECT_EQ(run({"hedge"}).rc, cli::kInputError);
  EXPECT_EQ(run({"hedge", "--model", "/nonexistent/model.json"}).rc, cli::kInputError);
  EXPECT_EQ(run({"hedge", "--model", path, "--format", "xml"}).rc, cli::kInputError);
  EXPECT_EQ(run({"perturb", "--model", path, "--numeraire", "half-share", "--eps", "5"}).rc, cli::kInputError);
  EXPECT_EQ(run({"perturb", "--model", path, "--eps", "abc"}).rc, cli::kInputError);
  EXPECT_EQ(run({"frobnicate"}).rc, cli::kInputError);

  json doc = trinomial_doc();
  doc["payoff"].erase("down");
  const std::string bad = files.write("bad.json", doc.dump());
  const Result r = run({"validate", "--model", bad});
  EXPECT_EQ(r.rc, cli::kInputError);
  EXPECT_NE(r.err.find("down"), std::string::npos);
}

TEST(Cli, NumericalFailures) {
  TempFiles files;
  const std::string red = files.write("red.json", io::serialize_model(fixtures::redundant()));
  const Result r = run({"hedge", "--model", red});
  EXPECT_EQ(r.rc, cli::kValidationFailure);
  EXPECT_NE(r.err.find("root"), std::string::npos);

  const std::string gen = files.write("gen.json", R"({"generator": {"root": [-1]}})");
  const std::string tri = files.write("tri.json", io::serialize_model(fixtures::trinomial()));
  const Result n = run({"hedge", "--model", tri, "--numeraire", gen});
  EXPECT_NE(n.rc, cli::kOk);
  EXPECT_NE(n.err.find("up"), std::string::npos);
}

TEST(Cli, ValidateAndPerturbTables) {
  TempFiles files;
  const std::string path = files.write("tri.json", io::serialize_model(fixtures::trinomial()));
  const Result v = run({"validate", "--model", path});
  EXPECT_EQ(v.rc, cli::kOk);
  EXPECT_NE(v.out.find("model is valid"), std::string::npos);
  const Result p = run({"perturb", "--model", path, "--numeraire", "half-share", "--format", "machine"});
  ASSERT_EQ(p.rc, cli::kOk) << p.err;
  const json doc = json::parse(p.out);
  EXPECT_TRUE(doc["outputs"]["monotone"].get<bool>());
  EXPECT_EQ(doc["outputs"]["eps"].size(), 4u);
}
