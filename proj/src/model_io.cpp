#include "fairhedge/io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json_emit.hpp"

namespace fairhedge::io {
namespace {

using json = nlohmann::ordered_json;
using Kind = ModelError::Kind;

[[noreturn]] void schema_error(const std::string& what, const std::string& node = "") {
  throw ModelError(Kind::kSchema, node, what);
}

const json& field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(where + ": missing field \"" + key + "\"");
  return *it;
}

double real(const json& v, const std::string& where) {
  if (!v.is_number()) schema_error(where + " must be a number");
  return v.get<double>();
}

int integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) schema_error(where + " must be an integer");
  return v.get<int>();
}

std::vector<double> reals(const json& v, const std::string& where) {
  if (!v.is_array()) schema_error(where + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(real(e, where));
  return out;
}

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ModelError(Kind::kParse, "", std::string("malformed JSON: ") + e.what());
  }
}

PredictableProcess<double> generator_from(const ScenarioTree<double>& tree, const json& gen) {
  if (!gen.is_object()) schema_error("numeraire generator must be an object keyed by node id");
  PredictableProcess<double> eta = PredictableProcess<double>::zero(tree, tree.asset_count());
  for (auto it = gen.begin(); it != gen.end(); ++it) {
    const auto u = tree.find(it.key());
    if (!u) throw ModelError(Kind::kCoverage, it.key(), "generator refers to an unknown node");
    if (tree.is_leaf(*u)) throw ModelError(Kind::kCoverage, it.key(), "generator is defined only before the horizon");
    const std::vector<double> pos = reals(it.value(), "generator entry");
    if (static_cast<int>(pos.size()) != tree.asset_count())
      throw ModelError(Kind::kDimension, it.key(), "generator entry has wrong dimension");
    for (int i = 0; i < tree.asset_count(); ++i) {
      if (!std::isfinite(pos[i])) throw ModelError(Kind::kSchema, it.key(), "generator entry is not finite");
      eta.values(*u, i) = pos[i];
    }
  }
  return eta;
}

}  // namespace

Model parse_model(const std::string& text) {
  const json doc = parse_text(text);
  if (!doc.is_object()) schema_error("model must be a JSON object");
  const json& schema = field(doc, "schema", "model");
  if (!schema.is_string() || schema.get<std::string>() != kModelSchema)
    schema_error(std::string("unsupported schema, expected \"") + kModelSchema + "\"");
  const int horizon = integer(field(doc, "horizon", "model"), "horizon");
  const int assets = integer(field(doc, "assets", "model"), "assets");

  const json& nodes = field(doc, "nodes", "model");
  if (!nodes.is_array()) schema_error("nodes must be an array");
  std::vector<NodeSpec> specs;
  for (const auto& n : nodes) {
    if (!n.is_object()) schema_error("every node must be an object");
    NodeSpec s;
    const json& id = field(n, "id", "node");
    if (!id.is_string()) schema_error("node id must be a string");
    s.id = id.get<std::string>();
    const std::string where = "node " + s.id;
    s.time = integer(field(n, "time", where), where + " time");
    const json& parent = field(n, "parent", where);
    if (parent.is_string()) {
      s.parent = parent.get<std::string>();
    } else if (!parent.is_null()) {
      schema_error("parent must be a node id or null", s.id);
    }
    s.cond_prob = real(field(n, "prob", where), where + " prob");
    s.prices = reals(field(n, "prices", where), where + " prices");
    specs.push_back(std::move(s));
  }

  Model m;
  m.tree = ScenarioTree<double>::from_nodes(horizon, assets, specs);

  const json& payoff = field(doc, "payoff", "model");
  if (!payoff.is_object()) schema_error("payoff must be an object keyed by leaf id");
  m.claim.payoff = NodeVector<double>::Zero(m.tree.node_count());
  std::set<Index> seen;
  for (auto it = payoff.begin(); it != payoff.end(); ++it) {
    const auto u = m.tree.find(it.key());
    if (!u) throw ModelError(Kind::kCoverage, it.key(), "payoff refers to an unknown node");
    if (!m.tree.is_leaf(*u)) throw ModelError(Kind::kCoverage, it.key(), "payoff is defined only on leaves");
    const double v = real(it.value(), "payoff of " + it.key());
    if (!std::isfinite(v)) throw ModelError(Kind::kSchema, it.key(), "payoff is not finite");
    m.claim.payoff[*u] = v;
    seen.insert(*u);
  }
  for (Index l = m.tree.level_begin(horizon); l < m.tree.node_count(); ++l) {
    if (!seen.count(l)) throw ModelError(Kind::kCoverage, m.tree.id(l), "payoff missing for leaf");
  }

  if (auto it = doc.find("numeraire"); it != doc.end() && !it->is_null()) {
    if (!it->is_object()) schema_error("numeraire must be an object");
    m.generator = generator_from(m.tree, field(*it, "generator", "numeraire"));
  }
  if (auto it = doc.find("rate"); it != doc.end() && !it->is_null()) {
    const double r = real(*it, "rate");
    if (!std::isfinite(r) || r < 0.0) schema_error("rate must be a non-negative number");
    m.rate = r;
  }
  if (auto it = doc.find("references"); it != doc.end()) {
    if (!it->is_array()) schema_error("references must be an array");
    for (const auto& r : *it) {
      if (!r.is_object()) schema_error("every reference must be an object");
      Reference ref;
      const json& name = field(r, "numeraire", "reference");
      if (!name.is_string()) schema_error("reference numeraire must be a string");
      ref.numeraire = name.get<std::string>();
      if (auto fp = r.find("fair_price"); fp != r.end() && !fp->is_null()) ref.fair_price = real(*fp, "fair_price");
      if (auto st = r.find("strategy"); st != r.end()) {
        if (!st->is_object()) schema_error("reference strategy must be an object");
        for (auto s = st->begin(); s != st->end(); ++s) {
          const auto u = m.tree.find(s.key());
          if (!u || m.tree.is_leaf(*u))
            throw ModelError(Kind::kCoverage, s.key(), "reference strategy needs a non-terminal node");
          ref.strategy[s.key()] = reals(s.value(), "reference strategy");
        }
      }
      if (auto note = r.find("note"); note != r.end() && note->is_string()) ref.note = note->get<std::string>();
      m.references.push_back(std::move(ref));
    }
  }
  return m;
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError(Kind::kParse, "", "cannot read model file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

std::string serialize_model(const Model& model) {
  const ScenarioTree<double>& tree = model.tree;
  json doc;
  doc["schema"] = kModelSchema;
  doc["horizon"] = tree.horizon();
  doc["assets"] = tree.asset_count();
  json nodes = json::array();
  for (const NodeSpec& s : tree.node_specs()) {
    json n;
    n["id"] = s.id;
    n["time"] = s.time;
    n["parent"] = s.parent ? json(*s.parent) : json(nullptr);
    n["prob"] = s.cond_prob;
    n["prices"] = s.prices;
    nodes.push_back(std::move(n));
  }
  doc["nodes"] = std::move(nodes);
  json payoff = json::object();
  for (Index l = tree.level_begin(tree.horizon()); l < tree.node_count(); ++l) payoff[tree.id(l)] = model.claim.payoff[l];
  doc["payoff"] = std::move(payoff);
  if (model.generator) {
    json gen = json::object();
    for (Index u = 0; u < tree.level_begin(tree.horizon()); ++u) {
      std::vector<double> pos(model.generator->values.cols());
      for (Index i = 0; i < model.generator->values.cols(); ++i) pos[i] = model.generator->values(u, i);
      gen[tree.id(u)] = pos;
    }
    doc["numeraire"] = {{"generator", std::move(gen)}};
  }
  if (model.rate) doc["rate"] = *model.rate;
  if (!model.references.empty()) {
    json refs = json::array();
    for (const Reference& r : model.references) {
      json j;
      j["numeraire"] = r.numeraire;
      if (r.fair_price) j["fair_price"] = *r.fair_price;
      json st = json::object();
      for (const auto& [id, pos] : r.strategy) st[id] = pos;
      j["strategy"] = std::move(st);
      if (!r.note.empty()) j["note"] = r.note;
      refs.push_back(std::move(j));
    }
    doc["references"] = std::move(refs);
  }
  return detail::emit_json(doc);
}

PredictableProcess<double> parse_generator(const ScenarioTree<double>& tree, const std::string& text) {
  const json doc = parse_text(text);
  if (!doc.is_object()) schema_error("numeraire file must be a JSON object");
  if (auto it = doc.find("generator"); it != doc.end()) return generator_from(tree, *it);
  if (auto it = doc.find("numeraire"); it != doc.end() && it->is_object())
    return generator_from(tree, field(*it, "generator", "numeraire"));
  schema_error("numeraire file has no \"generator\" object");
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string model_digest(const Model& model) { return fnv1a_hex(serialize_model(model)); }

}  // namespace fairhedge::io
