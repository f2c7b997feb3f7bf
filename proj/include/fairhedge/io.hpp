#pragma once

#include <cstdint>
#include <string>

#include "fairhedge/fixtures.hpp"

namespace fairhedge::io {

inline constexpr const char* kModelSchema = "fairhedge.model/1";

/// Parses a model document. Every structural problem is reported as a ModelError; node
/// and payoff problems name the node.
Model parse_model(const std::string& text);

/// Reads and parses a model file.
Model load_model(const std::string& path);

/// Canonical text of a model: nodes in level order, payoff in leaf order, 17 significant
/// digits. parse_model(serialize_model(m)) reproduces m exactly.
std::string serialize_model(const Model& model);

/// Parses a generator for the given tree: either a document with a "generator" object
/// (node id -> position) or a full model document whose numeraire section is used.
PredictableProcess<double> parse_generator(const ScenarioTree<double>& tree, const std::string& text);

/// FNV-1a 64-bit hash, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

/// Digest of the canonical serialization.
std::string model_digest(const Model& model);

}  // namespace fairhedge::io
