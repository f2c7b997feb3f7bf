#pragma once

#include <string>

#include "json.hpp"

namespace fairhedge::detail {

/// Writes JSON with every floating-point number printed as %.17g, so that values
/// round-trip exactly and the text is stable across runs.
std::string emit_json(const nlohmann::ordered_json& value, int indent = 2);

}  // namespace fairhedge::detail
