#include "json_emit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace fairhedge::detail {
namespace {

void number(std::string& out, double x) {
  if (!std::isfinite(x)) {
    out += std::isnan(x) ? "null" : (x > 0 ? "\"inf\"" : "\"-inf\"");
    return;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  out += buf;
}

void write(std::string& out, const nlohmann::ordered_json& v, int indent, int depth) {
  const auto newline = [&](int d) {
    if (indent <= 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (v.type()) {
    case nlohmann::ordered_json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += nlohmann::ordered_json(it.key()).dump();
        out += indent > 0 ? ": " : ":";
        write(out, it.value(), indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case nlohmann::ordered_json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      // Arrays of plain numbers stay on one line.
      const bool flat = std::all_of(v.begin(), v.end(), [](const auto& e) { return e.is_number(); });
      out += '[';
      bool first = true;
      for (const auto& e : v) {
        if (!first) out += flat && indent > 0 ? ", " : ",";
        first = false;
        if (!flat) newline(depth + 1);
        write(out, e, indent, depth + 1);
      }
      if (!flat) newline(depth);
      out += ']';
      return;
    }
    case nlohmann::ordered_json::value_t::number_float:
      number(out, v.get<double>());
      return;
    default:
      out += v.dump();
  }
}

}  // namespace

std::string emit_json(const nlohmann::ordered_json& value, int indent) {
  std::string out;
  write(out, value, indent, 0);
  out += '\n';
  return out;
}

}  // namespace fairhedge::detail
