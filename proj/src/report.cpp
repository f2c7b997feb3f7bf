#include "report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "json_emit.hpp"

namespace fairhedge::cli {

std::string fmt6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string fmt_vector(const std::vector<double>& v) {
  std::string out = "(";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt6(v[i]);
  }
  return out + ")";
}

std::string render_machine(const Report& report) { return detail::emit_json(report.machine); }

std::string render_table(const Report& report) {
  std::ostringstream out;
  for (const auto& line : report.header) out << line << '\n';
  for (const Table& t : report.tables) {
    out << '\n' << t.title << '\n';
    std::vector<std::size_t> width(t.headers.size(), 0);
    for (std::size_t c = 0; c < t.headers.size(); ++c) width[c] = t.headers[c].size();
    for (const auto& row : t.rows) {
      for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    auto line = [&](const std::vector<std::string>& cells) {
      std::string s;
      for (std::size_t c = 0; c < width.size(); ++c) {
        const std::string cell = c < cells.size() ? cells[c] : "";
        if (c) s += "  ";
        // first column left aligned, the rest right aligned
        if (c == 0) {
          s += cell + std::string(width[c] - cell.size(), ' ');
        } else {
          s += std::string(width[c] - cell.size(), ' ') + cell;
        }
      }
      while (!s.empty() && s.back() == ' ') s.pop_back();
      out << "  " << s << '\n';
    };
    line(t.headers);
    std::size_t total = 0;
    for (std::size_t w : width) total += w;
    out << "  " << std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') << '\n';
    for (const auto& row : t.rows) line(row);
  }
  if (!report.notes.empty()) out << '\n';
  for (const auto& n : report.notes) out << n << '\n';
  return out.str();
}

}  // namespace fairhedge::cli
