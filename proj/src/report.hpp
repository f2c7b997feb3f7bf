#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace fairhedge::cli {

struct Table {
  std::string title;
  std::vector<std::string> headers;
  std::vector<std::vector<std::string>> rows;
};

/// A command's output: the machine document and its tabular rendering.
struct Report {
  nlohmann::ordered_json machine;
  std::vector<std::string> header;  ///< lines printed before the tables
  std::vector<Table> tables;
  std::vector<std::string> notes;   ///< lines printed after the tables
};

std::string fmt6(double x);
std::string fmt_vector(const std::vector<double>& v);

std::string render_machine(const Report& report);
std::string render_table(const Report& report);

}  // namespace fairhedge::cli
