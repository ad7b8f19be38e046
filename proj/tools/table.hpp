#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace potts_cli {

using Cell = std::variant<std::string, double, std::int64_t>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

// Ordered key/value pairs written at the top of every output file.
using Header = std::vector<std::pair<std::string, std::string>>;

std::string format_double(double v);
std::string cell_text(const Cell& c);

std::string to_csv(const Header& header, const Table& table);
nlohmann::ordered_json to_json(const Header& header, const Table& table);

// Writes <dir>/<stem>_<table>.<format> and returns the path.
std::filesystem::path write_table(const std::filesystem::path& dir, const std::string& stem, const std::string& format,
                                  const Header& header, const Table& table);

}  // namespace potts_cli
