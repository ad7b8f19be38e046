#include "table.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace potts_cli {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string cell_text(const Cell& c) {
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
  return std::to_string(std::get<std::int64_t>(c));
}

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

nlohmann::ordered_json cell_json(const Cell& c) {
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  if (const auto* d = std::get_if<double>(&c)) {
    // JSON has no NaN or infinity; the CSV spelling is kept as a string.
    if (!std::isfinite(*d)) return format_double(*d);
    return *d;
  }
  return std::get<std::int64_t>(c);
}

}  // namespace

std::string to_csv(const Header& header, const Table& table) {
  std::ostringstream os;
  for (const auto& [k, v] : header) os << "# " << k << ": " << v << '\n';
  os << "# table: " << table.name << '\n';
  for (std::size_t i = 0; i < table.columns.size(); ++i) os << (i ? "," : "") << csv_escape(table.columns[i]);
  os << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_escape(cell_text(row[i]));
    os << '\n';
  }
  return os.str();
}

nlohmann::ordered_json to_json(const Header& header, const Table& table) {
  nlohmann::ordered_json j;
  auto& h = j["header"];
  h = nlohmann::ordered_json::object();
  for (const auto& [k, v] : header) h[k] = v;
  j["table"] = table.name;
  j["columns"] = table.columns;
  auto& rows = j["rows"];
  rows = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    auto r = nlohmann::ordered_json::array();
    for (const auto& c : row) r.push_back(cell_json(c));
    rows.push_back(std::move(r));
  }
  return j;
}

std::filesystem::path write_table(const std::filesystem::path& dir, const std::string& stem, const std::string& format,
                                  const Header& header, const Table& table) {
  std::filesystem::create_directories(dir);
  const auto path = dir / (stem + "_" + table.name + "." + format);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (format == "csv")
    out << to_csv(header, table);
  else
    out << to_json(header, table).dump(2) << '\n';
  return path;
}

}  // namespace potts_cli
