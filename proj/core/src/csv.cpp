#include "ganreg/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>

#include "ganreg/error.hpp"

namespace ganreg::csv {
namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw IoError("cannot format double");
  return std::string(buf, ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw IoError("not a number: '" + std::string(s) + "'");
  return v;
}

Writer::Writer(std::ostream& os, std::initializer_list<std::string_view> header)
    : os_(os) {
  bool first = true;
  for (std::string_view h : header) put(h, first);
  os_ << '\n';
}

Writer::Writer(std::ostream& os, const std::vector<std::string>& header) : os_(os) { row_strings(header); }

void Writer::row_strings(const std::vector<std::string>& fields) {
  bool first = true;
  for (const std::string& f : fields) put(f, first);
  os_ << '\n';
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw IoError("csv: no column '" + std::string(name) + "'");
}

Table read(std::istream& is) {
  Table t;
  std::string line;
  if (!std::getline(is, line)) throw IoError("csv: missing header");
  t.header = split(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != t.header.size()) throw IoError("csv: row has " + std::to_string(fields.size()) +
                                                        " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(fields));
  }
  return t;
}

Table read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return read(is);
}

}  // namespace ganreg::csv
