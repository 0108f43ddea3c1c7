#pragma once

#include <concepts>
#include <initializer_list>
#include <iosfwd>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace ganreg::csv {

/// Shortest decimal that parses back to exactly `v` ("nan"/"inf" for non-finite values).
std::string format_double(double v);
/// Strict parse of a whole field; throws IoError.
double parse_double(std::string_view s);

/// Comma-separated output with a header row and LF line endings.
class Writer {
 public:
  Writer(std::ostream& os, std::initializer_list<std::string_view> header);
  Writer(std::ostream& os, const std::vector<std::string>& header);

  template <class... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((put(fields, first)), ...);
    os_ << '\n';
  }

  /// A row of already formatted fields.
  void row_strings(const std::vector<std::string>& fields);

 private:
  void sep(bool& first) {
    if (!first) os_ << ',';
    first = false;
  }
  void put(double v, bool& first) {
    sep(first);
    os_ << format_double(v);
  }
  template <std::integral I>
  void put(I v, bool& first) {
    sep(first);
    os_ << v;
  }
  void put(std::string_view s, bool& first) {
    sep(first);
    os_ << s;
  }
  void put(const std::string& s, bool& first) { put(std::string_view(s), first); }
  void put(const char* s, bool& first) { put(std::string_view(s), first); }

  std::ostream& os_;
};

/// A parsed CSV file: header plus rows of raw fields.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws IoError if absent.
  std::size_t column(std::string_view name) const;
};

Table read(std::istream& is);
Table read_file(const std::string& path);

}  // namespace ganreg::csv
