#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace underspec::csv {

// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);
double parse_double(std::string_view text);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, or throws UsageError.
  std::size_t column(std::string_view name) const;
};

Table read(std::istream& in);
Table read_file(const std::string& path);

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void header(const std::vector<std::string>& names);
  Writer& cell(std::string_view text);
  Writer& cell(double value);
  Writer& cell(long long value);
  Writer& cell(int value) { return cell(static_cast<long long>(value)); }
  Writer& cell(std::size_t value) { return cell(static_cast<long long>(value)); }
  void end_row();

 private:
  std::ostream& out_;
  bool row_started_ = false;
};

}  // namespace underspec::csv
