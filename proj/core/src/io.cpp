#include "hclt/io.hpp"

#include "hclt/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <system_error>

#include <unistd.h>

namespace hclt::io {

std::string format_double(double value) {
  char buffer[32];
  const auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  if (ec != std::errc()) throw Error("could not format a double");
  return {buffer, end};
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size())
    throw ArgumentError("not a number: '" + std::string(text) + "'");
  return value;
}

void write_function_csv(std::ostream& out, const GridFunction& f) {
  out << "x,value\n";
  for (std::size_t i = 0; i < f.size(); ++i) out << format_double(f.grid()->point(i)) << ',' << format_double(f[i]) << '\n';
}

void write_kernel_csv(std::ostream& out, const Kernel& k) {
  out << "x,y,value\n";
  const auto& grid = *k.grid();
  for (std::size_t i = 0; i < k.size(); ++i)
    for (std::size_t j = 0; j < k.size(); ++j)
      out << format_double(grid.point(i)) << ',' << format_double(grid.point(j)) << ',' << format_double(k(i, j))
          << '\n';
}

void write_pattern_csv(std::ostream& out, const MissingnessPattern& pattern) {
  out << "x,observed\n";
  for (std::size_t i = 0; i < pattern.size(); ++i)
    out << format_double(pattern.grid()->point(i)) << ',' << (pattern.observed(i) ? '1' : '0') << '\n';
}

void write_partial_csv(std::ostream& out, const PartialElement& element) {
  require_same_grid(element.assembled.grid(), element.pattern.grid());
  out << "x,value,observed\n";
  const auto& grid = *element.assembled.grid();
  for (std::size_t i = 0; i < grid.size(); ++i)
    out << format_double(grid.point(i)) << ',' << format_double(element.assembled[i]) << ','
        << (element.pattern.observed(i) ? '1' : '0') << '\n';
}

void write_sample_csv(std::ostream& out, const Sample& sample) {
  out << "n,m,seed,x,value\n";
  const auto& grid = *sample.element.grid();
  const std::string prefix = std::to_string(sample.n) + ',' + std::to_string(sample.m) + ',' + hex(sample.seed.key()) + ',';
  for (std::size_t i = 0; i < grid.size(); ++i)
    out << prefix << format_double(grid.point(i)) << ',' << format_double(sample.element[i]) << '\n';
}

namespace {

std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::vector<std::string>> read_rows(std::istream& in, std::string_view expected_header) {
  std::string line;
  if (!std::getline(in, line) || line != expected_header)
    throw ArgumentError("expected CSV header '" + std::string(expected_header) + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    for (auto f : fields(line)) row.emplace_back(f);
    rows.push_back(std::move(row));
  }
  return rows;
}

void check_abscissae(const std::vector<std::vector<std::string>>& rows, const GridPtr& grid, std::size_t width) {
  if (rows.size() != grid->size()) throw GridMismatchError("CSV row count differs from grid size");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != width) throw ArgumentError("CSV row " + std::to_string(i + 2) + " has the wrong field count");
    if (std::abs(parse_double(rows[i][0]) - grid->point(i)) > 1e-12)
      throw GridMismatchError("CSV abscissa at row " + std::to_string(i + 2) + " does not match the grid");
  }
}

}  // namespace

GridFunction read_function_csv(std::istream& in, const GridPtr& grid) {
  const auto rows = read_rows(in, "x,value");
  check_abscissae(rows, grid, 2);
  Eigen::VectorXd values(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) values[static_cast<Eigen::Index>(i)] = parse_double(rows[i][1]);
  return GridFunction(grid, std::move(values));
}

MissingnessPattern read_pattern_csv(std::istream& in, const GridPtr& grid) {
  const auto rows = read_rows(in, "x,observed");
  check_abscissae(rows, grid, 2);
  std::vector<bool> mask(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i][1] != "0" && rows[i][1] != "1") throw ArgumentError("observed flag must be 0 or 1");
    mask[i] = rows[i][1] == "1";
  }
  return MissingnessPattern(grid, std::move(mask));
}

void atomic_write(const std::filesystem::path& path, std::string_view content) {
  auto temp = path;
  temp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + temp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(temp, ignored);
      throw Error("short write to " + temp.string());
    }
  }
  std::filesystem::rename(temp, path);
}

CsvTable::CsvTable(std::vector<std::string> header) : columns_(header.size()), header_(std::move(header)) {}

CsvTable& CsvTable::row() {
  if (!rows_.empty() && rows_.back().size() != columns_) throw Error("previous CSV row is incomplete");
  rows_.emplace_back();
  return *this;
}

CsvTable& CsvTable::add(std::string_view text) {
  if (rows_.empty()) throw Error("call row() before add()");
  if (rows_.back().size() == columns_) throw Error("CSV row has too many fields");
  if (text.find_first_of(",\"\n") != std::string_view::npos) {
    std::string quoted = "\"";
    for (char c : text) {
      if (c == '"') quoted += '"';
      quoted += c;
    }
    quoted += '"';
    rows_.back().push_back(std::move(quoted));
  } else {
    rows_.back().emplace_back(text);
  }
  return *this;
}

CsvTable& CsvTable::add(double value) { return add(std::string_view(format_double(value))); }

CsvTable& CsvTable::add(std::uint64_t value) { return add(std::string_view(std::to_string(value))); }

CsvTable& CsvTable::add(bool value) { return add(std::string_view(value ? "true" : "false")); }

std::string CsvTable::str() const {
  std::ostringstream out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  };
  line(header_);
  for (const auto& r : rows_) {
    if (r.size() != columns_) throw Error("CSV row is incomplete");
    line(r);
  }
  return out.str();
}

std::string hex(std::uint64_t value) {
  char buffer[17];
  const auto [end, ec] = std::to_chars(buffer, buffer + 16, value, 16);
  std::string digits(buffer, end);
  return std::string(16 - digits.size(), '0') + digits;
}

}  // namespace hclt::io
