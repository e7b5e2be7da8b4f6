#pragma once

// CSV import/export of grid objects and atomic file output.

#include "hclt/imputation.hpp"
#include "hclt/l2.hpp"
#include "hclt/missingness.hpp"
#include "hclt/triangular_array.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace hclt::io {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

/// Header "x,value".
void write_function_csv(std::ostream& out, const GridFunction& f);
/// Long format with header "x,y,value", row-major over grid indices.
void write_kernel_csv(std::ostream& out, const Kernel& k);
/// Header "x,observed" with 0/1 entries.
void write_pattern_csv(std::ostream& out, const MissingnessPattern& pattern);
/// Header "x,value,observed".
void write_partial_csv(std::ostream& out, const PartialElement& element);
/// Header "n,m,seed,x,value".
void write_sample_csv(std::ostream& out, const Sample& sample);

/// Readers check that the x column matches the grid.
GridFunction read_function_csv(std::istream& in, const GridPtr& grid);
MissingnessPattern read_pattern_csv(std::istream& in, const GridPtr& grid);

/// Writes through a sibling temporary file and renames it into place.
void atomic_write(const std::filesystem::path& path, std::string_view content);

/// Minimal CSV table builder for result files.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  CsvTable& row();
  CsvTable& add(std::string_view text);
  CsvTable& add(double value);
  CsvTable& add(std::uint64_t value);
  CsvTable& add(bool value);
  CsvTable& add(const char* text) { return add(std::string_view(text)); }

  std::size_t rows() const { return rows_.size(); }
  std::string str() const;

 private:
  std::size_t columns_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Seed key as 16 lowercase hex digits.
std::string hex(std::uint64_t value);

}  // namespace hclt::io
