#pragma once

// Experiment plumbing: key = value configuration, result tables with CSV
// output, and a small SVG line-plot writer.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sr3::harness {

/// Flat key = value settings.  A file may group keys under [experiment]
/// headers; those apply only when that experiment runs and override the
/// top-level keys.  Lines starting with '#' or ';' are comments.
class Config {
 public:
  static Config from_text(std::string_view text);
  static Config from_file(const std::string& path);

  /// Sets a top-level key and drops it from every section, so the value
  /// wins regardless of which experiment runs (command-line overrides).
  void set(const std::string& key, const std::string& value);
  /// Top-level keys merged with the keys of section `name`.
  Config section(std::string_view name) const;

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated numbers.
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;
  /// Comma-separated words, surrounding blanks trimmed.
  std::vector<std::string> get_words(const std::string& key, const std::vector<std::string>& fallback) const;

  std::uint64_t seed() const;
  bool paper_scale() const { return get_bool("paper_scale", false); }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

using Cell = std::variant<std::monostate, long, double, std::string>;

class ResultTable {
 public:
  ResultTable(std::string experiment, std::vector<std::string> columns);

  const std::string& experiment() const { return experiment_; }
  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t size() const { return rows_.size(); }
  const std::vector<Cell>& row(std::size_t i) const { return rows_[i]; }

  /// Starts a row with every cell empty; fill it through set().
  void add_row();
  void set(const std::string& column, Cell value);

  std::size_t column(const std::string& name) const;
  const Cell& at(std::size_t row, const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
  std::string text(std::size_t row, const std::string& name) const;

  /// Rows whose `column` holds the text `value`.
  std::vector<std::size_t> where(const std::string& column, const std::string& value) const;

  /// UTF-8 CSV with a header row and RFC 4180 quoting; numbers use the
  /// shortest round-trip representation.
  std::string to_csv() const;

 private:
  std::string experiment_;
  std::vector<std::string> columns_;
  std::vector<std::vector<Cell>> rows_;
};

std::string format_cell(const Cell& cell);
std::string csv_escape(const std::string& field);

struct PlotSpec {
  std::string title;
  std::string x;
  std::string y;
  /// Column whose distinct values become separate polylines.
  std::string series;
  /// Optional row filter: only rows with filter_column == filter_value.
  std::string filter_column;
  std::string filter_value;
  bool log_x = false;
  bool log_y = false;
  /// Average y over rows sharing (series, x).
  bool mean = false;
};

/// Minimal SVG line plot of table columns (axes, ticks at the data range
/// ends, one polyline per series, legend).
std::string render_svg(const ResultTable& table, const PlotSpec& plot);

void write_file(const std::string& path, const std::string& contents);

}  // namespace sr3::harness
