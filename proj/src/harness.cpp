#include <sr3/harness.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sr3::harness {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("config: '" + key + "' is not a number: " + text);
  return v;
}

}  // namespace

Config Config::from_text(std::string_view text) {
  Config cfg;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw std::invalid_argument("config line " + std::to_string(number) + ": bad section");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(number) + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(number) + ": empty key");
    if (section.empty())
      cfg.values_[key] = value;
    else
      cfg.sections_[section][key] = value;
  }
  return cfg;
}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_text(buffer.str());
}

void Config::set(const std::string& key, const std::string& value) {
  values_[key] = value;
  for (auto& [name, keys] : sections_) keys.erase(key);
}

Config Config::section(std::string_view name) const {
  Config out;
  out.values_ = values_;
  const auto it = sections_.find(std::string(name));
  if (it != sections_.end())
    for (const auto& [k, v] : it->second) out.values_[k] = v;
  return out;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_double(key, it->second);
}

long Config::get_int(const std::string& key, long fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  long v = 0;
  const auto& text = it->second;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::invalid_argument("config: '" + key + "' is not an integer: " + text);
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto& v = it->second;
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config: '" + key + "' is not a boolean: " + v);
}

std::vector<double> Config::get_list(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  for (const auto& item : split(it->second, ',')) out.push_back(parse_double(key, item));
  return out;
}

std::vector<std::string> Config::get_words(const std::string& key, const std::vector<std::string>& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : split(it->second, ',');
}

std::uint64_t Config::seed() const {
  const auto it = values_.find("seed");
  if (it == values_.end()) return 0;
  std::uint64_t v = 0;
  const auto& text = it->second;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::invalid_argument("config: seed is not a non-negative integer: " + text);
  return v;
}

// ---------------------------------------------------------------------------

ResultTable::ResultTable(std::string experiment, std::vector<std::string> columns)
    : experiment_(std::move(experiment)), columns_(std::move(columns)) {
  std::set<std::string> unique(columns_.begin(), columns_.end());
  if (unique.size() != columns_.size()) throw std::invalid_argument("ResultTable: duplicate column names");
}

void ResultTable::add_row() { rows_.emplace_back(columns_.size()); }

void ResultTable::set(const std::string& name, Cell value) {
  if (rows_.empty()) throw std::logic_error("ResultTable::set: no row started");
  rows_.back()[column(name)] = std::move(value);
}

std::size_t ResultTable::column(const std::string& name) const {
  const auto it = std::find(columns_.begin(), columns_.end(), name);
  if (it == columns_.end()) throw std::invalid_argument("ResultTable: no column '" + name + "'");
  return static_cast<std::size_t>(it - columns_.begin());
}

const Cell& ResultTable::at(std::size_t row, const std::string& name) const { return rows_.at(row)[column(name)]; }

double ResultTable::number(std::size_t row, const std::string& name) const {
  const Cell& c = at(row, name);
  if (const auto* d = std::get_if<double>(&c)) return *d;
  if (const auto* l = std::get_if<long>(&c)) return static_cast<double>(*l);
  return std::numeric_limits<double>::quiet_NaN();
}

std::string ResultTable::text(std::size_t row, const std::string& name) const { return format_cell(at(row, name)); }

std::vector<std::size_t> ResultTable::where(const std::string& name, const std::string& value) const {
  const std::size_t c = column(name);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows_.size(); ++i)
    if (format_cell(rows_[i][c]) == value) out.push_back(i);
  return out;
}

std::string format_cell(const Cell& cell) {
  if (std::holds_alternative<std::monostate>(cell)) return {};
  if (const auto* l = std::get_if<long>(&cell)) return std::to_string(*l);
  if (const auto* s = std::get_if<std::string>(&cell)) return *s;
  const double v = std::get<double>(cell);
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string ResultTable::to_csv() const {
  std::string out;
  const auto line = [&out](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(fields[i]);
    }
    out += "\r\n";
  };
  line(columns_);
  for (const auto& row : rows_) {
    std::vector<std::string> fields;
    fields.reserve(row.size());
    for (const auto& c : row) fields.push_back(format_cell(c));
    line(fields);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_svg(const ResultTable& table, const PlotSpec& plot) {
  struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
  };
  std::vector<Series> series;
  const auto series_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < series.size(); ++i)
      if (series[i].name == name) return i;
    series.push_back({name, {}});
    return series.size() - 1;
  };
  for (std::size_t r = 0; r < table.size(); ++r) {
    if (!plot.filter_column.empty() && table.text(r, plot.filter_column) != plot.filter_value) continue;
    const double x = table.number(r, plot.x), y = table.number(r, plot.y);
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    if ((plot.log_x && x <= 0) || (plot.log_y && y <= 0)) continue;
    const std::string name = plot.series.empty() ? plot.y : table.text(r, plot.series);
    series[series_index(name)].points.emplace_back(x, y);
  }
  for (auto& s : series) {
    std::stable_sort(s.points.begin(), s.points.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    if (!plot.mean) continue;
    std::vector<std::pair<double, double>> averaged;
    for (std::size_t i = 0; i < s.points.size();) {
      std::size_t j = i;
      double sum = 0.0;
      while (j < s.points.size() && s.points[j].first == s.points[i].first) sum += s.points[j++].second;
      averaged.emplace_back(s.points[i].first, sum / static_cast<double>(j - i));
      i = j;
    }
    s.points = std::move(averaged);
  }

  const auto tx = [&](double v) { return plot.log_x ? std::log10(v) : v; };
  const auto ty = [&](double v) { return plot.log_y ? std::log10(v) : v; };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      x0 = std::min(x0, tx(x));
      x1 = std::max(x1, tx(x));
      y0 = std::min(y0, ty(y));
      y1 = std::max(y1, ty(y));
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;

  constexpr double W = 640, H = 420, L = 70, R = 170, T = 40, B = 50;
  const auto px = [&](double x) { return L + (tx(x) - x0) / (x1 - x0) * (W - L - R); };
  const auto py = [&](double y) { return H - B - (ty(y) - y0) / (y1 - y0) * (H - T - B); };
  const auto label = [](double v, bool log) { return fmt(log ? std::pow(10.0, v) : v); };
  static const char* palette[] = {"#d62728", "#1f77b4", "#2ca02c", "#7f7f7f", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#e377c2", "#17becf", "#bcbd22"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(plot.title)
      << "</text>\n";
  svg << "<polyline fill=\"none\" stroke=\"black\" points=\"" << L << ',' << T << ' ' << L << ',' << H - B << ' '
      << W - R << ',' << H - B << "\"/>\n";
  svg << "<text x=\"" << L << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << label(x0, plot.log_x)
      << "</text>\n";
  svg << "<text x=\"" << W - R << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << label(x1, plot.log_x)
      << "</text>\n";
  svg << "<text x=\"" << L - 6 << "\" y=\"" << H - B << "\" text-anchor=\"end\">" << label(y0, plot.log_y)
      << "</text>\n";
  svg << "<text x=\"" << L - 6 << "\" y=\"" << T + 4 << "\" text-anchor=\"end\">" << label(y1, plot.log_y)
      << "</text>\n";
  svg << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
      << xml_escape(plot.x + (plot.log_x ? " (log)" : "")) << "</text>\n";
  svg << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (T + H - B) / 2 << ")\">" << xml_escape(plot.y + (plot.log_y ? " (log)" : "")) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = palette[i % (sizeof palette / sizeof *palette)];
    svg << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << color << "\" points=\"";
    for (const auto& [x, y] : series[i].points) svg << fmt(px(x)) << ',' << fmt(py(y)) << ' ';
    svg << "\"/>\n";
    const double ly = T + 16.0 * static_cast<double>(i);
    svg << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 32 << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << W - R + 38 << "\" y=\"" << ly + 4 << "\">" << xml_escape(series[i].name) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << contents;
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace sr3::harness
