#include "seqdiff/eval/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "seqdiff/tensor.hpp"

namespace seqdiff::eval {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void MetricsReport::set(const std::string& key, double value) { set_text(key, format_number(value)); }

void MetricsReport::set_text(const std::string& key, const std::string& value) {
  require(!key.empty() && key.find_first_of(" =\n") == std::string::npos, "report: bad key '" + key + "'");
  require(value.find('\n') == std::string::npos, "report: value contains a newline");
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

bool MetricsReport::contains(const std::string& key) const {
  for (const auto& [k, _] : entries_) {
    if (k == key) return true;
  }
  return false;
}

const std::string& MetricsReport::text(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw ContractViolation("report: no entry '" + key + "'");
}

double MetricsReport::number(const std::string& key) const {
  const auto& v = text(key);
  if (v == "nan") return std::nan("");
  if (v == "inf") return INFINITY;
  if (v == "-inf") return -INFINITY;
  return std::stod(v);
}

void MetricsReport::merge(const std::string& prefix, const MetricsReport& other) {
  for (const auto& [k, v] : other.entries_) set_text(prefix + "." + k, v);
}

void MetricsReport::erase_prefix(const std::string& prefix) {
  const std::string p = prefix + ".";
  std::erase_if(entries_, [&](const auto& e) { return e.first.compare(0, p.size(), p) == 0; });
}

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  os << "# metrics\n";
  for (const auto& [k, v] : entries_) os << k << " = " << v << '\n';
  return os.str();
}

MetricsReport MetricsReport::from_text(const std::string& text) {
  MetricsReport r;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    require(eq != std::string::npos, "report: malformed line '" + line + "'");
    r.set_text(line.substr(0, eq), line.substr(eq + 3));
  }
  return r;
}

void MetricsReport::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("report: cannot write " + path);
  os << to_text();
}

MetricsReport MetricsReport::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("report: cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return from_text(ss.str());
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("csv: cannot write " + path);
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (const auto& row : rows) {
    require(row.size() == header.size(), "csv: row width does not match the header");
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_number(row[i]);
    os << '\n';
  }
}

}  // namespace seqdiff::eval
