#pragma once
// Named scalar results. Text form: a "# metrics" header line, then one
// `key = value` line per entry in insertion order. Numbers use 17
// significant digits.

#include <string>
#include <utility>
#include <vector>

namespace seqdiff::eval {

class MetricsReport {
 public:
  void set(const std::string& key, double value);
  void set_text(const std::string& key, const std::string& value);
  bool contains(const std::string& key) const;
  double number(const std::string& key) const;
  const std::string& text(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  /// Copies every entry of `other` under `prefix.`.
  void merge(const std::string& prefix, const MetricsReport& other);
  /// Drops every entry whose key starts with `prefix.`.
  void erase_prefix(const std::string& prefix);

  std::string to_text() const;
  static MetricsReport from_text(const std::string& text);
  void save(const std::string& path) const;
  static MetricsReport load(const std::string& path);

  bool operator==(const MetricsReport&) const = default;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::string format_number(double v);

/// Comma-separated table with a header row.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace seqdiff::eval
