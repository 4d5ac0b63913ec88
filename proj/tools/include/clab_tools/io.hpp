#pragma once

#include <string>
#include <utility>
#include <vector>

namespace clab::tools {

// %.17g, "nan"/"inf"/"-inf" for the non-finite values. Locale independent.
std::string fmt(double x);

// Writes path.tmp and renames it over path.
void write_atomic(const std::string& path, const std::string& content);

class Csv {
public:
  explicit Csv(std::vector<std::string> header);
  void row(const std::vector<double>& values);
  const std::vector<std::string>& header() const { return header_; }
  std::string str() const { return body_; }

private:
  std::vector<std::string> header_;
  std::string body_;
};

// Parsed back for tests and schema checks.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  int column(const std::string& name) const;  // -1 if absent
};
CsvTable read_csv(const std::string& path);

// "key = value" lines in insertion order, with section headers.
class Report {
public:
  void section(const std::string& name);
  void put(const std::string& key, const std::string& value);
  void put(const std::string& key, double value) { put(key, fmt(value)); }
  void put(const std::string& key, long long value) { put(key, std::to_string(value)); }
  void put(const std::string& key, std::size_t value) { put(key, std::to_string(value)); }
  void put(const std::string& key, int value) { put(key, std::to_string(value)); }
  void put(const std::string& key, bool value) { put(key, std::string(value ? "true" : "false")); }
  void put(const std::string& key, const char* value) { put(key, std::string(value)); }
  // A criterion line: PASS/FAIL plus detail; remembered for all_pass().
  void check(const std::string& name, bool ok, const std::string& detail = "");
  void raw(const std::string& text);
  bool all_pass() const { return failed_ == 0; }
  int failed() const { return failed_; }
  const std::vector<std::string>& failures() const { return failures_; }
  std::string str() const { return body_; }

private:
  std::string body_;
  int failed_ = 0;
  std::vector<std::string> failures_;
};

}  // namespace clab::tools
