#include "clab_tools/io.hpp"

#include "clab/types.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace clab::tools {

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Parameter, "cli.output", "cannot write '" + tmp + "'");
    out << content;
    out.flush();
    if (!out) throw Error(ErrorKind::Parameter, "cli.output", "write failed for '" + tmp + "'");
  }
  std::error_code ec;
  fs::rename(tmp, p, ec);
  if (ec) throw Error(ErrorKind::Parameter, "cli.output", "rename to '" + path + "' failed: " + ec.message());
}

Csv::Csv(std::vector<std::string> header) : header_(std::move(header)) {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (i) body_ += ',';
    body_ += header_[i];
  }
  body_ += '\n';
}

void Csv::row(const std::vector<double>& values) {
  if (values.size() != header_.size())
    throw Error(ErrorKind::Parameter, "cli.csv", "row width does not match the header");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) body_ += ',';
    body_ += fmt(values[i]);
  }
  body_ += '\n';
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Parameter, "cli.csv", "cannot read '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) return t;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (cell == "nan") row.push_back(std::nan(""));
      else if (cell == "inf") row.push_back(HUGE_VAL);
      else if (cell == "-inf") row.push_back(-HUGE_VAL);
      else {
        double v = 0.0;
        auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
          throw Error(ErrorKind::Parameter, "cli.csv", "bad number '" + cell + "' in " + path);
        row.push_back(v);
      }
    }
    if (row.size() != t.header.size())
      throw Error(ErrorKind::Parameter, "cli.csv", "ragged row in " + path);
    t.rows.push_back(std::move(row));
  }
  return t;
}

void Report::section(const std::string& name) {
  if (!body_.empty()) body_ += '\n';
  body_ += "[" + name + "]\n";
}

void Report::put(const std::string& key, const std::string& value) { body_ += key + " = " + value + '\n'; }

void Report::check(const std::string& name, bool ok, const std::string& detail) {
  body_ += "check " + name + " = " + (ok ? "PASS" : "FAIL");
  if (!detail.empty()) body_ += "  (" + detail + ")";
  body_ += '\n';
  if (!ok) {
    ++failed_;
    failures_.push_back(name);
  }
}

void Report::raw(const std::string& text) { body_ += text; }

}  // namespace clab::tools
