#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fdt/error.hpp"
#include "fdt/roles.hpp"

namespace fdt {

enum class ColumnKind { binary, continuous };

inline const char* to_string(ColumnKind k) { return k == ColumnKind::binary ? "binary" : "continuous"; }

// Immutable columnar table. Rows may carry frequency weights so that an
// exact probability table can stand in for a sample; empirical averages are
// then sum_i f_i x_i / sum_i f_i.
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::vector<std::string> names, std::vector<std::vector<double>> columns,
          std::vector<double> frequencies = {})
      : names_(std::move(names)), cols_(std::move(columns)), freq_(std::move(frequencies)) {
    if (names_.size() != cols_.size()) throw ValidationError("dataset: names/columns size mismatch");
    if (names_.empty()) throw ValidationError("dataset: no columns");
    n_ = cols_[0].size();
    if (n_ == 0) throw ValidationError("dataset: no rows");
    for (std::size_t j = 0; j < names_.size(); ++j) {
      if (names_[j].empty() || names_[j].find(':') != std::string::npos)
        throw ValidationError("dataset: invalid column name '" + names_[j] + "'");
      if (!index_.emplace(names_[j], j).second) throw ValidationError("dataset: duplicate column " + names_[j]);
      if (cols_[j].size() != n_) throw ValidationError("dataset: ragged column " + names_[j]);
      bool binary = true;
      for (double v : cols_[j]) {
        if (!std::isfinite(v)) throw ValidationError("dataset: non-finite value in column " + names_[j]);
        if (v != 0.0 && v != 1.0) binary = false;
      }
      kinds_.push_back(binary ? ColumnKind::binary : ColumnKind::continuous);
    }
    if (!freq_.empty()) {
      if (freq_.size() != n_) throw ValidationError("dataset: frequency vector has wrong length");
      for (double f : freq_)
        if (!(f >= 0.0) || !std::isfinite(f)) throw ValidationError("dataset: frequencies must be finite and >= 0");
    }
  }

  std::size_t n() const { return n_; }
  const std::vector<std::string>& names() const { return names_; }
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  const std::vector<double>& column(const std::string& name) const { return cols_[index_of(name)]; }
  ColumnKind kind(const std::string& name) const { return kinds_[index_of(name)]; }
  bool is_binary(const std::string& name) const { return kind(name) == ColumnKind::binary; }

  bool weighted_rows() const { return !freq_.empty(); }
  double frequency(std::size_t i) const { return freq_.empty() ? 1.0 : freq_[i]; }
  double total_frequency() const {
    if (freq_.empty()) return static_cast<double>(n_);
    double s = 0.0;
    for (double f : freq_) s += f;
    return s;
  }

  // Value of a term: a column name or a ':'-joined product of column names.
  // `overrides` replaces whole columns by constants.
  double term(const std::string& t, std::size_t row, const std::map<std::string, double>& overrides = {}) const {
    double v = 1.0;
    std::size_t start = 0;
    while (true) {
      std::size_t end = t.find(':', start);
      std::string part = t.substr(start, end == std::string::npos ? std::string::npos : end - start);
      auto o = overrides.find(part);
      v *= o != overrides.end() ? o->second : cols_[index_of(part)][row];
      if (end == std::string::npos) break;
      start = end + 1;
    }
    return v;
  }

  void require_term(const std::string& t) const {
    std::stringstream ss(t);
    std::string part;
    while (std::getline(ss, part, ':'))
      if (!has(part)) throw ValidationError("dataset: unknown column " + part);
  }

  const std::optional<RoleAssignment>& roles() const { return roles_; }
  const RoleAssignment& require_roles() const {
    if (!roles_) throw ValidationError("dataset: no role assignment");
    return *roles_;
  }

  Dataset with_roles(const RoleAssignment& r) const {
    r.validate();
    for (const auto& v : r.all())
      if (!has(v)) throw ValidationError("roles: unknown role column " + v);
    Dataset out = *this;
    out.roles_ = r;
    return out;
  }

  // Rows in the given order (duplicates allowed); frequencies follow.
  Dataset take(const std::vector<std::size_t>& rows) const {
    std::vector<std::vector<double>> cols(names_.size());
    for (std::size_t j = 0; j < names_.size(); ++j) {
      cols[j].reserve(rows.size());
      for (auto i : rows) cols[j].push_back(cols_[j].at(i));
    }
    std::vector<double> freq;
    if (!freq_.empty())
      for (auto i : rows) freq.push_back(freq_[i]);
    Dataset out(names_, std::move(cols), std::move(freq));
    out.roles_ = roles_;
    return out;
  }

  // Strict CSV: mandatory header, '.' decimals, no empty or non-numeric cells.
  static Dataset read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("csv: empty input");
    strip_cr(line);
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    std::vector<std::string> header = split(line);
    for (auto& h : header)
      if (h.empty()) throw ValidationError("csv: empty header field");
    std::vector<std::vector<double>> cols(header.size());
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      strip_cr(line);
      if (line.empty()) continue;
      auto cells = split(line);
      if (cells.size() != header.size())
        throw ValidationError("csv: ragged row at line " + std::to_string(lineno));
      for (std::size_t j = 0; j < cells.size(); ++j) {
        const std::string& c = cells[j];
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
        if (c.empty() || ec != std::errc() || ptr != c.data() + c.size() || !std::isfinite(v))
          throw ValidationError("csv: non-numeric cell '" + c + "' at line " + std::to_string(lineno));
        cols[j].push_back(v);
      }
    }
    if (cols.empty() || cols[0].empty()) throw ValidationError("csv: no data rows");
    return Dataset(header, std::move(cols));
  }

  static Dataset read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read " + path);
    return read_csv(in);
  }

  void write_csv(std::ostream& out) const {
    for (std::size_t j = 0; j < names_.size(); ++j) out << (j ? "," : "") << names_[j];
    out << "\n";
    char buf[32];
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < names_.size(); ++j) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, cols_[j][i]);
        (void)ec;
        if (j) out << ',';
        out.write(buf, ptr - buf);
      }
      out << "\n";
    }
  }

  void write_csv_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    write_csv(out);
  }

 private:
  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("dataset: unknown column " + name);
    return it->second;
  }

  static void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  }

  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      std::size_t end = line.find(',', start);
      std::string cell = line.substr(start, end == std::string::npos ? std::string::npos : end - start);
      auto first = cell.find_first_not_of(" \t");
      auto last = cell.find_last_not_of(" \t");
      out.push_back(first == std::string::npos ? "" : cell.substr(first, last - first + 1));
      if (end == std::string::npos) break;
      start = end + 1;
    }
    return out;
  }

  std::vector<std::string> names_;
  std::vector<std::vector<double>> cols_;
  std::vector<double> freq_;
  std::vector<ColumnKind> kinds_;
  std::map<std::string, std::size_t> index_;
  std::size_t n_ = 0;
  std::optional<RoleAssignment> roles_;
};

}  // namespace fdt
