#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "fdt/error.hpp"

namespace fdt {

// Partial assignment: variable name -> index into that variable's support.
using Assignment = std::map<std::string, std::size_t>;

// Joint distribution over finitely-supported variables stored as a dense
// row-major table (last variable varies fastest).
class DiscreteJoint {
 public:
  DiscreteJoint() = default;

  DiscreteJoint(std::vector<std::string> names, std::vector<std::vector<double>> support,
                std::vector<double> probs)
      : names_(std::move(names)), support_(std::move(support)), probs_(std::move(probs)) {
    if (names_.size() != support_.size())
      throw ValidationError("DiscreteJoint: names/support size mismatch");
    std::size_t cells = 1;
    for (const auto& s : support_) {
      if (s.empty()) throw ValidationError("DiscreteJoint: empty support");
      cells *= s.size();
    }
    if (probs_.size() != cells) throw ValidationError("DiscreteJoint: wrong table size");
    double total = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("DiscreteJoint: bad probability");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError("DiscreteJoint: probabilities do not sum to 1");
  }

  // All variables binary with support {0, 1}.
  static DiscreteJoint binary(std::vector<std::string> names, std::vector<double> probs) {
    std::vector<std::vector<double>> support(names.size(), std::vector<double>{0.0, 1.0});
    return DiscreteJoint(std::move(names), std::move(support), std::move(probs));
  }

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<double>& support(std::size_t var) const { return support_.at(var); }
  const std::vector<double>& support(const std::string& name) const { return support_.at(index_of(name)); }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t cells() const { return probs_.size(); }

  bool has(const std::string& name) const {
    for (const auto& n : names_)
      if (n == name) return true;
    return false;
  }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return i;
    throw ValidationError("DiscreteJoint: unknown variable " + name);
  }

  std::size_t value_index(const std::string& name, double value) const {
    const auto& s = support(name);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] == value) return i;
    throw ValidationError("DiscreteJoint: value not in support of " + name);
  }

  std::vector<std::size_t> decode(std::size_t cell) const {
    std::vector<std::size_t> idx(names_.size());
    for (std::size_t k = names_.size(); k-- > 0;) {
      idx[k] = cell % support_[k].size();
      cell /= support_[k].size();
    }
    return idx;
  }

  Assignment assignment(std::size_t cell) const {
    Assignment out;
    auto idx = decode(cell);
    for (std::size_t k = 0; k < names_.size(); ++k) out[names_[k]] = idx[k];
    return out;
  }

  // P(event) for a partial assignment.
  double prob(const Assignment& event) const {
    std::vector<std::pair<std::size_t, std::size_t>> fixed;
    for (const auto& [name, v] : event) fixed.emplace_back(index_of(name), v);
    double total = 0.0;
    for (std::size_t c = 0; c < probs_.size(); ++c) {
      auto idx = decode(c);
      bool match = true;
      for (const auto& [k, v] : fixed)
        if (idx[k] != v) {
          match = false;
          break;
        }
      if (match) total += probs_[c];
    }
    return total;
  }

  double conditional(const Assignment& event, const Assignment& given) const {
    double den = prob(given);
    if (den <= 0.0) throw PositivityError("zero-probability conditioning event");
    Assignment both = given;
    for (const auto& [k, v] : event) both[k] = v;
    return prob(both) / den;
  }

  // E[var | given].
  double expectation(const std::string& var, const Assignment& given) const {
    const auto& s = support(var);
    double out = 0.0;
    for (std::size_t v = 0; v < s.size(); ++v) out += s[v] * conditional({{var, v}}, given);
    return out;
  }

  // Cells of the sub-table over `vars`, as assignments, in row-major order.
  std::vector<Assignment> enumerate(const std::vector<std::string>& vars) const {
    std::vector<Assignment> out{Assignment{}};
    for (const auto& name : vars) {
      std::vector<Assignment> next;
      for (const auto& partial : out)
        for (std::size_t v = 0; v < support(name).size(); ++v) {
          Assignment a = partial;
          a[name] = v;
          next.push_back(std::move(a));
        }
      out = std::move(next);
    }
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<double>> support_;
  std::vector<double> probs_;
};

}  // namespace fdt
