#pragma once

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fdt/error.hpp"

namespace fdt {

// Anchor Z, treatment A, ordered mediators M, outcome Y, covariates C.
struct RoleAssignment {
  std::string z = "Z";
  std::string a = "A";
  std::vector<std::string> m{"M"};
  std::string y = "Y";
  std::vector<std::string> c;

  std::vector<std::string> all() const {
    std::vector<std::string> out{z, a};
    out.insert(out.end(), m.begin(), m.end());
    out.push_back(y);
    out.insert(out.end(), c.begin(), c.end());
    return out;
  }

  void validate() const {
    if (z.empty() || a.empty() || y.empty()) throw ValidationError("roles: Z, A and Y are required");
    if (m.empty()) throw ValidationError("roles: at least one mediator is required");
    std::set<std::string> seen;
    for (const auto& v : all()) {
      if (v.empty()) throw ValidationError("roles: empty variable name");
      if (!seen.insert(v).second) throw ValidationError("roles: variable used twice: " + v);
    }
  }

  // "Z=Z,A=A,M=M1+M2,Y=Y,C=C1+C2"; repeated M= or C= keys also accumulate.
  static RoleAssignment parse(const std::string& text) {
    RoleAssignment r;
    r.m.clear();
    bool got_z = false, got_a = false, got_y = false;
    std::stringstream ss(text);
    std::string item;
    auto split_plus = [](const std::string& s) {
      std::vector<std::string> out;
      std::stringstream parts(s);
      std::string p;
      while (std::getline(parts, p, '+'))
        if (!p.empty()) out.push_back(p);
      return out;
    };
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      auto eq = item.find('=');
      if (eq == std::string::npos) throw ValidationError("roles: expected KEY=VALUE, got '" + item + "'");
      std::string key = item.substr(0, eq), value = item.substr(eq + 1);
      if (key == "Z") {
        r.z = value;
        got_z = true;
      } else if (key == "A") {
        r.a = value;
        got_a = true;
      } else if (key == "Y") {
        r.y = value;
        got_y = true;
      } else if (key == "M") {
        for (auto& v : split_plus(value)) r.m.push_back(v);
      } else if (key == "C") {
        for (auto& v : split_plus(value)) r.c.push_back(v);
      } else {
        throw ValidationError("roles: unknown role key '" + key + "'");
      }
    }
    if (!got_z || !got_a || !got_y || r.m.empty())
      throw ValidationError("roles: Z, A, M and Y must all be given");
    r.validate();
    return r;
  }

  std::string to_string() const {
    auto plus = [](const std::vector<std::string>& v) {
      std::string s;
      for (const auto& x : v) s += (s.empty() ? "" : "+") + x;
      return s;
    };
    std::string out = "Z=" + z + ",A=" + a + ",M=" + plus(m) + ",Y=" + y;
    if (!c.empty()) out += ",C=" + plus(c);
    return out;
  }
};

}  // namespace fdt
