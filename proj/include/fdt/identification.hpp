#pragma once

// Graph-level identification decisions for the anchored front-door model and
// the symbolic nested propensity score.

#include <algorithm>
#include <deque>
#include <numeric>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "fdt/discrete.hpp"
#include "fdt/graph.hpp"
#include "fdt/roles.hpp"

namespace fdt {

// Small expression tree over conditional factors p(var | given).
class KernelExpression {
 public:
  struct Factor {
    Vertex var;
    std::vector<Vertex> given;
  };
  struct Product {
    std::vector<KernelExpression> terms;
  };
  struct SumOver {
    Vertex var;
    std::shared_ptr<const KernelExpression> body;
  };
  struct Quotient {
    std::shared_ptr<const KernelExpression> num;
    std::shared_ptr<const KernelExpression> den;
  };
  using Node = std::variant<Factor, Product, SumOver, Quotient>;

  static KernelExpression factor(Vertex var, std::vector<Vertex> given) {
    return KernelExpression(Factor{std::move(var), std::move(given)});
  }
  static KernelExpression product(std::vector<KernelExpression> terms) {
    return KernelExpression(Product{std::move(terms)});
  }
  static KernelExpression sum_over(Vertex var, KernelExpression body) {
    return KernelExpression(SumOver{std::move(var), std::make_shared<const KernelExpression>(std::move(body))});
  }
  static KernelExpression quotient(KernelExpression num, KernelExpression den) {
    return KernelExpression(Quotient{std::make_shared<const KernelExpression>(std::move(num)),
                                     std::make_shared<const KernelExpression>(std::move(den))});
  }

  const Node& node() const { return node_; }

  // Every variable mentioned anywhere in the expression.
  VertexSet variables() const {
    VertexSet out;
    collect(out);
    return out;
  }

  std::string to_string() const {
    return std::visit(
        [](const auto& n) -> std::string {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Factor>) {
            std::string s = "p(" + n.var;
            if (!n.given.empty()) {
              s += "|";
              for (std::size_t i = 0; i < n.given.size(); ++i) s += (i ? "," : "") + n.given[i];
            }
            return s + ")";
          } else if constexpr (std::is_same_v<T, Product>) {
            std::string s;
            for (std::size_t i = 0; i < n.terms.size(); ++i) s += (i ? "*" : "") + n.terms[i].to_string();
            return n.terms.empty() ? "1" : s;
          } else if constexpr (std::is_same_v<T, SumOver>) {
            return "sum_" + n.var + "[" + n.body->to_string() + "]";
          } else {
            return n.num->to_string() + " / " + n.den->to_string();
          }
        },
        node_);
  }

  // Value at `at`, which must assign every free variable. Factors are read
  // off the joint as ratios of marginals.
  double evaluate(const DiscreteJoint& joint, const Assignment& at) const {
    return std::visit(
        [&](const auto& n) -> double {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Factor>) {
            Assignment given;
            for (const auto& g : n.given) given[g] = at.at(g);
            return joint.conditional({{n.var, at.at(n.var)}}, given);
          } else if constexpr (std::is_same_v<T, Product>) {
            // a zero factor makes later, possibly undefined, factors irrelevant
            double v = 1.0;
            for (const auto& t : n.terms) {
              v *= t.evaluate(joint, at);
              if (v == 0.0) break;
            }
            return v;
          } else if constexpr (std::is_same_v<T, SumOver>) {
            double v = 0.0;
            Assignment local = at;
            for (std::size_t k = 0; k < joint.support(n.var).size(); ++k) {
              local[n.var] = k;
              v += n.body->evaluate(joint, local);
            }
            return v;
          } else {
            double den = n.den->evaluate(joint, at);
            if (den == 0.0) throw PositivityError("kernel expression: zero denominator");
            return n.num->evaluate(joint, at) / den;
          }
        },
        node_);
  }

 private:
  explicit KernelExpression(Node n) : node_(std::move(n)) {}

  void collect(VertexSet& out) const {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Factor>) {
            out.insert(n.var);
            out.insert(n.given.begin(), n.given.end());
          } else if constexpr (std::is_same_v<T, Product>) {
            for (const auto& t : n.terms) t.collect(out);
          } else if constexpr (std::is_same_v<T, SumOver>) {
            out.insert(n.var);
            n.body->collect(out);
          } else {
            n.num->collect(out);
            n.den->collect(out);
          }
        },
        node_);
  }

  Node node_;
};

namespace detail {

inline void require_roles_in(const MixedGraph& g, const RoleAssignment& roles) {
  roles.validate();
  for (const auto& v : roles.all())
    if (!g.is_random(v)) throw ValidationError("roles: " + v + " is not a random vertex of the graph");
}

inline std::vector<Vertex> role_priority(const RoleAssignment& r) {
  std::vector<Vertex> out(r.c.begin(), r.c.end());
  out.push_back(r.z);
  out.push_back(r.a);
  out.insert(out.end(), r.m.begin(), r.m.end());
  out.push_back(r.y);
  return out;
}

}  // namespace detail

// Tian's criterion: no child of A lies in A's district.
inline bool tian_identifiable(const MixedGraph& g, const Vertex& a) {
  if (!g.is_random(a)) throw GraphError("tian_identifiable: " + a + " is not a random vertex");
  VertexSet dis = district_of(g, a);
  for (const auto& c : g.children(a))
    if (dis.count(c)) return false;
  return true;
}

// p(. | do(m)) is identified by fixing M and Z is m-separated from Y given C
// in the resulting CADMG.
inline bool verma_constraint_implied(const MixedGraph& g, const RoleAssignment& roles) {
  detail::require_roles_in(g, roles);
  MixedGraph cadmg;
  try {
    cadmg = fix_set(g, VertexSet(roles.m.begin(), roles.m.end())).first;
  } catch (const GraphError&) {
    return false;
  }
  return m_separated(cadmg, {roles.z}, {roles.y}, VertexSet(roles.c.begin(), roles.c.end()));
}

// Graphical versions of true mediation and anchor relevance.
inline bool anchor_admissible(const MixedGraph& g, const RoleAssignment& roles) {
  detail::require_roles_in(g, roles);
  const VertexSet med(roles.m.begin(), roles.m.end());

  // A -> m1 -> ... -> Y with every intermediate a mediator.
  bool mediated = false;
  {
    VertexSet seen;
    std::deque<Vertex> todo;
    for (const auto& c : g.children(roles.a))
      if (med.count(c) && seen.insert(c).second) todo.push_back(c);
    while (!todo.empty() && !mediated) {
      Vertex v = todo.front();
      todo.pop_front();
      for (const auto& c : g.children(v)) {
        if (c == roles.y) mediated = true;
        if (med.count(c) && seen.insert(c).second) todo.push_back(c);
      }
    }
  }
  if (!mediated) return false;
  if (g.descendants(roles.a).count(roles.z)) return false;
  if (!g.has_di(roles.z, roles.a) && !g.has_bi(roles.z, roles.a)) return false;

  VertexSet cond = med;
  cond.insert(roles.a);
  cond.insert(roles.c.begin(), roles.c.end());
  return !m_separated(g, {roles.z}, {roles.y}, cond);
}

// (I1) Z -> A or Z <-> A; (I2) Z and Y m-separated given C once A and its
// edges are removed.
inline bool iv_conditions(const MixedGraph& g, const RoleAssignment& roles) {
  detail::require_roles_in(g, roles);
  if (!g.has_di(roles.z, roles.a) && !g.has_bi(roles.z, roles.a)) return false;
  VertexSet keep(g.vertices().begin(), g.vertices().end());
  keep.erase(roles.a);
  return m_separated(g.induced(keep), {roles.z}, {roles.y}, VertexSet(roles.c.begin(), roles.c.end()));
}

// All ADMGs over {Z, A, M, Y} drawn from the anchored front-door pattern
// (A->M->Y and A<->Y always present; Z->A, Z<->A, Z->M, Z<->M optional)
// that carry the Verma constraint with an admissible anchor.
inline std::vector<MixedGraph> enumerate_constraint_admgs() {
  const RoleAssignment roles;
  const std::vector<DiEdge> di_opt{{"Z", "A"}, {"Z", "M"}};
  const std::vector<BiEdge> bi_opt{{"A", "Z"}, {"M", "Z"}};
  std::vector<MixedGraph> out;
  for (unsigned mask = 0; mask < 16; ++mask) {
    GraphSpec spec{{"Z", "A", "M", "Y"}, {}, {{"A", "M"}, {"M", "Y"}}, {{"A", "Y"}}};
    for (unsigned k = 0; k < 2; ++k) {
      if (mask & (1u << k)) spec.di_edges.push_back(di_opt[k]);
      if (mask & (1u << (k + 2))) spec.bi_edges.push_back(bi_opt[k]);
    }
    MixedGraph g = build_graph(spec);
    if (verma_constraint_implied(g, roles) && anchor_admissible(g, roles)) out.push_back(std::move(g));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// q~(A | Y, Z, M, C) = p(A|C,Z) p(Y|C,Z,A,M) / sum_A of the same.
inline KernelExpression lemma_propensity(const RoleAssignment& r) {
  std::vector<Vertex> a_given(r.c.begin(), r.c.end());
  a_given.push_back(r.z);
  std::vector<Vertex> y_given = a_given;
  y_given.push_back(r.a);
  y_given.insert(y_given.end(), r.m.begin(), r.m.end());
  auto body = KernelExpression::product(
      {KernelExpression::factor(r.a, a_given), KernelExpression::factor(r.y, y_given)});
  return KernelExpression::quotient(body, KernelExpression::sum_over(r.a, body));
}

// q~ derived from the graph: the district kernel of A (Tian's factorization
// along a topological order) divided by its sum over A. Factors free of A
// cancel between numerator and denominator and are dropped.
inline KernelExpression nested_propensity(const MixedGraph& g, const RoleAssignment& roles) {
  detail::require_roles_in(g, roles);
  if (!tian_identifiable(g, roles.a))
    throw GraphError("nested_propensity: A has a bidirected path to one of its children");
  if (!verma_constraint_implied(g, roles))
    throw GraphError("nested_propensity: graph does not imply the Verma constraint");

  const VertexSet dis = district_of(g, roles.a);
  const auto order = topological_order(g, detail::role_priority(roles));
  std::vector<KernelExpression> depends;
  std::vector<Vertex> before;
  for (const auto& v : order) {
    if (dis.count(v)) {
      bool uses_a = v == roles.a || std::find(before.begin(), before.end(), roles.a) != before.end();
      if (uses_a) depends.push_back(KernelExpression::factor(v, before));
    }
    before.push_back(v);
  }
  auto body = KernelExpression::product(std::move(depends));
  return KernelExpression::quotient(body, KernelExpression::sum_over(roles.a, body));
}

struct IdFunctionalResult {
  DiscreteJoint post;            // p(C, Z, M, Y | do(a))
  double mean_via_propensity;    // sum of y * p(., y | do(a))
  double mean_via_gformula;      // generalized front-door formula evaluated directly
};

// p(C,Z,M,Y | do(a)) = p(C,Z,a,M,Y) / q~(a | Y,Z,M,C), and E[Y | do(a)] from
// both that table and the closed-form adjustment functional.
inline IdFunctionalResult id_functional_evaluate(const DiscreteJoint& joint, const RoleAssignment& roles,
                                                 double a_value) {
  roles.validate();
  for (const auto& v : roles.all())
    if (!joint.has(v)) throw ValidationError("id_functional_evaluate: joint lacks variable " + v);
  const std::size_t a_idx = joint.value_index(roles.a, a_value);
  const KernelExpression q = lemma_propensity(roles);

  std::vector<std::string> kept(roles.c.begin(), roles.c.end());
  kept.push_back(roles.z);
  kept.insert(kept.end(), roles.m.begin(), roles.m.end());
  kept.push_back(roles.y);

  std::vector<std::vector<double>> support;
  for (const auto& v : kept) support.push_back(joint.support(v));
  std::vector<double> probs;
  double mean = 0.0;
  const auto& ysupp = joint.support(roles.y);
  for (auto at : joint.enumerate(kept)) {
    if (joint.prob(at) == 0.0) {
      probs.push_back(0.0);
      continue;
    }
    at[roles.a] = a_idx;
    double qt = q.evaluate(joint, at);
    if (!(qt > 0.0)) throw PositivityError("id_functional_evaluate: nested propensity is zero");
    double p = joint.prob(at) / qt;
    probs.push_back(p);
    mean += p * ysupp[at.at(roles.y)];
  }
  double total = std::accumulate(probs.begin(), probs.end(), 0.0);
  for (auto& p : probs) p /= total;  // renormalize rounding only

  // sum_{c,z,m} p(c,z) p(m|a,z,c) sum_a' p(a'|z,c) E[Y|c,z,a',m]
  std::vector<std::string> base(roles.c.begin(), roles.c.end());
  base.push_back(roles.z);
  double direct = 0.0;
  for (const auto& cz : joint.enumerate(base)) {
    double p_cz = joint.prob(cz);
    if (p_cz == 0.0) continue;
    for (const auto& mm : joint.enumerate(roles.m)) {
      Assignment given = cz;
      given[roles.a] = a_idx;
      double p_m = joint.conditional(mm, given);
      double inner = 0.0;
      for (std::size_t a2 = 0; a2 < joint.support(roles.a).size(); ++a2) {
        Assignment ag = cz;
        double p_a = joint.conditional({{roles.a, a2}}, cz);
        if (p_a == 0.0) continue;
        ag[roles.a] = a2;
        for (const auto& [k, v] : mm) ag[k] = v;
        inner += p_a * joint.expectation(roles.y, ag);
      }
      direct += p_cz * p_m * inner;
    }
  }
  return {DiscreteJoint(kept, support, probs), mean, direct};
}

}  // namespace fdt
