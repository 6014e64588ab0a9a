#pragma once

// Acyclic directed mixed graphs (ADMGs) and their conditional variants
// (CADMGs), with the fixing calculus used by the nested Markov factorization.

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fdt/error.hpp"

namespace fdt {

using Vertex = std::string;
using VertexSet = std::set<Vertex>;
using FixingSequence = std::vector<Vertex>;
using DiEdge = std::pair<Vertex, Vertex>;  // tail -> head
using BiEdge = std::pair<Vertex, Vertex>;  // stored (min, max)

// Unvalidated graph description; build_graph() turns it into a MixedGraph.
struct GraphSpec {
  std::vector<Vertex> vertices;
  std::vector<Vertex> fixed;
  std::vector<DiEdge> di_edges;
  std::vector<BiEdge> bi_edges;
};

inline std::string join(const VertexSet& s, const char* sep = ",") {
  std::string out;
  for (const auto& v : s) {
    if (!out.empty()) out += sep;
    out += v;
  }
  return out;
}

// Immutable, canonical mixed graph. Vertices in `fixed` carry only outgoing
// directed edges; the directed part is acyclic.
class MixedGraph {
 public:
  MixedGraph() = default;

  const std::vector<Vertex>& vertices() const { return vertices_; }
  const VertexSet& fixed() const { return fixed_; }
  const std::set<DiEdge>& di_edges() const { return di_; }
  const std::set<BiEdge>& bi_edges() const { return bi_; }

  bool has_vertex(const Vertex& v) const {
    return std::binary_search(vertices_.begin(), vertices_.end(), v);
  }
  bool is_fixed(const Vertex& v) const { return fixed_.count(v) > 0; }
  bool is_random(const Vertex& v) const { return has_vertex(v) && !is_fixed(v); }

  VertexSet random_vertices() const {
    VertexSet out;
    for (const auto& v : vertices_)
      if (!is_fixed(v)) out.insert(v);
    return out;
  }

  bool has_di(const Vertex& a, const Vertex& b) const { return di_.count({a, b}) > 0; }
  bool has_bi(const Vertex& a, const Vertex& b) const {
    return bi_.count(a < b ? BiEdge{a, b} : BiEdge{b, a}) > 0;
  }
  bool adjacent(const Vertex& a, const Vertex& b) const {
    return has_di(a, b) || has_di(b, a) || has_bi(a, b);
  }

  VertexSet parents(const Vertex& v) const {
    VertexSet out;
    for (const auto& [t, h] : di_)
      if (h == v) out.insert(t);
    return out;
  }
  VertexSet children(const Vertex& v) const {
    VertexSet out;
    for (const auto& [t, h] : di_)
      if (t == v) out.insert(h);
    return out;
  }
  VertexSet siblings(const Vertex& v) const {
    VertexSet out;
    for (const auto& [a, b] : bi_) {
      if (a == v) out.insert(b);
      if (b == v) out.insert(a);
    }
    return out;
  }

  VertexSet parents(const VertexSet& s) const {
    VertexSet out;
    for (const auto& v : s)
      for (const auto& p : parents(v)) out.insert(p);
    return out;
  }

  // Includes the members of `s` themselves.
  VertexSet ancestors(const VertexSet& s) const {
    VertexSet out = s;
    std::deque<Vertex> todo(s.begin(), s.end());
    while (!todo.empty()) {
      Vertex v = todo.front();
      todo.pop_front();
      for (const auto& p : parents(v))
        if (out.insert(p).second) todo.push_back(p);
    }
    return out;
  }

  // Includes `v`.
  VertexSet descendants(const Vertex& v) const {
    VertexSet out{v};
    std::deque<Vertex> todo{v};
    while (!todo.empty()) {
      Vertex u = todo.front();
      todo.pop_front();
      for (const auto& c : children(u))
        if (out.insert(c).second) todo.push_back(c);
    }
    return out;
  }

  // Subgraph on `keep`; edges with an endpoint outside `keep` are dropped.
  MixedGraph induced(const VertexSet& keep) const {
    MixedGraph g;
    for (const auto& v : vertices_)
      if (keep.count(v)) g.vertices_.push_back(v);
    for (const auto& v : fixed_)
      if (keep.count(v)) g.fixed_.insert(v);
    for (const auto& e : di_)
      if (keep.count(e.first) && keep.count(e.second)) g.di_.insert(e);
    for (const auto& e : bi_)
      if (keep.count(e.first) && keep.count(e.second)) g.bi_.insert(e);
    return g;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["vertices"] = vertices_;
    j["fixed"] = std::vector<Vertex>(fixed_.begin(), fixed_.end());
    auto di = nlohmann::ordered_json::array();
    for (const auto& [a, b] : di_) di.push_back({a, b});
    auto bi = nlohmann::ordered_json::array();
    for (const auto& [a, b] : bi_) bi.push_back({a, b});
    j["di_edges"] = di;
    j["bi_edges"] = bi;
    return j;
  }

  // Canonical serialization; two graphs are equal iff these strings are.
  std::string serialize() const { return to_json().dump(); }

  friend bool operator==(const MixedGraph& a, const MixedGraph& b) {
    return a.vertices_ == b.vertices_ && a.fixed_ == b.fixed_ && a.di_ == b.di_ &&
           a.bi_ == b.bi_;
  }
  friend bool operator<(const MixedGraph& a, const MixedGraph& b) {
    return a.serialize() < b.serialize();
  }

 private:
  friend MixedGraph build_graph(const GraphSpec& spec);
  friend MixedGraph fix(const MixedGraph& g, const Vertex& v);
  friend MixedGraph latent_project(const MixedGraph& dag, const VertexSet& observed);

  std::vector<Vertex> vertices_;
  VertexSet fixed_;
  std::set<DiEdge> di_;
  std::set<BiEdge> bi_;
};

namespace detail {

inline bool has_directed_cycle(const std::vector<Vertex>& vertices,
                               const std::set<DiEdge>& edges) {
  std::map<Vertex, int> indegree;
  for (const auto& v : vertices) indegree[v] = 0;
  for (const auto& e : edges) ++indegree[e.second];
  std::deque<Vertex> ready;
  for (const auto& [v, d] : indegree)
    if (d == 0) ready.push_back(v);
  std::size_t seen = 0;
  while (!ready.empty()) {
    Vertex v = ready.front();
    ready.pop_front();
    ++seen;
    for (const auto& e : edges)
      if (e.first == v && --indegree[e.second] == 0) ready.push_back(e.second);
  }
  return seen != vertices.size();
}

}  // namespace detail

inline MixedGraph build_graph(const GraphSpec& spec) {
  MixedGraph g;
  std::set<Vertex> seen;
  for (const auto& v : spec.vertices) {
    if (v.empty()) throw GraphError("empty vertex name");
    if (!seen.insert(v).second) throw GraphError("duplicate vertex: " + v);
  }
  g.vertices_.assign(seen.begin(), seen.end());
  auto require = [&](const Vertex& v) {
    if (!seen.count(v)) throw GraphError("unknown vertex: " + v);
  };
  for (const auto& v : spec.fixed) {
    require(v);
    g.fixed_.insert(v);
  }
  for (const auto& [a, b] : spec.di_edges) {
    require(a);
    require(b);
    if (a == b) throw GraphError("self-loop on " + a);
    if (g.fixed_.count(b)) throw GraphError("directed edge into fixed vertex " + b);
    g.di_.insert({a, b});
  }
  for (const auto& [a, b] : spec.bi_edges) {
    require(a);
    require(b);
    if (a == b) throw GraphError("bidirected self-loop on " + a);
    if (g.fixed_.count(a) || g.fixed_.count(b))
      throw GraphError("bidirected edge at fixed vertex " + (g.fixed_.count(a) ? a : b));
    g.bi_.insert(a < b ? BiEdge{a, b} : BiEdge{b, a});
  }
  if (detail::has_directed_cycle(g.vertices_, g.di_))
    throw GraphError("directed cycle in graph");
  return g;
}

inline MixedGraph graph_from_json(const nlohmann::json& j) {
  GraphSpec spec;
  try {
    spec.vertices = j.at("vertices").get<std::vector<Vertex>>();
    if (j.contains("fixed")) spec.fixed = j.at("fixed").get<std::vector<Vertex>>();
    auto edges = [&](const char* key) {
      std::vector<std::pair<Vertex, Vertex>> out;
      if (!j.contains(key)) return out;
      for (const auto& e : j.at(key)) {
        if (!e.is_array() || e.size() != 2) throw GraphError(std::string("malformed edge in ") + key);
        out.emplace_back(e[0].get<Vertex>(), e[1].get<Vertex>());
      }
      return out;
    };
    spec.di_edges = edges("di_edges");
    spec.bi_edges = edges("bi_edges");
  } catch (const nlohmann::json::exception& e) {
    throw GraphError(std::string("malformed graph JSON: ") + e.what());
  }
  return build_graph(spec);
}

inline MixedGraph parse_graph(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw GraphError(std::string("malformed graph JSON: ") + e.what());
  }
  return graph_from_json(j);
}

// Bidirected-connected component of random vertex `v`.
inline VertexSet district_of(const MixedGraph& g, const Vertex& v) {
  if (!g.is_random(v)) throw GraphError("district_of: " + v + " is not a random vertex");
  VertexSet out{v};
  std::deque<Vertex> todo{v};
  while (!todo.empty()) {
    Vertex u = todo.front();
    todo.pop_front();
    for (const auto& s : g.siblings(u))
      if (out.insert(s).second) todo.push_back(s);
  }
  return out;
}

// Partition of the random vertices, ordered by least member.
inline std::vector<VertexSet> districts(const MixedGraph& g) {
  std::vector<VertexSet> out;
  VertexSet covered;
  for (const auto& v : g.vertices()) {
    if (g.is_fixed(v) || covered.count(v)) continue;
    VertexSet d = district_of(g, v);
    covered.insert(d.begin(), d.end());
    out.push_back(std::move(d));
  }
  return out;
}

// m-separation of X and Y given S. Fixed vertices act as conditioned
// context. Reachability runs over (vertex, arrowhead-at-vertex) states; a
// collider passes iff it is an ancestor of the conditioning set.
inline bool m_separated(const MixedGraph& g, const VertexSet& X, const VertexSet& Y,
                        const VertexSet& S) {
  if (X.empty() || Y.empty()) throw GraphError("m_separated: X and Y must be nonempty");
  for (const auto* set : {&X, &Y, &S})
    for (const auto& v : *set)
      if (!g.has_vertex(v)) throw GraphError("m_separated: unknown vertex " + v);
  for (const auto& v : X)
    if (Y.count(v) || S.count(v)) throw GraphError("m_separated: X, Y, S must be disjoint");
  for (const auto& v : Y)
    if (S.count(v)) throw GraphError("m_separated: X, Y, S must be disjoint");

  VertexSet cond = S;
  for (const auto& w : g.fixed())
    if (!X.count(w) && !Y.count(w)) cond.insert(w);
  const VertexSet anc = g.ancestors(cond);

  struct Step {
    Vertex to;
    bool head_at_from;
    bool head_at_to;
  };
  auto steps = [&](const Vertex& v) {
    std::vector<Step> out;
    for (const auto& c : g.children(v)) out.push_back({c, false, true});
    for (const auto& p : g.parents(v)) out.push_back({p, true, false});
    for (const auto& s : g.siblings(v)) out.push_back({s, true, true});
    return out;
  };

  std::set<std::pair<Vertex, bool>> visited;
  std::deque<std::pair<Vertex, bool>> todo;
  for (const auto& x : X)
    for (const auto& st : steps(x))
      if (visited.insert({st.to, st.head_at_to}).second) todo.push_back({st.to, st.head_at_to});

  while (!todo.empty()) {
    auto [v, into] = todo.front();
    todo.pop_front();
    if (Y.count(v)) return false;
    if (X.count(v)) continue;
    for (const auto& st : steps(v)) {
      bool collider = into && st.head_at_from;
      bool pass = collider ? anc.count(v) > 0 : cond.count(v) == 0;
      if (pass && visited.insert({st.to, st.head_at_to}).second)
        todo.push_back({st.to, st.head_at_to});
    }
  }
  return true;
}

// No other random vertex is both a descendant of v and in v's district.
inline bool fixable(const MixedGraph& g, const Vertex& v) {
  if (!g.has_vertex(v)) throw GraphError("fixable: unknown vertex " + v);
  if (g.is_fixed(v)) throw GraphError("fixable: " + v + " is already fixed");
  VertexSet dis = district_of(g, v);
  for (const auto& d : g.descendants(v))
    if (d != v && dis.count(d)) return false;
  return true;
}

inline MixedGraph fix(const MixedGraph& g, const Vertex& v) {
  if (!fixable(g, v)) throw GraphError("fix: " + v + " is not fixable");
  MixedGraph out = g;
  out.fixed_.insert(v);
  for (auto it = out.di_.begin(); it != out.di_.end();)
    it = it->second == v ? out.di_.erase(it) : std::next(it);
  for (auto it = out.bi_.begin(); it != out.bi_.end();)
    it = (it->first == v || it->second == v) ? out.bi_.erase(it) : std::next(it);
  return out;
}

// Fixes every member of S, choosing the least fixable vertex at each step.
// Fixing never makes another vertex unfixable, so the greedy order fails
// only when no valid order exists.
inline std::pair<MixedGraph, FixingSequence> fix_set(const MixedGraph& g, const VertexSet& S) {
  for (const auto& v : S)
    if (!g.is_random(v)) throw GraphError("fix_set: " + v + " is not a random vertex");
  MixedGraph cur = g;
  FixingSequence seq;
  VertexSet remaining = S;
  while (!remaining.empty()) {
    auto it = std::find_if(remaining.begin(), remaining.end(),
                           [&](const Vertex& v) { return fixable(cur, v); });
    if (it == remaining.end())
      throw GraphError("fix_set: no valid fixing sequence; stuck on {" + join(remaining) + "}");
    cur = fix(cur, *it);
    seq.push_back(*it);
    remaining.erase(it);
  }
  return {cur, seq};
}

inline MixedGraph apply_sequence(const MixedGraph& g, const FixingSequence& seq) {
  MixedGraph cur = g;
  for (const auto& v : seq) cur = fix(cur, v);
  return cur;
}

// (district of v together with its parents) minus v.
inline VertexSet markov_blanket(const MixedGraph& g, const Vertex& v) {
  if (!g.is_random(v)) throw GraphError("markov_blanket: " + v + " is not a random vertex");
  VertexSet dis = district_of(g, v);
  VertexSet out = dis;
  for (const auto& p : g.parents(dis)) out.insert(p);
  out.erase(v);
  return out;
}

struct IntrinsicSet {
  VertexSet head;     // the intrinsic set D
  VertexSet parents;  // pa(D) \ D in the CADMG where V \ D is fixed
  friend bool operator==(const IntrinsicSet&, const IntrinsicSet&) = default;
};

// Breadth-first search over reachable CADMGs; each CADMG with exactly one
// district contributes that district. Ordered by size, then members.
inline std::vector<IntrinsicSet> intrinsic_sets(const MixedGraph& g) {
  std::map<VertexSet, VertexSet> found;
  std::set<std::string> visited{g.serialize()};
  std::deque<MixedGraph> todo{g};
  while (!todo.empty()) {
    MixedGraph cur = std::move(todo.front());
    todo.pop_front();
    auto ds = districts(cur);
    if (ds.size() == 1) {
      VertexSet pa;
      for (const auto& p : cur.parents(ds[0]))
        if (!ds[0].count(p)) pa.insert(p);
      found.emplace(ds[0], pa);
    }
    for (const auto& v : cur.random_vertices()) {
      if (!fixable(cur, v)) continue;
      MixedGraph next = fix(cur, v);
      if (visited.insert(next.serialize()).second) todo.push_back(std::move(next));
    }
  }
  std::vector<IntrinsicSet> out;
  for (auto& [head, pa] : found) out.push_back({head, pa});
  std::stable_sort(out.begin(), out.end(), [](const IntrinsicSet& a, const IntrinsicSet& b) {
    return a.head.size() < b.head.size();
  });
  return out;
}

// Latent projection of a DAG onto `observed`: a->b when a directed path
// from a to b has only latent intermediates; a<->b when some latent vertex
// reaches both through latent-only directed paths.
inline MixedGraph latent_project(const MixedGraph& dag, const VertexSet& observed) {
  if (!dag.bi_edges().empty()) throw GraphError("latent_project: input must be a DAG");
  for (const auto& v : observed)
    if (!dag.has_vertex(v)) throw GraphError("latent_project: unknown vertex " + v);

  // Observed vertices reachable from `start` through latent-only intermediates.
  auto reach = [&](const Vertex& start) {
    VertexSet hits, seen{start};
    std::deque<Vertex> todo{start};
    while (!todo.empty()) {
      Vertex u = todo.front();
      todo.pop_front();
      for (const auto& c : dag.children(u)) {
        if (!seen.insert(c).second) continue;
        if (observed.count(c))
          hits.insert(c);
        else
          todo.push_back(c);
      }
    }
    return hits;
  };

  MixedGraph out;
  for (const auto& v : dag.vertices())
    if (observed.count(v)) out.vertices_.push_back(v);
  for (const auto& v : dag.fixed())
    if (observed.count(v)) out.fixed_.insert(v);
  for (const auto& a : out.vertices_)
    for (const auto& b : reach(a)) out.di_.insert({a, b});
  for (const auto& u : dag.vertices()) {
    if (observed.count(u)) continue;
    VertexSet hits = reach(u);
    for (auto i = hits.begin(); i != hits.end(); ++i)
      for (auto j = std::next(i); j != hits.end(); ++j) out.bi_.insert({*i, *j});
  }
  return out;
}

// Topological order of all vertices; ties go to the lowest `priority` rank,
// then to the lexicographically least name. Unranked vertices come last.
inline std::vector<Vertex> topological_order(const MixedGraph& g,
                                             const std::vector<Vertex>& priority = {}) {
  auto rank = [&](const Vertex& v) {
    auto it = std::find(priority.begin(), priority.end(), v);
    return std::pair{static_cast<std::size_t>(it - priority.begin()), v};
  };
  std::map<Vertex, std::size_t> indegree;
  for (const auto& v : g.vertices()) indegree[v] = g.parents(v).size();
  std::vector<Vertex> out;
  std::set<std::pair<std::size_t, Vertex>> ready;
  for (const auto& [v, d] : indegree)
    if (d == 0) ready.insert(rank(v));
  while (!ready.empty()) {
    Vertex v = ready.begin()->second;
    ready.erase(ready.begin());
    out.push_back(v);
    for (const auto& c : g.children(v))
      if (--indegree[c] == 0) ready.insert(rank(c));
  }
  return out;
}

}  // namespace fdt
