#include <gtest/gtest.h>

#include <random>

#include "fdt/graph.hpp"
#include "oracles.hpp"
#include "graphs.hpp"

using namespace fdt;

TEST(BuildGraph, AnchoredFrontDoor) {
  MixedGraph g = graphs::anchored_front_door();
  EXPECT_EQ(g.vertices(), (std::vector<Vertex>{"A", "M", "Y", "Z"}));
  EXPECT_TRUE(g.has_di("Z", "A"));
  EXPECT_TRUE(g.has_di("Z", "M"));
  EXPECT_TRUE(g.has_di("A", "M"));
  EXPECT_TRUE(g.has_di("M", "Y"));
  EXPECT_TRUE(g.has_bi("Y", "A"));
  EXPECT_EQ(g.di_edges().size(), 4u);
  EXPECT_EQ(g.bi_edges().size(), 1u);
}

TEST(BuildGraph, SingleVertex) {
  MixedGraph g = build_graph({{"X"}, {}, {}, {}});
  EXPECT_EQ(g.vertices().size(), 1u);
  EXPECT_TRUE(g.di_edges().empty());
}

TEST(BuildGraph, RejectsInvalidInput) {
  EXPECT_THROW(build_graph({{"A", "B"}, {}, {{"A", "B"}, {"B", "A"}}, {}}), GraphError);
  EXPECT_THROW(build_graph({{"A", "B"}, {"B"}, {{"A", "B"}}, {}}), GraphError);
  EXPECT_THROW(build_graph({{"A", "B"}, {"B"}, {}, {{"A", "B"}}}), GraphError);
  EXPECT_THROW(build_graph({{"A"}, {}, {{"A", "Q"}}, {}}), GraphError);
  EXPECT_THROW(build_graph({{"A", "A"}, {}, {}, {}}), GraphError);
  EXPECT_THROW(build_graph({{"A"}, {}, {{"A", "A"}}, {}}), GraphError);
}

TEST(BuildGraph, JsonRoundTripIsCanonical) {
  std::string messy = R"({"bi_edges":[["Y","A"]],"di_edges":[["M","Y"],["Z","A"],["A","M"],["Z","M"]],
                         "fixed":[],"vertices":["Z","A","M","Y"]})";
  MixedGraph g = parse_graph(messy);
  std::string canon = g.serialize();
  EXPECT_EQ(canon,
            R"({"vertices":["A","M","Y","Z"],"fixed":[],"di_edges":[["A","M"],["M","Y"],["Z","A"],["Z","M"]],"bi_edges":[["A","Y"]]})");
  EXPECT_EQ(parse_graph(canon).serialize(), canon);
  EXPECT_EQ(parse_graph(canon), graphs::anchored_front_door());
  EXPECT_THROW(parse_graph("{not json"), GraphError);
  EXPECT_THROW(parse_graph(R"({"vertices":["A"],"di_edges":[["A"]]})"), GraphError);
}

TEST(Districts, Examples) {
  MixedGraph g = graphs::anchored_front_door();
  auto ds = districts(g);
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds[0], (VertexSet{"A", "Y"}));
  EXPECT_EQ(ds[1], (VertexSet{"M"}));
  EXPECT_EQ(ds[2], (VertexSet{"Z"}));

  auto fixed_zm = fix_set(g, {"Z", "M"}).first;
  ds = districts(fixed_zm);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds[0], (VertexSet{"A", "Y"}));

  MixedGraph dag = build_graph({{"A", "B", "C"}, {}, {{"A", "B"}, {"B", "C"}}, {}});
  EXPECT_EQ(districts(dag).size(), 3u);
}

TEST(MSeparation, Examples) {
  MixedGraph g = graphs::anchored_front_door();
  EXPECT_FALSE(m_separated(g, {"Z"}, {"Y"}, {}));
  MixedGraph do_m = fix(g, "M");
  EXPECT_TRUE(m_separated(do_m, {"Z"}, {"Y"}, {}));
  MixedGraph two = build_graph({{"P", "Q"}, {}, {}, {}});
  EXPECT_TRUE(m_separated(two, {"P"}, {"Q"}, {}));
  EXPECT_THROW(m_separated(g, {"Z"}, {"Z"}, {}), GraphError);
  EXPECT_THROW(m_separated(g, {"Z"}, {"Y"}, {"Y"}), GraphError);
}

TEST(MSeparation, BidirectedColliders) {
  // A <-> B <-> C : B is a collider
  MixedGraph g = build_graph({{"A", "B", "C"}, {}, {}, {{"A", "B"}, {"B", "C"}}});
  EXPECT_TRUE(m_separated(g, {"A"}, {"C"}, {}));
  EXPECT_FALSE(m_separated(g, {"A"}, {"C"}, {"B"}));
  // descendant of a collider opens it
  MixedGraph h = build_graph({{"A", "B", "C", "D"}, {}, {{"B", "D"}}, {{"A", "B"}, {"B", "C"}}});
  EXPECT_FALSE(m_separated(h, {"A"}, {"C"}, {"D"}));
}

TEST(MSeparation, PropertySymmetricAndMatchesBruteForce) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    int n = 3 + trial % 4;
    MixedGraph g = oracle::random_admg(rng, n, 0.4, 0.25);
    std::vector<Vertex> vs = g.vertices();
    std::shuffle(vs.begin(), vs.end(), rng);
    VertexSet X{vs[0]}, Y{vs[1]}, S;
    for (std::size_t i = 2; i < vs.size(); ++i)
      if (rng() % 2) S.insert(vs[i]);
    bool sep = m_separated(g, X, Y, S);
    EXPECT_EQ(sep, m_separated(g, Y, X, S));
    EXPECT_EQ(sep, oracle::m_separated_bruteforce(g, X, Y, S)) << g.serialize();
  }
}

TEST(MSeparation, PropertyMatchesMoralizationOnDags) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    MixedGraph g = oracle::random_admg(rng, 5, 0.45, 0.0);
    std::vector<Vertex> vs = g.vertices();
    std::shuffle(vs.begin(), vs.end(), rng);
    VertexSet X{vs[0]}, Y{vs[1]}, S;
    for (std::size_t i = 2; i < vs.size(); ++i)
      if (rng() % 2) S.insert(vs[i]);
    EXPECT_EQ(m_separated(g, X, Y, S), oracle::d_separated_moral(g, X, Y, S)) << g.serialize();
  }
}

TEST(Fixing, Fixability) {
  MixedGraph g = graphs::anchored_front_door();
  EXPECT_TRUE(fixable(g, "Z"));
  EXPECT_FALSE(fixable(g, "A"));
  EXPECT_TRUE(fixable(g, "M"));
  EXPECT_TRUE(fixable(build_graph({{"X"}, {}, {}, {}}), "X"));
  EXPECT_THROW(fixable(g, "Q"), GraphError);
  EXPECT_THROW(fixable(fix(g, "Z"), "Z"), GraphError);
}

TEST(Fixing, FixMatchesPostInterventionGraphs) {
  MixedGraph g = graphs::anchored_front_door();
  MixedGraph do_m = build_graph({{"Z", "A", "M", "Y"}, {"M"}, {{"Z", "A"}, {"M", "Y"}}, {{"A", "Y"}}});
  EXPECT_EQ(fix(g, "M"), do_m);
  MixedGraph do_zm = build_graph({{"Z", "A", "M", "Y"}, {"Z", "M"}, {{"Z", "A"}, {"M", "Y"}}, {{"A", "Y"}}});
  EXPECT_EQ(fix(fix(g, "Z"), "M"), do_zm);
  EXPECT_EQ(fix(fix(g, "M"), "Z"), do_zm);
  EXPECT_THROW(fix(g, "A"), GraphError);

  MixedGraph iso = build_graph({{"P", "Q"}, {}, {}, {}});
  MixedGraph fixed_p = fix(iso, "P");
  EXPECT_TRUE(fixed_p.is_fixed("P"));
  EXPECT_EQ(fixed_p.di_edges(), iso.di_edges());
}

TEST(Fixing, FixSet) {
  MixedGraph g = graphs::anchored_front_door();
  auto [cadmg, seq] = fix_set(g, {"Z", "M"});
  EXPECT_EQ(seq, (FixingSequence{"M", "Z"}));
  EXPECT_EQ(cadmg, apply_sequence(g, {"Z", "M"}));
  auto [same, empty] = fix_set(g, {});
  EXPECT_EQ(same, g);
  EXPECT_TRUE(empty.empty());
  EXPECT_THROW(fix_set(graphs::mediator_confounded(), {"Z", "A", "M"}), GraphError);
}

TEST(Fixing, ConfoundedMediatorHasNoValidOrdering) {
  MixedGraph g = graphs::mediator_confounded();
  int valid = 0;
  oracle::for_each_permutation({"Z", "A", "M"}, [&](const std::vector<Vertex>& order) {
    try {
      apply_sequence(g, order);
      ++valid;
    } catch (const GraphError&) {
    }
  });
  EXPECT_EQ(valid, 0);
}

TEST(Fixing, PropertyAllValidSequencesAgree) {
  std::mt19937_64 rng(3);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    MixedGraph g = oracle::random_admg(rng, 3 + trial % 3, 0.4, 0.3);
    VertexSet S;
    for (const auto& v : g.vertices())
      if (rng() % 2) S.insert(v);
    std::set<std::string> results;
    oracle::for_each_permutation(std::vector<Vertex>(S.begin(), S.end()), [&](const std::vector<Vertex>& order) {
      try {
        results.insert(apply_sequence(g, order).serialize());
      } catch (const GraphError&) {
      }
    });
    EXPECT_LE(results.size(), 1u);
    bool greedy_ok = true;
    try {
      auto [cadmg, seq] = fix_set(g, S);
      ASSERT_EQ(results.size(), 1u);
      EXPECT_EQ(cadmg.serialize(), *results.begin());
      for (const auto& d : districts(cadmg))
        for (const auto& v : S) EXPECT_FALSE(d.count(v));
      ++checked;
    } catch (const GraphError&) {
      greedy_ok = false;
    }
    if (!greedy_ok) {
      EXPECT_TRUE(results.empty());
    }
  }
  EXPECT_GT(checked, 50);
}

TEST(Districts, PropertyPartition) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    MixedGraph g = oracle::random_admg(rng, 6, 0.3, 0.3);
    VertexSet all;
    std::size_t total = 0;
    for (const auto& d : districts(g)) {
      total += d.size();
      all.insert(d.begin(), d.end());
    }
    EXPECT_EQ(total, all.size());
    EXPECT_EQ(all, g.random_vertices());
  }
}

TEST(MarkovBlanket, Examples) {
  MixedGraph g = graphs::anchored_front_door();
  EXPECT_EQ(markov_blanket(g, "Y"), (VertexSet{"A", "M", "Z"}));
  EXPECT_EQ(markov_blanket(g, "M"), (VertexSet{"A", "Z"}));
  EXPECT_TRUE(markov_blanket(build_graph({{"X"}, {}, {}, {}}), "X").empty());
  EXPECT_THROW(markov_blanket(fix(g, "Z"), "Z"), GraphError);
}

static std::vector<VertexSet> heads(const std::vector<IntrinsicSet>& sets) {
  std::vector<VertexSet> out;
  for (const auto& s : sets) out.push_back(s.head);
  std::sort(out.begin(), out.end());
  return out;
}

TEST(IntrinsicSets, Examples) {
  auto sets = intrinsic_sets(graphs::anchored_front_door());
  std::vector<VertexSet> expected{{"A"}, {"A", "Y"}, {"M"}, {"Y"}, {"Z"}};
  EXPECT_EQ(heads(sets), expected);
  for (const auto& s : sets) {
    if (s.head == VertexSet{"A", "Y"}) {
      EXPECT_EQ(s.parents, (VertexSet{"M", "Z"}));
    }
  }

  MixedGraph chain = build_graph({{"A", "B"}, {}, {{"A", "B"}}, {}});
  EXPECT_EQ(heads(intrinsic_sets(chain)), (std::vector<VertexSet>{{"A"}, {"B"}}));

  MixedGraph pair = build_graph({{"A", "B"}, {}, {}, {{"A", "B"}}});
  EXPECT_EQ(heads(intrinsic_sets(pair)), (std::vector<VertexSet>{{"A"}, {"A", "B"}, {"B"}}));
}

TEST(IntrinsicSets, PropertyDagsGiveSingletons) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    MixedGraph g = oracle::random_admg(rng, 5, 0.4, 0.0);
    std::vector<VertexSet> expected;
    for (const auto& v : g.vertices()) expected.push_back({v});
    EXPECT_EQ(heads(intrinsic_sets(g)), expected);
  }
}

TEST(LatentProjection, HiddenDags) {
  MixedGraph a = latent_project(graphs::hidden_dag("a"), {"Z", "A", "M", "Y"});
  EXPECT_EQ(a, build_graph({{"Z", "A", "M", "Y"}, {}, {{"Z", "A"}, {"Z", "M"}, {"A", "M"}, {"M", "Y"}}, {{"A", "Y"}}}));
  MixedGraph b = latent_project(graphs::hidden_dag("b"), {"Z", "A", "M", "Y"});
  EXPECT_EQ(b, build_graph({{"Z", "A", "M", "Y"}, {}, {{"Z", "A"}, {"A", "M"}, {"M", "Y"}}, {{"A", "Y"}, {"Z", "M"}}}));
  MixedGraph c = latent_project(graphs::hidden_dag("c"), {"Z", "A", "M", "Y"});
  EXPECT_EQ(c, graphs::mediator_confounded());
  EXPECT_THROW(latent_project(graphs::anchored_front_door(), {"Z"}), GraphError);
}

TEST(LatentProjection, LatentChainsProjectToDirectedEdges) {
  MixedGraph dag = build_graph({{"A", "L1", "L2", "B"}, {}, {{"A", "L1"}, {"L1", "L2"}, {"L2", "B"}}, {}});
  EXPECT_EQ(latent_project(dag, {"A", "B"}), build_graph({{"A", "B"}, {}, {{"A", "B"}}, {}}));
  MixedGraph fork = build_graph({{"A", "L1", "L2", "B"}, {}, {{"L1", "L2"}, {"L2", "A"}, {"L1", "B"}}, {}});
  EXPECT_EQ(latent_project(fork, {"A", "B"}), build_graph({{"A", "B"}, {}, {}, {{"A", "B"}}}));
}

TEST(LatentProjection, PropertyIdentityOnFullyObserved) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    MixedGraph g = oracle::random_admg(rng, 5, 0.4, 0.0);
    VertexSet all(g.vertices().begin(), g.vertices().end());
    EXPECT_EQ(latent_project(g, all), g);
    EXPECT_EQ(latent_project(latent_project(g, all), all), g);
  }
}
