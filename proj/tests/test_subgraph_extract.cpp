#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "glar/rng.hpp"
#include "glar/subgraph_extract.hpp"
#include "oracles.hpp"

using namespace glar;

TEST_CASE("opening subgraph on a hand graph: levels, order, distances") {
  // a -> b -> c -> d and a side edge b -> d.
  KnowledgeGraph g;
  std::istringstream in("a\tr\tb\nb\tr\tc\nc\tr\td\nb\tr\td\n");
  load_triples(in, "mem", g);
  AugmentedGraph aug = augment(g);

  OpeningSubgraph sub = extract_opening_subgraph(aug, 0, 2);
  REQUIRE(sub.node_count() == 4);
  CHECK(sub.node_ids == std::vector<EntityId>{0, 1, 2, 3});
  CHECK(sub.distances == std::vector<uint32_t>{0, 1, 2, 2});
  CHECK(sub.center == 0);
  CHECK(sub.membership(0) == 0u);
  CHECK_FALSE(sub.membership(99).has_value());

  OpeningSubgraph k1 = extract_opening_subgraph(aug, 0, 1);
  CHECK(k1.node_ids == std::vector<EntityId>{0, 1});

  // Induced edges connect only member nodes; both orientations appear.
  for (const auto& e : sub.edges) {
    CHECK(e.src < sub.node_count());
    CHECK(e.dst < sub.node_count());
  }
}

TEST_CASE("within a BFS level nodes are ordered by ascending entity id") {
  // Center e5 connects to e9, e2, e7 — level 1 must come out sorted.
  KnowledgeGraph g;
  std::istringstream in("e5\tr\te9\ne5\tr\te2\ne5\tr\te7\n");
  load_triples(in, "mem", g);
  // ids by first appearance: e5=0, e9=1, e2=2, e7=3
  OpeningSubgraph sub = extract_opening_subgraph(augment(g), 0, 1);
  CHECK(sub.node_ids == std::vector<EntityId>{0, 1, 2, 3});
}

TEST_CASE("node sets and distances match the frontier-expansion oracle") {
  RngStream rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    uint32_t entities = 10 + static_cast<uint32_t>(rng.below(80));
    uint32_t relations = 1 + static_cast<uint32_t>(rng.below(4));
    uint32_t triples = entities + static_cast<uint32_t>(rng.below(3 * entities));
    KnowledgeGraph g = oracle::random_graph(entities, relations, triples, 9000 + trial);
    AugmentedGraph aug = augment(g);
    EntityId center = static_cast<EntityId>(rng.below(aug.entity_count));
    uint32_t k = 1 + static_cast<uint32_t>(rng.below(4));

    OpeningSubgraph sub = extract_opening_subgraph(aug, center, k);
    auto expected = oracle::subgraph_frontier_naive(aug, center, k);

    REQUIRE(sub.node_count() == expected.size());
    for (uint32_t i = 0; i < sub.node_count(); ++i) {
      auto it = expected.find(sub.node_ids[i]);
      REQUIRE(it != expected.end());
      CHECK(sub.distances[i] == it->second);
    }

    // Induced edge set == every augmented edge with both endpoints inside.
    uint64_t expected_edges = 0;
    for (const auto& [node, dist] : expected) {
      (void)dist;
      for (auto [rel, z] : aug.neighbors(node)) {
        (void)rel;
        if (expected.contains(z)) ++expected_edges;
      }
    }
    CHECK(sub.edge_count() == expected_edges);
  }
}

TEST_CASE("extraction is deterministic") {
  KnowledgeGraph g = oracle::random_graph(60, 3, 150, 7);
  AugmentedGraph aug = augment(g);
  OpeningSubgraph a = extract_opening_subgraph(aug, 5, 3);
  OpeningSubgraph b = extract_opening_subgraph(aug, 5, 3);
  CHECK(a.node_ids == b.node_ids);
  CHECK(a.distances == b.distances);
  REQUIRE(a.edge_count() == b.edge_count());
  for (size_t i = 0; i < a.edges.size(); ++i) {
    CHECK(a.edges[i].src == b.edges[i].src);
    CHECK(a.edges[i].dst == b.edges[i].dst);
    CHECK(a.edges[i].rel == b.edges[i].rel);
  }
}

TEST_CASE("masking hides one base triple in both orientations") {
  // a -r0-> b is the only bridge to b; masking it must erase b entirely.
  KnowledgeGraph g;
  std::istringstream in("a\tr0\tb\nb\tr0\tc\na\tr0\td\n");
  load_triples(in, "mem", g);
  AugmentedGraph aug = augment(g);
  Triple mask{0, 0, 1};  // a -r0-> b

  OpeningSubgraph plain = extract_opening_subgraph(aug, 0, 2);
  CHECK(plain.membership(1).has_value());
  CHECK(plain.membership(2).has_value());

  OpeningSubgraph masked = extract_opening_subgraph(aug, 0, 2, mask);
  CHECK_FALSE(masked.membership(1).has_value());
  CHECK_FALSE(masked.membership(2).has_value());  // only reachable through b
  CHECK(masked.membership(3).has_value());

  // From b's side the inverse orientation must be hidden too.
  OpeningSubgraph from_b = extract_opening_subgraph(aug, 1, 1, mask);
  CHECK_FALSE(from_b.membership(0).has_value());
  CHECK(from_b.membership(2).has_value());

  // Oracle agreement under masking on random instances.
  RngStream rng(515);
  for (int trial = 0; trial < 15; ++trial) {
    KnowledgeGraph rg = oracle::random_graph(30, 2, 90, 100 + trial);
    AugmentedGraph raug = augment(rg);
    const Triple& m = rg.triples[rng.below(rg.triples.size())];
    EntityId center = m.head;
    OpeningSubgraph sub = extract_opening_subgraph(raug, center, 3, m);
    auto expected = oracle::subgraph_frontier_naive(raug, center, 3, m);
    REQUIRE(sub.node_count() == expected.size());
    for (uint32_t i = 0; i < sub.node_count(); ++i)
      CHECK(sub.distances[i] == expected.at(sub.node_ids[i]));
    // The masked pair never shows up among induced edges.
    for (const auto& e : sub.edges) {
      bool is_masked_fwd = sub.node_ids[e.src] == m.head && e.rel == m.rel &&
                           sub.node_ids[e.dst] == m.tail;
      bool is_masked_bwd = sub.node_ids[e.src] == m.tail &&
                           e.rel == raug.inverse_of(m.rel) && sub.node_ids[e.dst] == m.head;
      CHECK_FALSE(is_masked_fwd);
      CHECK_FALSE(is_masked_bwd);
    }
  }
}

TEST_CASE("center out of range raises IndexError") {
  KnowledgeGraph g = oracle::random_graph(10, 2, 20, 3);
  AugmentedGraph aug = augment(g);
  CHECK_THROWS_AS(extract_opening_subgraph(aug, 10000, 2), IndexError);
}

TEST_CASE("subgraph debug dump carries labels and structure") {
  KnowledgeGraph g;
  std::istringstream in("a\tr\tb\n");
  load_triples(in, "mem", g);
  OpeningSubgraph sub = extract_opening_subgraph(augment(g), 0, 1);
  nlohmann::json j = dump_subgraph(sub, &g);
  CHECK(j["center"] == 0);
  CHECK(j["nodes"].size() == 2);
  CHECK(j["edges"].size() == 2);  // forward + inverse orientation
}
