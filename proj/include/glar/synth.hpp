#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "glar/kg_store.hpp"

namespace glar {

// Synthetic inductive-completion benchmark.
//
// Two entity-disjoint graphs (train side, test side) share nine relations
// whose semantics are structural, not lexical: entities carry latent types,
// base relations rel_0..rel_5 connect fixed type pairs in a chain
// (type i -> type i+1), and rel_6..rel_8 are compositions of consecutive
// base pairs (rel_6 = rel_0 then rel_1, etc.). Held-out triples are either
// composed edges whose two witness edges are present in the graph, or fresh
// type-admissible base edges. A model that learns the type patterns and the
// composition rules on one side can rank answers on the other side without
// ever seeing its entities — exactly the regime the method targets.
//
// Entities are grouped into communities; chains are sampled within one
// community with a small bridge probability, so opening subgraphs stay
// local instead of swallowing the whole graph.

struct SynthSideSpec {
  std::string prefix;   // entity label prefix; sides must differ
  uint32_t entities = 0;
  uint32_t triples = 0;   // exact triple count of the written graph file
  uint32_t holdouts = 0;  // eval triples (valid.txt / test.txt)
};

struct SynthSpec {
  uint64_t seed = 7;
  uint32_t types = 7;
  uint32_t community = 160;          // entities per community
  double bridge_fraction = 0.01;     // cross-community partner probability
  double composed_graph_share = 0.12;  // share of graph triples with composed relations
  double base_holdout_share = 0.28;    // share of eval triples with base relations
  SynthSideSpec train{"tr", 2746, 6678, 400};
  SynthSideSpec test{"te", 922, 1991, 500};

  static SynthSpec preset(const std::string& name);  // "wn1" | "tiny"
};

// Writes train.txt, valid.txt, test_graph.txt, test.txt under dir (created
// if needed). Deterministic in spec.seed.
void generate_synthetic_dataset(const std::filesystem::path& dir, const SynthSpec& spec);

}  // namespace glar
