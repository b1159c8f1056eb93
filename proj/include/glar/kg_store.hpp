#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "glar/errors.hpp"

namespace glar {

using EntityId = uint32_t;
using RelationId = uint32_t;

struct Triple {
  EntityId head;
  RelationId rel;
  EntityId tail;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  size_t operator()(const Triple& t) const {
    uint64_t x = (uint64_t(t.head) << 32) ^ (uint64_t(t.rel) << 20) ^ t.tail;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    return static_cast<size_t>(x ^ (x >> 31));
  }
};

// Label <-> id dictionary. Ids are assigned in first-appearance order, which
// makes loading deterministic and lets a serialize/reload round trip produce
// the identical id-canonicalized graph.
struct Vocab {
  std::vector<std::string> labels;
  std::unordered_map<std::string, uint32_t> to_id;

  uint32_t intern(const std::string& label) {
    auto it = to_id.find(label);
    if (it != to_id.end()) return it->second;
    uint32_t id = static_cast<uint32_t>(labels.size());
    labels.push_back(label);
    to_id.emplace(label, id);
    return id;
  }
  std::optional<uint32_t> find(const std::string& label) const {
    auto it = to_id.find(label);
    if (it == to_id.end()) return std::nullopt;
    return it->second;
  }
  uint32_t size() const { return static_cast<uint32_t>(labels.size()); }
};

// A directed multi-relational graph with string vocabularies. Triples are
// stored deduplicated in first-appearance order; adjacency lists mirror them.
struct KnowledgeGraph {
  Vocab entities;
  Vocab relations;
  std::vector<Triple> triples;
  uint64_t duplicates_removed = 0;

  // Base-graph adjacency, triple order preserved.
  std::vector<std::vector<std::pair<RelationId, EntityId>>> out_edges;
  std::vector<std::vector<std::pair<RelationId, EntityId>>> in_edges;

  uint32_t entity_count() const { return entities.size(); }
  uint32_t relation_count() const { return relations.size(); }
  uint64_t triple_count() const { return triples.size(); }

  // In-degree + out-degree over base triples (self-loops count twice: once
  // per direction, consistent with the adjacency lists).
  uint32_t degree(EntityId n) const;

  void add_triple(const Triple& t);       // dedups, updates adjacency
  void ensure_entity_rows();              // grows adjacency after vocab extension

 private:
  std::unordered_map<Triple, char, TripleHash> seen_;
};

// Directed graph where every base triple (h, r, t) also appears as the
// inverse edge (t, r + R, h). Inverse relation ids live in [R, 2R). Stored as
// CSR over out-edges; per node the base out-edges come first (triple order),
// then the inverses of its in-edges (triple order).
struct AugmentedGraph {
  uint32_t entity_count = 0;
  uint32_t base_relation_count = 0;
  uint32_t relation_count = 0;  // == 2 * base_relation_count
  std::vector<uint32_t> offsets;
  std::vector<std::pair<RelationId, EntityId>> edges;

  uint64_t edge_count() const { return edges.size(); }
  RelationId inverse_of(RelationId r) const {
    if (r >= relation_count) throw IndexError("relation id out of augmented range");
    return r < base_relation_count ? r + base_relation_count : r - base_relation_count;
  }
  std::span<const std::pair<RelationId, EntityId>> neighbors(EntityId n) const {
    if (n >= entity_count) throw IndexError("entity id out of range");
    return {edges.data() + offsets[n], edges.data() + offsets[n + 1]};
  }
  uint32_t out_degree(EntityId n) const {
    if (n >= entity_count) throw IndexError("entity id out of range");
    return offsets[n + 1] - offsets[n];
  }
};

AugmentedGraph augment(const KnowledgeGraph& g);

// An inductive split: the training graph and the disjoint-entity test graph
// share their relation vocabulary by label (same ids in both id spaces).
// valid_triples index into train_graph's vocab, test_triples into
// test_graph's. Eval triples are queries only — never merged into a graph.
struct DatasetSplit {
  KnowledgeGraph train_graph;
  KnowledgeGraph test_graph;
  std::vector<Triple> valid_triples;
  std::vector<Triple> test_triples;
  bool has_test = false;
  uint64_t novel_valid_entities = 0;  // valid-file entities absent from train.txt
  uint64_t novel_test_entities = 0;   // test-file entities absent from test_graph.txt
  uint64_t eval_duplicates_removed = 0;
};

// Reads TSV triple lines (head <TAB> relation <TAB> tail) into `graph`.
// `source_name` is used in error messages. Malformed lines raise ParseError
// with file and 1-based line number.
void load_triples(std::istream& in, const std::string& source_name, KnowledgeGraph& graph);
void load_graph_file(const std::filesystem::path& path, KnowledgeGraph& graph);

// Loads dataset_dir/{train.txt, valid.txt, test_graph.txt, test.txt}.
// train.txt is mandatory and must be nonempty; valid.txt is optional;
// test_graph.txt and test.txt must appear together. Enforces shared relation
// vocabulary and train/test entity disjointness.
DatasetSplit load_split(const std::filesystem::path& dataset_dir);

// Canonical TSV re-serialization (label-based, triple order).
void serialize_triples(const KnowledgeGraph& g, std::ostream& out);

// Debug dump of label -> id maps.
nlohmann::json dump_id_maps(const KnowledgeGraph& g);

}  // namespace glar
