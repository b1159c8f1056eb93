#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "glar/kg_store.hpp"

namespace glar {

// k-hop opening subgraph around one center entity, over the augmented graph.
//
// All candidate tails of the queries anchored at this center share this one
// structure; extraction cost is therefore paid per query, not per candidate.
// Node order is deterministic: BFS level by level, ties within a level broken
// by ascending global entity id. node_ids[0] is always the center.
struct OpeningSubgraph {
  EntityId center = 0;
  uint32_t k = 0;
  std::vector<EntityId> node_ids;            // local index -> global id
  std::vector<uint32_t> distances;           // local index -> hops from center
  std::unordered_map<EntityId, uint32_t> local_of;  // global id -> local index

  struct LocalEdge {
    uint32_t src;      // local index
    uint32_t dst;      // local index
    RelationId rel;    // augmented relation id
  };
  std::vector<LocalEdge> edges;              // induced augmented edges

  uint32_t node_count() const { return static_cast<uint32_t>(node_ids.size()); }
  uint64_t edge_count() const { return edges.size(); }

  // Local index of a global entity, or nullopt if outside the subgraph.
  std::optional<uint32_t> membership(EntityId global_id) const {
    auto it = local_of.find(global_id);
    if (it == local_of.end()) return std::nullopt;
    return it->second;
  }
};

// Extracts the k-hop opening subgraph of `center`. When `masked` is given,
// that base-orientation triple and its inverse are invisible to both the
// traversal and the induced edge set — used at training time so a query never
// sees its own answer edge. Throws IndexError for an out-of-range center.
OpeningSubgraph extract_opening_subgraph(const AugmentedGraph& g, EntityId center, uint32_t k,
                                         std::optional<Triple> masked = std::nullopt);

// JSON debug dump (global ids, labels if provided, distances, induced edges).
nlohmann::json dump_subgraph(const OpeningSubgraph& sub, const KnowledgeGraph* labels);

}  // namespace glar
