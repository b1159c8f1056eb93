#include "glar/subgraph_extract.hpp"

#include <algorithm>

namespace glar {

namespace {

// The mask removes one base edge in both of its augmented orientations.
struct EdgeMask {
  bool active = false;
  EntityId h = 0, t = 0;
  RelationId fwd = 0, bwd = 0;

  // src/rel/dst in augmented orientation.
  bool hides(EntityId src, RelationId rel, EntityId dst) const {
    if (!active) return false;
    return (src == h && rel == fwd && dst == t) || (src == t && rel == bwd && dst == h);
  }
};

EdgeMask make_mask(const AugmentedGraph& g, const std::optional<Triple>& masked) {
  EdgeMask m;
  if (!masked) return m;
  m.active = true;
  Triple q = *masked;
  // Accept the triple in either orientation; normalize to base.
  if (q.rel >= g.base_relation_count) q = {q.tail, g.inverse_of(q.rel), q.head};
  m.h = q.head;
  m.t = q.tail;
  m.fwd = q.rel;
  m.bwd = g.inverse_of(q.rel);
  return m;
}

}  // namespace

OpeningSubgraph extract_opening_subgraph(const AugmentedGraph& g, EntityId center, uint32_t k,
                                         std::optional<Triple> masked) {
  if (center >= g.entity_count) throw IndexError("subgraph center out of range");
  EdgeMask mask = make_mask(g, masked);

  OpeningSubgraph sub;
  sub.center = center;
  sub.k = k;
  sub.node_ids.push_back(center);
  sub.distances.push_back(0);
  sub.local_of.emplace(center, 0);

  // Level-synchronous BFS; each new level is sorted by global id before it is
  // appended, which pins the node order no matter the adjacency layout.
  std::vector<EntityId> frontier{center};
  std::vector<EntityId> next;
  for (uint32_t depth = 1; depth <= k && !frontier.empty(); ++depth) {
    next.clear();
    for (EntityId n : frontier) {
      for (const auto& [rel, nbr] : g.neighbors(n)) {
        if (mask.hides(n, rel, nbr)) continue;
        if (sub.local_of.contains(nbr)) continue;
        sub.local_of.emplace(nbr, 0);  // placeholder, fixed after the sort
        next.push_back(nbr);
      }
    }
    std::sort(next.begin(), next.end());
    for (EntityId n : next) {
      sub.local_of[n] = static_cast<uint32_t>(sub.node_ids.size());
      sub.node_ids.push_back(n);
      sub.distances.push_back(depth);
    }
    frontier.swap(next);
  }

  // Induced augmented edges, in node order then adjacency order.
  for (uint32_t local = 0; local < sub.node_count(); ++local) {
    EntityId n = sub.node_ids[local];
    for (const auto& [rel, nbr] : g.neighbors(n)) {
      if (mask.hides(n, rel, nbr)) continue;
      auto it = sub.local_of.find(nbr);
      if (it == sub.local_of.end()) continue;
      sub.edges.push_back({local, it->second, rel});
    }
  }
  return sub;
}

nlohmann::json dump_subgraph(const OpeningSubgraph& sub, const KnowledgeGraph* labels) {
  nlohmann::json nodes = nlohmann::json::array();
  for (uint32_t i = 0; i < sub.node_count(); ++i) {
    nlohmann::json n{{"local", i}, {"global", sub.node_ids[i]}, {"distance", sub.distances[i]}};
    if (labels) n["label"] = labels->entities.labels[sub.node_ids[i]];
    nodes.push_back(std::move(n));
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : sub.edges)
    edges.push_back({{"src", e.src}, {"rel", e.rel}, {"dst", e.dst}});
  return nlohmann::json{{"center", sub.center},
                        {"k", sub.k},
                        {"node_count", sub.node_count()},
                        {"nodes", std::move(nodes)},
                        {"edges", std::move(edges)}};
}

}  // namespace glar
