#pragma once

#include <cstdint>
#include <vector>

#include "glar/anchor_labeling.hpp"
#include "glar/subgraph_extract.hpp"

namespace glar {

// Entity-independent anchors of one opening subgraph.
//
// The anchor vocabulary has a fixed width of 1 + (augmented relation count)
// so feature columns mean the same thing across subgraphs and graphs:
//   anchor 0        — the query center itself,
//   anchor 1 + r    — "some node reachable from the center by relation r",
//                     realized by the tails of center-out augmented edges.
// Only anchors realized inside this subgraph get realizer nodes; the rest
// stay as all-zero feature columns.
struct LocalAnchorSet {
  uint32_t vocab = 0;
  std::vector<std::vector<uint32_t>> realizers;  // anchor id -> local node indices, ascending
  std::vector<uint32_t> realized;                // anchor ids with >=1 realizer, ascending

  uint32_t size() const { return static_cast<uint32_t>(realized.size()); }  // |Anc|
};

LocalAnchorSet select_local_anchors(const OpeningSubgraph& sub,
                                    uint32_t augmented_relation_count);

// Per-node hop-indexed anchor counts (anchor-outward BFS, depth <= hops).
AnchorCounts label_structure_features(const OpeningSubgraph& sub,
                                      const LocalAnchorSet& anchors, uint32_t hops);

// Per-node one-hot position for the distance feature: min(distance, k+1),
// one-hot width k+2 (distances 0..k plus an out-of-range bucket).
std::vector<uint32_t> label_distance_features(const OpeningSubgraph& sub);

// CSR over the induced edges of a subgraph (neighbor lists only; both
// directions are present because the edge set is augmented).
void subgraph_adjacency(const OpeningSubgraph& sub,
                        std::vector<uint32_t>& offsets, std::vector<uint32_t>& nbrs);

}  // namespace glar
