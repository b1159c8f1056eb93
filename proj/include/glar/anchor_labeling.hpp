#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace glar {

// Hop-indexed anchor count features for every node of some graph.
// Column layout is hop-major: col = hop * vocab + anchor, hop in [0, hops],
// i.e. the concatenation [v^0 ‖ v^1 ‖ … ‖ v^J] with each block `vocab` wide.
// count_at(n, j, a) = number of realizing nodes of anchor a at shortest-path
// distance exactly j from n.
struct AnchorCounts {
  uint32_t hops = 0;   // J
  uint32_t vocab = 0;  // anchor vocabulary width
  std::vector<std::vector<std::pair<uint32_t, uint32_t>>> rows;  // (col, count), col-sorted

  uint32_t width() const { return (hops + 1) * vocab; }
  uint32_t count_at(uint32_t node, uint32_t hop, uint32_t anchor) const;
};

// Anchor-outward labeling: one depth-limited BFS per realizing node, instead
// of one all-anchors BFS per graph node. Work is O(sum of J-ball sizes over
// realizing nodes) — linear in the number of anchors at fixed graph size.
// `offsets`/`nbrs` describe CSR adjacency whose edge set already contains
// both directions (augmented graphs do). realizers[a] lists the nodes that
// realize anchor a; vocab is the fixed column width (>= #anchor ids).
AnchorCounts label_anchor_counts(uint32_t node_count,
                                 const std::vector<uint32_t>& offsets,
                                 const std::vector<uint32_t>& nbrs,
                                 const std::vector<std::vector<uint32_t>>& realizers,
                                 uint32_t vocab, uint32_t hops);

}  // namespace glar
