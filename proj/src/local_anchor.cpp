#include "glar/local_anchor.hpp"

#include <algorithm>

namespace glar {

uint32_t AnchorCounts::count_at(uint32_t node, uint32_t hop, uint32_t anchor) const {
  uint32_t col = hop * vocab + anchor;
  const auto& row = rows.at(node);
  auto it = std::lower_bound(row.begin(), row.end(), col,
                             [](const auto& e, uint32_t c) { return e.first < c; });
  return (it != row.end() && it->first == col) ? it->second : 0;
}

AnchorCounts label_anchor_counts(uint32_t node_count,
                                 const std::vector<uint32_t>& offsets,
                                 const std::vector<uint32_t>& nbrs,
                                 const std::vector<std::vector<uint32_t>>& realizers,
                                 uint32_t vocab, uint32_t hops) {
  AnchorCounts out;
  out.hops = hops;
  out.vocab = vocab;
  out.rows.resize(node_count);

  // Visit stamps instead of a cleared visited array: one allocation for the
  // whole call, O(ball) per BFS.
  std::vector<uint32_t> stamp(node_count, 0);
  uint32_t epoch = 0;
  std::vector<uint32_t> frontier, next;
  std::vector<std::pair<uint32_t, uint32_t>> events;  // (node, col)

  for (uint32_t anchor = 0; anchor < realizers.size(); ++anchor) {
    for (uint32_t source : realizers[anchor]) {
      ++epoch;
      stamp[source] = epoch;
      frontier.assign(1, source);
      events.emplace_back(source, anchor);  // hop 0
      for (uint32_t hop = 1; hop <= hops && !frontier.empty(); ++hop) {
        next.clear();
        for (uint32_t n : frontier) {
          for (uint32_t i = offsets[n]; i < offsets[n + 1]; ++i) {
            uint32_t nbr = nbrs[i];
            if (stamp[nbr] == epoch) continue;
            stamp[nbr] = epoch;
            next.push_back(nbr);
            events.emplace_back(nbr, hop * vocab + anchor);
          }
        }
        frontier.swap(next);
      }
    }
  }

  std::sort(events.begin(), events.end());
  for (size_t i = 0; i < events.size();) {
    size_t j = i;
    while (j < events.size() && events[j] == events[i]) ++j;
    out.rows[events[i].first].emplace_back(events[i].second, static_cast<uint32_t>(j - i));
    i = j;
  }
  return out;
}

LocalAnchorSet select_local_anchors(const OpeningSubgraph& sub,
                                    uint32_t augmented_relation_count) {
  LocalAnchorSet set;
  set.vocab = 1 + augmented_relation_count;
  set.realizers.resize(set.vocab);
  set.realizers[0].push_back(0);  // the center realizes anchor 0
  for (const auto& e : sub.edges) {
    if (e.src != 0) continue;
    if (e.rel >= augmented_relation_count) throw IndexError("edge relation out of range");
    set.realizers[1 + e.rel].push_back(e.dst);
  }
  for (uint32_t a = 0; a < set.vocab; ++a) {
    if (set.realizers[a].empty()) continue;
    std::sort(set.realizers[a].begin(), set.realizers[a].end());
    set.realized.push_back(a);
  }
  return set;
}

void subgraph_adjacency(const OpeningSubgraph& sub,
                        std::vector<uint32_t>& offsets, std::vector<uint32_t>& nbrs) {
  offsets.assign(sub.node_count() + 1, 0);
  for (const auto& e : sub.edges) ++offsets[e.src + 1];
  for (uint32_t i = 1; i < offsets.size(); ++i) offsets[i] += offsets[i - 1];
  nbrs.resize(sub.edges.size());
  std::vector<uint32_t> cursor(offsets.begin(), offsets.end() - 1);
  for (const auto& e : sub.edges) nbrs[cursor[e.src]++] = e.dst;
}

AnchorCounts label_structure_features(const OpeningSubgraph& sub,
                                      const LocalAnchorSet& anchors, uint32_t hops) {
  std::vector<uint32_t> offsets, nbrs;
  subgraph_adjacency(sub, offsets, nbrs);
  return label_anchor_counts(sub.node_count(), offsets, nbrs, anchors.realizers,
                             anchors.vocab, hops);
}

std::vector<uint32_t> label_distance_features(const OpeningSubgraph& sub) {
  std::vector<uint32_t> pos(sub.node_count());
  for (uint32_t n = 0; n < sub.node_count(); ++n)
    pos[n] = std::min(sub.distances[n], sub.k + 1);
  return pos;
}

}  // namespace glar
