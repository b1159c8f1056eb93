#pragma once

// Slow, independent reference implementations used to cross-check the fast
// library paths. Everything here favors the most literal formulation
// available — per-node BFS, dense per-edge loops, threshold re-counting —
// and shares no code with the implementations under test.

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "glar/glar_model.hpp"
#include "glar/kg_store.hpp"

namespace oracle {

// Shortest hop counts from src over a CSR adjacency; UINT32_MAX = unreachable.
std::vector<uint32_t> bfs_distances(uint32_t node_count, const std::vector<uint32_t>& offsets,
                                    const std::vector<uint32_t>& nbrs, uint32_t src);

// Hop-indexed anchor counts, one BFS per node: entry (n, j * vocab + a) is
// the number of realizer-list entries of anchor a at shortest distance
// exactly j from node n.
Eigen::MatrixXd label_counts_naive(uint32_t node_count, const std::vector<uint32_t>& offsets,
                                   const std::vector<uint32_t>& nbrs,
                                   const std::vector<std::vector<uint32_t>>& realizers,
                                   uint32_t vocab, uint32_t hops);

// Frontier-expansion opening subgraph: node -> distance map, growing one hop
// at a time with plain set arithmetic. Honors the same edge mask contract as
// the extractor (masked base triple invisible in both directions).
std::unordered_map<glar::EntityId, uint32_t> subgraph_frontier_naive(
    const glar::AugmentedGraph& g, glar::EntityId center, uint32_t k,
    std::optional<glar::Triple> masked = std::nullopt);

// Edge-at-a-time global stream: e_g^0 .. e_g^L as dense matrices.
// Recomputes the relational count features directly from the graph.
std::vector<Eigen::MatrixXd> global_forward_naive(const glar::ModelParams& p,
                                                  const glar::AugmentedGraph& aug,
                                                  const glar::GlobalContext& gctx,
                                                  bool multiplicity);

// Dense per-node/per-edge local stream and candidate scoring; `eg` are the
// global layer matrices (one row per graph entity). Returns one logit per
// candidate in input order.
std::vector<double> model_forward_naive(const glar::ModelParams& p, const glar::QueryContext& q,
                                        const std::vector<Eigen::MatrixXd>& eg,
                                        glar::RelationId query_rel,
                                        const std::vector<glar::EntityId>& candidates);

// Threshold-sweep AUC-PR: every distinct score is a threshold, precision and
// recall re-counted from scratch at each one.
double auc_pr_naive(const std::vector<double>& pos, const std::vector<double>& neg);

// Triple-loop matrix product.
Eigen::MatrixXd matmul_naive(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Random multi-relational graph (labels e0.., r0..); duplicates allowed on
// purpose so loaders and dedup paths get exercised.
glar::KnowledgeGraph random_graph(uint32_t entities, uint32_t relations, uint32_t triples,
                                  uint64_t seed);

// CSR neighbor arrays of an augmented graph (relation ids dropped).
void csr_of(const glar::AugmentedGraph& g, std::vector<uint32_t>& offsets,
            std::vector<uint32_t>& nbrs);

}  // namespace oracle
