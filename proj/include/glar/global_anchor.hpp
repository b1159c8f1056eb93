#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "glar/anchor_labeling.hpp"
#include "glar/kg_store.hpp"

namespace glar {

// Per-entity relational profile: how often each augmented relation occurs on
// edges incident to the entity. Row sums equal augmented degree when counting
// with multiplicity (the default); set semantics clamps counts to 0/1.
struct RelationalFeatures {
  uint32_t width = 0;  // augmented relation count
  std::vector<std::vector<std::pair<uint32_t, uint32_t>>> rows;  // (relation, count), sorted

  uint32_t entity_count() const { return static_cast<uint32_t>(rows.size()); }
  // Dense L2-row-normalized matrix — the clustering feature space. Zero rows
  // (isolated entities) stay zero.
  Eigen::MatrixXd normalized_dense() const;
};

RelationalFeatures relational_features(const AugmentedGraph& g, bool multiplicity = true);

// k-means (k-means++ seeding, Lloyd iterations) in the normalized relational
// feature space. Fitted once on the training graph; test-side entities are
// assigned to these same centroids, which is what makes the global anchors
// transferable across entity vocabularies.
struct ClusteringModel {
  uint32_t m = 0;
  Eigen::MatrixXd centroids;  // m x width
  double objective = 0.0;     // final within-cluster squared distance
  uint32_t iterations = 0;
  std::vector<double> objective_trace;  // per-iteration objective, non-increasing
};

// Throws ConfigError if m == 0 or m exceeds the number of entities.
ClusteringModel fit_clusters(const RelationalFeatures& features, uint32_t m, uint64_t seed);

// Nearest-centroid assignment (Euclidean, ties to the lowest cluster index).
std::vector<uint32_t> assign_clusters(const ClusteringModel& model,
                                      const RelationalFeatures& features);

struct GlobalAnchorSet {
  uint32_t m = 0;
  std::vector<uint32_t> assignment;               // entity -> cluster
  std::vector<std::optional<EntityId>> anchors;   // cluster -> representative entity
  std::vector<uint32_t> cluster_sizes;

  // Realizer lists in the shape the labeling engine expects (anchor c is
  // realized by its representative entity, or by nothing for empty clusters).
  std::vector<std::vector<uint32_t>> realizer_lists() const;
};

// Representative = highest base-graph degree in the cluster, ties broken by
// lowest entity id. `base` supplies the degrees and must match `features`.
GlobalAnchorSet select_global_anchors(const ClusteringModel& model,
                                      const RelationalFeatures& features,
                                      const KnowledgeGraph& base);

// Hop-indexed anchor counts over the full augmented graph (vocab = m).
AnchorCounts label_global_features(const AugmentedGraph& g, const GlobalAnchorSet& anchors,
                                   uint32_t hops);

}  // namespace glar
