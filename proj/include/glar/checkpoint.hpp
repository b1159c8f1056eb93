#pragma once

#include <filesystem>
#include <string>

#include "glar/config.hpp"
#include "glar/glar_model.hpp"

namespace glar {

// On-disk model state: every parameter matrix, the fitted cluster centroids,
// and the structural configuration they assume. JSON with sorted keys and
// shortest-round-trip doubles, so identical state produces identical bytes
// and a load/save cycle is lossless. Format documented in the README;
// format_version guards compatibility.
struct Checkpoint {
  ModelParams params;          // includes ModelHyper
  ClusteringModel clusters;
  bool relational_multiplicity = true;
  std::string dataset_name;
  uint64_t seed = 0;
};

inline constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Raises ConfigError when the checkpoint's structural config (dim, layers,
// hops, k, clusters, relational feature semantics) differs from the run's.
void require_structural_match(const Checkpoint& ckpt, const RunConfig& cfg);

}  // namespace glar
