#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "glar/glar_model.hpp"

namespace glar {

// Run configuration: a flat key=value namespace shared by every subcommand.
// Files use one `key = value` per line with '#' comments; --set overrides
// win over the file. The canonical serialization (sorted keys) feeds the
// derived run id, so identical configs land in identical run directories.
struct RunConfig {
  std::string dataset_dir;
  std::string output_dir = "runs";
  std::string run_id;          // empty -> "run-" + hash of canonical config
  std::string dataset_name;    // empty -> basename of dataset_dir
  std::string dataset_version = "v1";
  std::string checkpoint;      // consumed by eval/bench

  uint64_t seed = 42;
  uint32_t dim = 32;
  uint32_t layers = 2;     // L
  uint32_t hops = 2;       // J
  uint32_t k = 6;
  uint32_t clusters = 100; // m

  uint32_t batch_size = 16;
  double lr = 0.001;
  uint32_t epochs = 12;
  uint32_t patience = 10;
  uint32_t valid_every = 1;

  uint32_t negatives_eval = 50;
  uint32_t hits_k = 10;
  uint32_t auc_seeds = 5;
  std::string bench_negatives = "20,150";
  bool group_by_degree = false;

  bool relational_multiplicity = true;
  uint32_t threads = 0;    // 0 -> $GLAR_THREADS, else 1
  uint64_t cache_mb = 256;

  static RunConfig from_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);  // ConfigError on bad key/value
  void validate() const;

  std::string canonical() const;        // every key except run_id, sorted
  std::string derived_run_id() const;   // run id actually used
  std::string effective_dataset_name() const;
  uint32_t effective_threads() const;
  std::vector<uint32_t> bench_negative_counts() const;
  ModelHyper hyper(uint32_t augmented_relations) const;
};

uint64_t fnv1a64(const std::string& s);

}  // namespace glar
