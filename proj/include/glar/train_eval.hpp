#pragma once

#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "glar/checkpoint.hpp"
#include "glar/config.hpp"
#include "glar/glar_model.hpp"
#include "glar/instrumentation.hpp"

namespace glar {

// One ranking task: score candidate tails for (center, rel, ?). Every base
// triple expands into two of these — the forward query and the inverse-
// relation query — so "directed queries" is always 2x the triple count.
struct DirectedQuery {
  EntityId center;
  RelationId rel;    // augmented relation id
  EntityId answer;
  Triple base;       // original triple (for masking / filtering)
};

std::vector<DirectedQuery> directed_queries(const std::vector<Triple>& triples,
                                            uint32_t base_relation_count);

// Byte-budgeted LRU over query contexts, keyed by center (one cache serves
// one graph at one k). Thread-safe. Masked contexts must never go through a
// cache — the key cannot express the mask — so callers bypass it whenever a
// query edge is being hidden.
class QueryContextCache {
 public:
  explicit QueryContextCache(uint64_t byte_budget) : budget_(byte_budget) {}

  std::shared_ptr<const QueryContext> get(const AugmentedGraph& g, EntityId center,
                                          const ModelHyper& hyper, Instrumentation* instr);
  uint64_t used_bytes() const { return used_; }

 private:
  std::mutex mu_;
  uint64_t budget_;
  uint64_t used_ = 0;
  std::list<std::pair<EntityId, std::shared_ptr<const QueryContext>>> lru_;
  std::unordered_map<EntityId, decltype(lru_)::iterator> index_;
};

// Frozen-model scoring state for one graph: augmentation, global stream
// inputs and embeddings, and the filter set for negative sampling.
struct ScoringSetup {
  const KnowledgeGraph* base = nullptr;
  AugmentedGraph aug;
  RelationalFeatures features;
  GlobalContext gctx;
  std::vector<Eigen::MatrixXd> global_layers;
  std::unordered_set<Triple, TripleHash> known;  // graph triples + eval triples

  ScoringSetup() = default;
  ScoringSetup(const ScoringSetup&) = delete;
  ScoringSetup& operator=(const ScoringSetup&) = delete;
  ScoringSetup(ScoringSetup&&) = default;
  ScoringSetup& operator=(ScoringSetup&&) = default;
};

ScoringSetup make_scoring_setup(const KnowledgeGraph& graph,
                                const std::vector<Triple>& eval_triples,
                                const ModelParams& params, const ClusteringModel& clusters,
                                bool relational_multiplicity);

// Draws filtered negative tails for one directed query: uniform over the
// graph's entities, excluding the answer and any candidate whose corrupted
// base triple is in `known`. Sampling is with replacement and deterministic
// in (seed, query index).
std::vector<EntityId> sample_filtered_negatives(const ScoringSetup& setup,
                                                const DirectedQuery& q, uint32_t count,
                                                RngStream rng);

struct RankingOptions {
  uint32_t negatives = 50;
  uint32_t hits_k = 10;
  uint64_t seed = 42;
  bool use_cache = true;
  uint64_t cache_bytes = 256ull << 20;
  uint32_t threads = 1;
  bool group_by_degree = false;
};

struct HitsResult {
  uint64_t queries = 0;
  uint64_t hits = 0;
  double hits_fraction = 0.0;
  // Optional breakdown by the answer entity's base-graph degree.
  std::vector<std::string> bucket_names;
  std::vector<uint64_t> bucket_queries;
  std::vector<uint64_t> bucket_hits;
};

// Ranks the answer of every directed query against sampled filtered
// negatives. A query is a hit iff fewer than hits_k negatives score >= the
// answer (the pessimistic tie rule: ties count against the answer).
HitsResult hits_at_k(const ModelParams& params, const ScoringSetup& setup,
                     const std::vector<Triple>& eval_triples, const RankingOptions& opts,
                     Instrumentation* instr = nullptr);

// Area under the precision-recall curve via step-wise interpolation
// (average-precision form). Ties are handled by grouping equal scores into
// one threshold step.
double auc_pr(const std::vector<double>& pos_scores, const std::vector<double>& neg_scores);

struct AucOptions {
  uint64_t base_seed = 42;
  uint32_t seeds = 5;
  bool use_cache = true;
  uint64_t cache_bytes = 256ull << 20;
  uint32_t threads = 1;
};

struct AucResult {
  std::vector<double> per_seed;
  double mean = 0.0;
};

// Scores every eval triple plus one corrupted triple per positive (head or
// tail corrupted on a fair coin, filtered against `known`), per seed.
AucResult auc_pr_eval(const ModelParams& params, const ScoringSetup& setup,
                      const std::vector<Triple>& eval_triples, const AucOptions& opts,
                      Instrumentation* instr = nullptr);

// ----- training -----

struct TrainResult {
  ModelParams params;
  ClusteringModel clusters;
  std::vector<double> epoch_losses;       // summed query losses per epoch
  std::vector<double> valid_hits;         // NaN for epochs without validation
  uint32_t epochs_run = 0;
  uint32_t best_epoch = 0;                // 1-based; 0 if validation never ran
  double train_seconds = 0.0;
};

TrainResult train_model(const DatasetSplit& split, const RunConfig& cfg);

// ----- reasoning-time benchmark -----

struct BenchRow {
  std::string version;
  uint32_t negatives = 0;
  double seconds = 0.0;
  double extraction_s = 0.0;
  double labeling_s = 0.0;
  double forward_s = 0.0;
  uint64_t directed_queries = 0;
  uint64_t extractions = 0;
  double hits_fraction = 0.0;
};

// Full test-side scoring at each negative count, cache disabled and
// single-threaded so per-query cost is measured honestly. The instrumented
// extraction count therefore equals the number of directed queries.
std::vector<BenchRow> bench_reasoning(const ModelParams& params, const ScoringSetup& setup,
                                      const std::vector<Triple>& eval_triples,
                                      const std::vector<uint32_t>& negative_counts,
                                      uint64_t seed, uint32_t hits_k,
                                      const std::string& version);

}  // namespace glar
