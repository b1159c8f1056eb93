#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "glar/global_anchor.hpp"
#include "glar/instrumentation.hpp"
#include "glar/kg_store.hpp"
#include "glar/local_anchor.hpp"
#include "glar/subgraph_extract.hpp"
#include "glar/tensor_autodiff.hpp"

namespace glar {

// Structural hyperparameters. Checkpoints refuse to load into a run whose
// structural config differs.
struct ModelHyper {
  uint32_t dim = 32;       // embedding width
  uint32_t layers = 2;     // L, message-passing depth (local and global)
  uint32_t hops = 2;       // J, anchor labeling radius
  uint32_t k = 6;          // opening subgraph radius
  uint32_t clusters = 100; // m, global anchor count
  uint32_t augmented_relations = 0;  // 2R, fixed by the training graph

  uint32_t anchor_vocab() const { return 1 + augmented_relations; }
  uint32_t distance_width() const { return k + 2; }
  uint32_t local_feature_width() const {
    return (hops + 1) * anchor_vocab() + distance_width();
  }
  uint32_t global_feature_width() const { return (hops + 1) * clusters; }
};

// Every weight matrix of the network, stored once at its full stacked shape.
// Row-sliced views (autodiff ops) give the per-block projections the fast
// forward uses, so the decomposed computation shares storage with the
// declared shapes.
struct ModelParams {
  ModelHyper hyper;
  ParamStore store;

  int rel_emb = -1;          // 2R x dim, relation embeddings (augmented ids)
  int W0 = -1, b0 = -1;      // local init projection
  int Wr = -1, Wg = -1;      // global init projections (no biases)
  struct LayerIdx {
    int Wg = -1, bg = -1;    // global GCN combine (2d x d, 1 x d)
    int W = -1, b = -1;      // local message combine (3d x d, 1 x d)
    int ra = -1;             // attention vector (d x 1)
    int Wa = -1, ba = -1;    // attention projection (4d x d, 1 x d)
    int Wbeta = -1;          // gate mix (2d x d, no bias)
    int Wbp = -1, bbp = -1;  // gate logits (3d x d, 1 x d)
  };
  std::vector<LayerIdx> layer;  // size L
  int Wo = -1, bo = -1;      // output combine ((L+1)d x d, 1 x d)
  int Wq = -1, bq = -1;      // query projection (3d x d, 1 x d)
  std::vector<int> weight_indices;  // non-bias params, in creation order
};

// Parameter structure with zero values (checkpoint loading fills them in).
ModelParams make_params(const ModelHyper& hyper);
// Structure plus initialization: Xavier-uniform weights, zero biases.
ModelParams init_params(const ModelHyper& hyper, uint64_t seed);

// ----- static per-graph inputs of the global stream -----

// Built once per graph; everything here is a constant of the computation.
struct GlobalContext {
  uint32_t entity_count = 0;
  GlobalAnchorSet anchors;
  SparseRows vr;        // |E| x 2R     relational count features
  SparseRows vg;        // |E| x (J+1)m global anchor count features
  SparseRows adj_mean;  // |E| x |E|    neighbor-mean operator (1/deg per edge)
  SparseRows rel_mean;  // |E| x 2R     relation-mean operator
};

GlobalContext build_global_context(const AugmentedGraph& g, const ClusteringModel& clusters,
                                   const RelationalFeatures& features,
                                   const KnowledgeGraph& base, const ModelHyper& hyper);

// e_g^0 .. e_g^L on the given tape.
std::vector<Tensor> run_global_pass(Tape& tape, const ParamBinding& pb,
                                    const ModelParams& p, const GlobalContext& ctx);

// Frozen-parameter global embeddings as plain matrices (eval path).
std::vector<Eigen::MatrixXd> global_embeddings(const ModelParams& p, const GlobalContext& ctx);

// ----- static per-query inputs of the local stream -----

// Everything derived from one opening subgraph that does not depend on the
// query relation or candidate set: shared by all candidates and by both
// training and eval. `masked` removes the query's own answer edge.
struct QueryContext {
  OpeningSubgraph sub;
  SparseRows feats;                  // N x local_feature_width
  std::vector<uint32_t> edge_src, edge_dst, edge_rel;  // local indices / augmented rel
  std::vector<uint32_t> node_global;                   // local -> global entity id
  uint64_t approx_bytes() const;
};

QueryContext build_query_context(const AugmentedGraph& g, EntityId center,
                                 const ModelHyper& hyper,
                                 std::optional<Triple> masked = std::nullopt,
                                 Instrumentation* instr = nullptr);

// ----- forward passes -----

struct LocalPass {
  std::vector<Tensor> layers;   // e^0 .. e^L, N x dim
  Tensor final_nodes;           // N x dim, per-node output embedding
  Tensor subgraph_embedding;    // 1 x dim, mean over all subgraph nodes
};

// `global_layers` are e_g^0..e_g^L as tensors on `tape` — either the output
// of run_global_pass on the same tape, or leaves bound to matrices computed
// on another tape (the batched-training arrangement).
LocalPass run_local_pass(Tape& tape, const ParamBinding& pb, const ModelParams& p,
                         const QueryContext& q, const std::vector<Tensor>& global_layers);

// Scores for an ordered candidate list (global entity ids; in- and
// out-of-subgraph candidates both legal). Group logits stay on the tape for
// training; `ordered` has one logit per candidate in input order.
struct CandidateScores {
  std::optional<Tensor> in_logits;    // C_in x 1
  std::optional<Tensor> out_logits;   // C_out x 1
  std::vector<std::pair<bool, uint32_t>> slot;  // candidate -> (in group?, row)
  std::vector<double> ordered;        // logits in candidate order
};

CandidateScores score_candidates(Tape& tape, const ParamBinding& pb, const ModelParams& p,
                                 const QueryContext& q, const std::vector<Tensor>& global_layers,
                                 const LocalPass& local, RelationId query_rel,
                                 const std::vector<EntityId>& candidates);

// 1x1 logit tensor of one candidate out of a CandidateScores.
Tensor candidate_logit(Tape& tape, const CandidateScores& scores, size_t candidate_index);

// Frozen-parameter scoring of one directed query: builds a throwaway tape,
// binds the precomputed global embeddings as leaves, runs the local pass and
// returns one logit per candidate in input order. The eval/bench workhorse.
std::vector<double> score_query_frozen(const ModelParams& p,
                                       const std::vector<Eigen::MatrixXd>& global_layers,
                                       const QueryContext& q, RelationId query_rel,
                                       const std::vector<EntityId>& candidates,
                                       Instrumentation* instr = nullptr);

// ----- loss -----

// Cross-entropy over probability scores: -sum log f_pos - sum log (1 - f_neg).
double cross_entropy_loss(const std::vector<double>& pos_scores,
                          const std::vector<double>& neg_scores);

// The same loss in logit space on a tape: sum softplus(-pos) + sum softplus(neg).
Tensor logistic_loss(Tape& tape, Tensor pos_logits, Tensor neg_logits);

}  // namespace glar
