#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "glar/errors.hpp"
#include "glar/rng.hpp"
#include "glar/sparse.hpp"

namespace glar {

// Reverse-mode autodiff over 2-D double matrices.
//
// A Tape is a write-once arena of nodes in topological order; Tensor is an
// index into it. Leaves bind to external storage (parameter matrices, or the
// value of a node on another tape), so batches can be split across tapes:
// the shared global pass lives on one tape, each query on its own, and query
// gradients w.r.t. the global embeddings are accumulated back into the shared
// tape with accumulate_grad() before its backward sweep runs.
//
// The op set is exactly what the model needs; every op has a hand-written
// backward rule and a finite-difference test.
struct Tensor {
  int id = -1;
};

class Tape {
 public:
  // ----- graph construction -----
  Tensor leaf(const Eigen::MatrixXd& external);  // differentiable input (not owned)
  Tensor constant(Eigen::MatrixXd value);        // non-differentiable
  Tensor zeros(Eigen::Index rows, Eigen::Index cols);

  Tensor matmul(Tensor a, Tensor b);     // a * b
  Tensor matmul_bt(Tensor a, Tensor b);  // a * b^T
  Tensor add(Tensor a, Tensor b);        // same shape
  Tensor add_row_vector(Tensor a, Tensor bias);  // (n x d) + (1 x d), broadcast over rows
  Tensor add_scalar(Tensor a, Tensor s);         // (n x m) + (1 x 1), broadcast everywhere
  Tensor sub(Tensor a, Tensor b);
  Tensor neg(Tensor a);
  Tensor one_minus(Tensor a);            // 1 - a, elementwise
  Tensor mul(Tensor a, Tensor b);        // elementwise
  Tensor scale(Tensor a, double s);
  Tensor sigmoid(Tensor a);
  Tensor softplus(Tensor a);
  Tensor log(Tensor a);
  Tensor sum_all(Tensor a);              // -> 1 x 1
  Tensor mean_rows(Tensor a);            // (n x d) -> 1 x d; n must be > 0
  Tensor hstack(Tensor a, Tensor b);
  Tensor row_slice(Tensor a, Eigen::Index begin, Eigen::Index len);
  Tensor gather(Tensor a, std::vector<uint32_t> row_ids);
  // out[seg[e]] += w[e] * msgs[e]; out has `segments` rows. Segments with no
  // incoming rows stay zero.
  Tensor weighted_segment_sum(Tensor msgs, Tensor weights,
                              std::vector<uint32_t> seg_ids, uint32_t segments);
  // sparse (not differentiated) * dense. `sparse` must outlive the tape.
  Tensor sparse_matmul(const SparseRows* sparse, Tensor dense);

  // ----- execution -----
  const Eigen::MatrixXd& value(Tensor t) const;
  Eigen::Index rows(Tensor t) const { return value(t).rows(); }
  Eigen::Index cols(Tensor t) const { return value(t).cols(); }

  // Seed d(out)/d(t) with an explicit gradient (accumulates across calls).
  void accumulate_grad(Tensor t, const Eigen::MatrixXd& g);
  // Reverse sweep over every node with a seeded/propagated gradient.
  void run_backward();
  // Convenience: seed a 1x1 scalar output with 1 and sweep.
  void backward(Tensor t);

  bool has_grad(Tensor t) const;
  const Eigen::MatrixXd& grad(Tensor t) const;  // throws if absent

  // When enabled, every forward op and the backward sweep raise NumericError
  // on any non-finite value/gradient. Cheap enough for tests; training checks
  // loss and parameter gradients instead.
  void set_check_finite(bool on) { check_finite_ = on; }
  void check_all_finite() const;

  size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op : uint8_t {
    kLeaf, kConstant, kMatMul, kMatMulBT, kAdd, kAddRowVector, kAddScalar,
    kSub, kNeg, kOneMinus, kMul, kScale, kSigmoid, kSoftplus, kLog, kSumAll,
    kMeanRows, kHstack, kRowSlice, kGather, kWeightedSegmentSum, kSparseMatMul,
  };
  struct Node {
    Op op;
    int a = -1, b = -1;
    Eigen::MatrixXd value;                 // unused for leaves
    Eigen::MatrixXd grad;                  // empty until seeded
    const Eigen::MatrixXd* external = nullptr;
    const SparseRows* sparse = nullptr;
    std::shared_ptr<const std::vector<uint32_t>> ids;
    Eigen::Index i0 = 0, i1 = 0;           // slice begin/len or segment count
    double s = 0.0;
  };

  Tensor push(Node n);
  const Node& at(Tensor t) const;
  Node& at_mut(Tensor t);
  Eigen::MatrixXd& grad_buffer(int id);
  void backward_node(int id);

  std::vector<Node> nodes_;
  bool check_finite_ = false;
};

// ----- parameters and optimizer -----

struct Param {
  std::string name;
  Eigen::MatrixXd value;
  Eigen::MatrixXd grad;  // accumulated across tapes, consumed by Adam
};

struct ParamStore {
  std::vector<Param> params;

  int add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  int find(const std::string& name) const;  // -1 if absent
  Param& operator[](int i) { return params.at(i); }
  const Param& operator[](int i) const { return params.at(i); }
  size_t size() const { return params.size(); }
  void zero_grads();
  void check_grads_finite() const;  // NumericError on NaN/Inf
};

// All parameters of a store bound as leaves on one tape, in store order.
struct ParamBinding {
  std::vector<Tensor> leaves;
};
ParamBinding bind_params(Tape& tape, const ParamStore& store);
// store.grad += tape grads of the bound leaves (store order — deterministic).
void merge_param_grads(const Tape& tape, const ParamBinding& binding, ParamStore& store);

// Uniform Xavier/Glorot init in ±sqrt(6 / (fan_in + fan_out)).
void xavier_init(Param& p, RngStream& rng);

struct Adam {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  uint64_t t = 0;
  std::vector<Eigen::MatrixXd> m, v;

  // One update from the accumulated store gradients; zeroes them after.
  void step(ParamStore& store);
};

}  // namespace glar
