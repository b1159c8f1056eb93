#include "glar/tensor_autodiff.hpp"

#include <cmath>

namespace glar {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

Tensor Tape::push(Node n) {
  if (check_finite_ && n.op != Op::kLeaf && !n.value.allFinite())
    throw NumericError("non-finite value produced in forward pass");
  nodes_.push_back(std::move(n));
  return Tensor{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::at(Tensor t) const {
  if (t.id < 0 || t.id >= static_cast<int>(nodes_.size()))
    throw IndexError("tensor handle not on this tape");
  return nodes_[t.id];
}

Tape::Node& Tape::at_mut(Tensor t) {
  return const_cast<Node&>(at(t));
}

const Eigen::MatrixXd& Tape::value(Tensor t) const {
  const Node& n = at(t);
  return n.op == Op::kLeaf ? *n.external : n.value;
}

Tensor Tape::leaf(const Eigen::MatrixXd& external) {
  Node n;
  n.op = Op::kLeaf;
  n.external = &external;
  return push(std::move(n));
}

Tensor Tape::constant(Eigen::MatrixXd value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

Tensor Tape::zeros(Eigen::Index rows, Eigen::Index cols) {
  return constant(Eigen::MatrixXd::Zero(rows, cols));
}

Tensor Tape::matmul(Tensor a, Tensor b) {
  if (cols(a) != rows(b)) throw ShapeError("matmul inner dimension mismatch");
  Node n;
  n.op = Op::kMatMul;
  n.a = a.id; n.b = b.id;
  n.value = value(a) * value(b);
  return push(std::move(n));
}

Tensor Tape::matmul_bt(Tensor a, Tensor b) {
  if (cols(a) != cols(b)) throw ShapeError("matmul_bt inner dimension mismatch");
  Node n;
  n.op = Op::kMatMulBT;
  n.a = a.id; n.b = b.id;
  n.value = value(a) * value(b).transpose();
  return push(std::move(n));
}

Tensor Tape::add(Tensor a, Tensor b) {
  if (rows(a) != rows(b) || cols(a) != cols(b)) throw ShapeError("add shape mismatch");
  Node n;
  n.op = Op::kAdd;
  n.a = a.id; n.b = b.id;
  n.value = value(a) + value(b);
  return push(std::move(n));
}

Tensor Tape::add_row_vector(Tensor a, Tensor bias) {
  if (rows(bias) != 1 || cols(bias) != cols(a))
    throw ShapeError("add_row_vector expects a 1 x cols(a) bias");
  Node n;
  n.op = Op::kAddRowVector;
  n.a = a.id; n.b = bias.id;
  n.value = value(a).rowwise() + value(bias).row(0);
  return push(std::move(n));
}

Tensor Tape::add_scalar(Tensor a, Tensor s) {
  if (rows(s) != 1 || cols(s) != 1) throw ShapeError("add_scalar expects a 1x1 tensor");
  Node n;
  n.op = Op::kAddScalar;
  n.a = a.id; n.b = s.id;
  n.value = value(a).array() + value(s)(0, 0);
  return push(std::move(n));
}

Tensor Tape::sub(Tensor a, Tensor b) {
  if (rows(a) != rows(b) || cols(a) != cols(b)) throw ShapeError("sub shape mismatch");
  Node n;
  n.op = Op::kSub;
  n.a = a.id; n.b = b.id;
  n.value = value(a) - value(b);
  return push(std::move(n));
}

Tensor Tape::neg(Tensor a) {
  Node n;
  n.op = Op::kNeg;
  n.a = a.id;
  n.value = -value(a);
  return push(std::move(n));
}

Tensor Tape::one_minus(Tensor a) {
  Node n;
  n.op = Op::kOneMinus;
  n.a = a.id;
  n.value = 1.0 - value(a).array();
  return push(std::move(n));
}

Tensor Tape::mul(Tensor a, Tensor b) {
  if (rows(a) != rows(b) || cols(a) != cols(b)) throw ShapeError("mul shape mismatch");
  Node n;
  n.op = Op::kMul;
  n.a = a.id; n.b = b.id;
  n.value = value(a).cwiseProduct(value(b));
  return push(std::move(n));
}

Tensor Tape::scale(Tensor a, double s) {
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.s = s;
  n.value = s * value(a);
  return push(std::move(n));
}

Tensor Tape::sigmoid(Tensor a) {
  Node n;
  n.op = Op::kSigmoid;
  n.a = a.id;
  n.value = value(a).unaryExpr([](double x) { return stable_sigmoid(x); });
  return push(std::move(n));
}

Tensor Tape::softplus(Tensor a) {
  Node n;
  n.op = Op::kSoftplus;
  n.a = a.id;
  n.value = value(a).unaryExpr([](double x) { return stable_softplus(x); });
  return push(std::move(n));
}

Tensor Tape::log(Tensor a) {
  Node n;
  n.op = Op::kLog;
  n.a = a.id;
  n.value = value(a).array().log();
  return push(std::move(n));
}

Tensor Tape::sum_all(Tensor a) {
  Node n;
  n.op = Op::kSumAll;
  n.a = a.id;
  n.value = Eigen::MatrixXd::Constant(1, 1, value(a).sum());
  return push(std::move(n));
}

Tensor Tape::mean_rows(Tensor a) {
  if (rows(a) == 0) throw ShapeError("mean_rows over an empty matrix");
  Node n;
  n.op = Op::kMeanRows;
  n.a = a.id;
  n.value = value(a).colwise().mean();
  return push(std::move(n));
}

Tensor Tape::hstack(Tensor a, Tensor b) {
  if (rows(a) != rows(b)) throw ShapeError("hstack row mismatch");
  Node n;
  n.op = Op::kHstack;
  n.a = a.id; n.b = b.id;
  n.value.resize(rows(a), cols(a) + cols(b));
  n.value << value(a), value(b);
  return push(std::move(n));
}

Tensor Tape::row_slice(Tensor a, Eigen::Index begin, Eigen::Index len) {
  if (begin < 0 || len < 0 || begin + len > rows(a)) throw IndexError("row_slice out of range");
  Node n;
  n.op = Op::kRowSlice;
  n.a = a.id;
  n.i0 = begin; n.i1 = len;
  n.value = value(a).middleRows(begin, len);
  return push(std::move(n));
}

Tensor Tape::gather(Tensor a, std::vector<uint32_t> row_ids) {
  const Eigen::MatrixXd& src = value(a);
  Node n;
  n.op = Op::kGather;
  n.a = a.id;
  n.value.resize(static_cast<Eigen::Index>(row_ids.size()), src.cols());
  for (size_t i = 0; i < row_ids.size(); ++i) {
    if (static_cast<Eigen::Index>(row_ids[i]) >= src.rows())
      throw IndexError("gather row out of range");
    n.value.row(static_cast<Eigen::Index>(i)) = src.row(row_ids[i]);
  }
  n.ids = std::make_shared<const std::vector<uint32_t>>(std::move(row_ids));
  return push(std::move(n));
}

Tensor Tape::weighted_segment_sum(Tensor msgs, Tensor weights,
                                  std::vector<uint32_t> seg_ids, uint32_t segments) {
  const Eigen::MatrixXd& m = value(msgs);
  const Eigen::MatrixXd& w = value(weights);
  if (w.rows() != m.rows() || w.cols() != 1)
    throw ShapeError("weighted_segment_sum expects rows(msgs) x 1 weights");
  if (static_cast<Eigen::Index>(seg_ids.size()) != m.rows())
    throw ShapeError("weighted_segment_sum segment ids do not match rows");
  Node n;
  n.op = Op::kWeightedSegmentSum;
  n.a = msgs.id; n.b = weights.id;
  n.i0 = segments;
  n.value = Eigen::MatrixXd::Zero(segments, m.cols());
  for (Eigen::Index e = 0; e < m.rows(); ++e) {
    if (seg_ids[e] >= segments) throw IndexError("segment id out of range");
    n.value.row(seg_ids[e]) += w(e, 0) * m.row(e);
  }
  n.ids = std::make_shared<const std::vector<uint32_t>>(std::move(seg_ids));
  return push(std::move(n));
}

Tensor Tape::sparse_matmul(const SparseRows* sparse, Tensor dense) {
  Node n;
  n.op = Op::kSparseMatMul;
  n.a = dense.id;
  n.sparse = sparse;
  n.value = sparse->multiply(value(dense));
  return push(std::move(n));
}

Eigen::MatrixXd& Tape::grad_buffer(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) {
    const Eigen::MatrixXd& v = (n.op == Op::kLeaf) ? *n.external : n.value;
    n.grad = Eigen::MatrixXd::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

void Tape::accumulate_grad(Tensor t, const Eigen::MatrixXd& g) {
  const Eigen::MatrixXd& v = value(t);
  if (g.rows() != v.rows() || g.cols() != v.cols())
    throw ShapeError("gradient seed shape mismatch");
  grad_buffer(t.id) += g;
}

void Tape::backward(Tensor t) {
  if (rows(t) != 1 || cols(t) != 1) throw ShapeError("backward expects a 1x1 scalar output");
  accumulate_grad(t, Eigen::MatrixXd::Ones(1, 1));
  run_backward();
}

void Tape::run_backward() {
  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    if (nodes_[id].grad.size() == 0) continue;
    if (check_finite_ && !nodes_[id].grad.allFinite())
      throw NumericError("non-finite gradient in backward pass");
    backward_node(id);
  }
}

void Tape::backward_node(int id) {
  Node& n = nodes_[id];
  const Eigen::MatrixXd& g = n.grad;
  switch (n.op) {
    case Op::kLeaf:
    case Op::kConstant:
      break;
    case Op::kMatMul:
      grad_buffer(n.a) += g * value(Tensor{n.b}).transpose();
      grad_buffer(n.b) += value(Tensor{n.a}).transpose() * g;
      break;
    case Op::kMatMulBT:
      grad_buffer(n.a) += g * value(Tensor{n.b});
      grad_buffer(n.b) += g.transpose() * value(Tensor{n.a});
      break;
    case Op::kAdd:
      grad_buffer(n.a) += g;
      grad_buffer(n.b) += g;
      break;
    case Op::kAddRowVector:
      grad_buffer(n.a) += g;
      grad_buffer(n.b) += g.colwise().sum();
      break;
    case Op::kAddScalar:
      grad_buffer(n.a) += g;
      grad_buffer(n.b)(0, 0) += g.sum();
      break;
    case Op::kSub:
      grad_buffer(n.a) += g;
      grad_buffer(n.b) -= g;
      break;
    case Op::kNeg:
      grad_buffer(n.a) -= g;
      break;
    case Op::kOneMinus:
      grad_buffer(n.a) -= g;
      break;
    case Op::kMul:
      grad_buffer(n.a) += g.cwiseProduct(value(Tensor{n.b}));
      grad_buffer(n.b) += g.cwiseProduct(value(Tensor{n.a}));
      break;
    case Op::kScale:
      grad_buffer(n.a) += n.s * g;
      break;
    case Op::kSigmoid:
      grad_buffer(n.a) += g.cwiseProduct(
          n.value.cwiseProduct((1.0 - n.value.array()).matrix()));
      break;
    case Op::kSoftplus:
      grad_buffer(n.a) += g.cwiseProduct(
          value(Tensor{n.a}).unaryExpr([](double x) { return stable_sigmoid(x); }));
      break;
    case Op::kLog:
      grad_buffer(n.a) += g.cwiseQuotient(value(Tensor{n.a}));
      break;
    case Op::kSumAll:
      grad_buffer(n.a).array() += g(0, 0);
      break;
    case Op::kMeanRows: {
      Eigen::MatrixXd& ga = grad_buffer(n.a);
      ga.rowwise() += (g.row(0) / static_cast<double>(ga.rows()));
      break;
    }
    case Op::kHstack: {
      Eigen::Index ca = value(Tensor{n.a}).cols();
      grad_buffer(n.a) += g.leftCols(ca);
      grad_buffer(n.b) += g.rightCols(g.cols() - ca);
      break;
    }
    case Op::kRowSlice:
      grad_buffer(n.a).middleRows(n.i0, n.i1) += g;
      break;
    case Op::kGather: {
      Eigen::MatrixXd& ga = grad_buffer(n.a);
      const auto& ids = *n.ids;
      for (size_t i = 0; i < ids.size(); ++i)
        ga.row(ids[i]) += g.row(static_cast<Eigen::Index>(i));
      break;
    }
    case Op::kWeightedSegmentSum: {
      const Eigen::MatrixXd& msgs = value(Tensor{n.a});
      const Eigen::MatrixXd& w = value(Tensor{n.b});
      Eigen::MatrixXd& gm = grad_buffer(n.a);
      Eigen::MatrixXd& gw = grad_buffer(n.b);
      const auto& seg = *n.ids;
      for (Eigen::Index e = 0; e < msgs.rows(); ++e) {
        gm.row(e) += w(e, 0) * g.row(seg[e]);
        gw(e, 0) += g.row(seg[e]).dot(msgs.row(e));
      }
      break;
    }
    case Op::kSparseMatMul:
      n.sparse->add_transposed_multiply(g, grad_buffer(n.a));
      break;
  }
}

bool Tape::has_grad(Tensor t) const { return at(t).grad.size() != 0; }

const Eigen::MatrixXd& Tape::grad(Tensor t) const {
  const Node& n = at(t);
  if (n.grad.size() == 0) throw IndexError("tensor has no gradient");
  return n.grad;
}

void Tape::check_all_finite() const {
  for (const Node& n : nodes_) {
    const Eigen::MatrixXd& v = (n.op == Op::kLeaf) ? *n.external : n.value;
    if (!v.allFinite()) throw NumericError("non-finite value on tape");
    if (n.grad.size() != 0 && !n.grad.allFinite())
      throw NumericError("non-finite gradient on tape");
  }
}

// ----- parameters and optimizer -----

int ParamStore::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  if (find(name) >= 0) throw ConfigError("duplicate parameter name: " + name);
  Param p;
  p.name = name;
  p.value = Eigen::MatrixXd::Zero(rows, cols);
  p.grad = Eigen::MatrixXd::Zero(rows, cols);
  params.push_back(std::move(p));
  return static_cast<int>(params.size()) - 1;
}

int ParamStore::find(const std::string& name) const {
  for (size_t i = 0; i < params.size(); ++i)
    if (params[i].name == name) return static_cast<int>(i);
  return -1;
}

void ParamStore::zero_grads() {
  for (Param& p : params) p.grad.setZero();
}

void ParamStore::check_grads_finite() const {
  for (const Param& p : params)
    if (!p.grad.allFinite())
      throw NumericError("non-finite gradient for parameter " + p.name);
}

ParamBinding bind_params(Tape& tape, const ParamStore& store) {
  ParamBinding b;
  b.leaves.reserve(store.size());
  for (const Param& p : store.params) b.leaves.push_back(tape.leaf(p.value));
  return b;
}

void merge_param_grads(const Tape& tape, const ParamBinding& binding, ParamStore& store) {
  for (size_t i = 0; i < store.size(); ++i)
    if (tape.has_grad(binding.leaves[i])) store.params[i].grad += tape.grad(binding.leaves[i]);
}

void xavier_init(Param& p, RngStream& rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
  for (Eigen::Index r = 0; r < p.value.rows(); ++r)
    for (Eigen::Index c = 0; c < p.value.cols(); ++c)
      p.value(r, c) = rng.uniform(-bound, bound);
}

void Adam::step(ParamStore& store) {
  if (m.empty()) {
    m.resize(store.size());
    v.resize(store.size());
    for (size_t i = 0; i < store.size(); ++i) {
      m[i] = Eigen::MatrixXd::Zero(store[i].value.rows(), store[i].value.cols());
      v[i] = m[i];
    }
  }
  if (m.size() != store.size()) throw ShapeError("optimizer state does not match store");
  store.check_grads_finite();
  ++t;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (size_t i = 0; i < store.size(); ++i) {
    const Eigen::MatrixXd& g = store[static_cast<int>(i)].grad;
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * g.cwiseProduct(g);
    Eigen::MatrixXd mhat = m[i] / bc1;
    Eigen::MatrixXd vhat = v[i] / bc2;
    store[static_cast<int>(i)].value.array() -=
        lr * mhat.array() / (vhat.array().sqrt() + eps);
  }
  store.zero_grads();
}

}  // namespace glar
