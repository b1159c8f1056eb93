#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "glar/errors.hpp"

namespace glar {

// Row-major CSR matrix of doubles with a fixed column count. This is the
// carrier for every static feature/operator matrix fed into the network:
// anchor-count feature rows, relation-count rows, neighbor-mean operators.
// Values are constants of the computation graph (never differentiated
// through), which keeps the autodiff surface small.
struct SparseRows {
  uint32_t cols = 0;
  std::vector<uint32_t> offsets{0};                   // size = rows + 1
  std::vector<std::pair<uint32_t, double>> entries;   // (col, value), row-grouped

  uint32_t rows() const { return static_cast<uint32_t>(offsets.size()) - 1; }

  void append_row(const std::vector<std::pair<uint32_t, double>>& row) {
    for (const auto& [c, v] : row) {
      if (c >= cols) throw IndexError("sparse row entry out of range");
      entries.emplace_back(c, v);
    }
    offsets.push_back(static_cast<uint32_t>(entries.size()));
  }

  // out = S * dense;  dense must have `cols` rows.
  Eigen::MatrixXd multiply(const Eigen::MatrixXd& dense) const {
    if (static_cast<uint32_t>(dense.rows()) != cols)
      throw ShapeError("sparse*dense inner dimension mismatch");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows(), dense.cols());
    for (uint32_t r = 0; r < rows(); ++r)
      for (uint32_t i = offsets[r]; i < offsets[r + 1]; ++i)
        out.row(r) += entries[i].second * dense.row(entries[i].first);
    return out;
  }

  // grad_dense += S^T * grad_out  (the backward of multiply()).
  void add_transposed_multiply(const Eigen::MatrixXd& grad_out, Eigen::MatrixXd& grad_dense) const {
    for (uint32_t r = 0; r < rows(); ++r)
      for (uint32_t i = offsets[r]; i < offsets[r + 1]; ++i)
        grad_dense.row(entries[i].first) += entries[i].second * grad_out.row(r);
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows(), cols);
    for (uint32_t r = 0; r < rows(); ++r)
      for (uint32_t i = offsets[r]; i < offsets[r + 1]; ++i)
        out(r, entries[i].first) += entries[i].second;
    return out;
  }
};

}  // namespace glar
