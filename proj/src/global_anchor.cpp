#include "glar/global_anchor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "glar/rng.hpp"

namespace glar {

RelationalFeatures relational_features(const AugmentedGraph& g, bool multiplicity) {
  RelationalFeatures f;
  f.width = g.relation_count;
  f.rows.resize(g.entity_count);
  std::vector<uint32_t> counts(g.relation_count, 0);
  std::vector<uint32_t> touched;
  for (EntityId n = 0; n < g.entity_count; ++n) {
    touched.clear();
    for (const auto& [rel, nbr] : g.neighbors(n)) {
      (void)nbr;
      if (counts[rel]++ == 0) touched.push_back(rel);
    }
    std::sort(touched.begin(), touched.end());
    for (uint32_t rel : touched) {
      f.rows[n].emplace_back(rel, multiplicity ? counts[rel] : 1u);
      counts[rel] = 0;
    }
  }
  return f;
}

Eigen::MatrixXd RelationalFeatures::normalized_dense() const {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(entity_count(), width);
  for (uint32_t n = 0; n < entity_count(); ++n)
    for (const auto& [rel, c] : rows[n]) x(n, rel) = static_cast<double>(c);
  for (uint32_t n = 0; n < entity_count(); ++n) {
    double norm = x.row(n).norm();
    if (norm > 0) x.row(n) /= norm;
  }
  return x;
}

namespace {

// Squared Euclidean distances from every point to every centroid, plus the
// per-point argmin with ties resolved to the lowest cluster index.
void nearest_centroids(const Eigen::MatrixXd& x, const Eigen::MatrixXd& c,
                       std::vector<uint32_t>& assign, Eigen::VectorXd* dist2_out) {
  Eigen::VectorXd xn = x.rowwise().squaredNorm();
  Eigen::VectorXd cn = c.rowwise().squaredNorm();
  assign.assign(x.rows(), 0);
  if (dist2_out) dist2_out->resize(x.rows());
  // Row blocks keep the cross-product matrix small.
  constexpr Eigen::Index kBlock = 512;
  for (Eigen::Index r0 = 0; r0 < x.rows(); r0 += kBlock) {
    Eigen::Index rows = std::min(kBlock, x.rows() - r0);
    Eigen::MatrixXd cross = x.middleRows(r0, rows) * c.transpose();  // rows x m
    for (Eigen::Index i = 0; i < rows; ++i) {
      double best = std::numeric_limits<double>::infinity();
      uint32_t best_j = 0;
      // Ascending scan with strict '<' keeps the lowest index on exact ties.
      for (Eigen::Index j = 0; j < c.rows(); ++j) {
        double d = xn(r0 + i) + cn(j) - 2.0 * cross(i, j);
        if (d < best) {
          best = d;
          best_j = static_cast<uint32_t>(j);
        }
      }
      assign[r0 + i] = best_j;
      if (dist2_out) (*dist2_out)(r0 + i) = std::max(0.0, best);
    }
  }
}

}  // namespace

ClusteringModel fit_clusters(const RelationalFeatures& features, uint32_t m, uint64_t seed) {
  uint32_t n = features.entity_count();
  if (m == 0) throw ConfigError("cluster count must be positive");
  if (m > n) throw ConfigError("cluster count exceeds entity count");
  Eigen::MatrixXd x = features.normalized_dense();

  // k-means++ seeding.
  RngStream rng = RngStream(seed).fork(0x6b6d6570);  // clustering stream
  ClusteringModel model;
  model.m = m;
  model.centroids.resize(m, features.width);
  std::vector<Eigen::Index> chosen;
  chosen.push_back(static_cast<Eigen::Index>(rng.below(n)));
  model.centroids.row(0) = x.row(chosen[0]);
  Eigen::VectorXd d2 = (x.rowwise() - x.row(chosen[0])).rowwise().squaredNorm();
  for (uint32_t j = 1; j < m; ++j) {
    double total = d2.sum();
    Eigen::Index pick;
    if (total <= 0.0) {
      pick = static_cast<Eigen::Index>(rng.below(n));  // all mass on chosen points
    } else {
      double target = rng.next_unit() * total;
      double acc = 0.0;
      pick = static_cast<Eigen::Index>(n) - 1;
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        acc += d2(i);
        if (acc >= target) { pick = i; break; }
      }
    }
    chosen.push_back(pick);
    model.centroids.row(j) = x.row(pick);
    d2 = d2.cwiseMin((x.rowwise() - x.row(pick)).rowwise().squaredNorm());
  }

  // Lloyd iterations. The objective (within-cluster squared distance) is
  // non-increasing; stop on assignment fixpoint, relative change < 1e-6, or
  // 100 iterations.
  std::vector<uint32_t> assign, prev_assign;
  Eigen::VectorXd dist2;
  double prev_obj = std::numeric_limits<double>::infinity();
  constexpr uint32_t kMaxIter = 100;
  constexpr double kRelTol = 1e-6;
  for (uint32_t iter = 1; iter <= kMaxIter; ++iter) {
    nearest_centroids(x, model.centroids, assign, &dist2);
    model.objective = dist2.sum();
    model.objective_trace.push_back(model.objective);
    model.iterations = iter;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(m, features.width);
    std::vector<uint32_t> counts(m, 0);
    for (uint32_t i = 0; i < n; ++i) {
      sums.row(assign[i]) += x.row(i);
      ++counts[assign[i]];
    }
    for (uint32_t j = 0; j < m; ++j)
      if (counts[j] > 0) model.centroids.row(j) = sums.row(j) / counts[j];
      // empty cluster: centroid kept as-is

    bool stable = (assign == prev_assign);
    bool converged = std::isfinite(prev_obj) &&
                     std::abs(prev_obj - model.objective) <= kRelTol * std::max(prev_obj, 1e-30);
    prev_assign = assign;
    prev_obj = model.objective;
    if (stable || converged) break;
  }
  return model;
}

std::vector<uint32_t> assign_clusters(const ClusteringModel& model,
                                      const RelationalFeatures& features) {
  if (features.width != static_cast<uint32_t>(model.centroids.cols()))
    throw ShapeError("relational feature width does not match fitted centroids");
  Eigen::MatrixXd x = features.normalized_dense();
  std::vector<uint32_t> assign;
  nearest_centroids(x, model.centroids, assign, nullptr);
  return assign;
}

GlobalAnchorSet select_global_anchors(const ClusteringModel& model,
                                      const RelationalFeatures& features,
                                      const KnowledgeGraph& base) {
  if (features.entity_count() != base.entity_count())
    throw ShapeError("feature rows do not match graph entity count");
  GlobalAnchorSet set;
  set.m = model.m;
  set.assignment = assign_clusters(model, features);
  set.anchors.assign(model.m, std::nullopt);
  set.cluster_sizes.assign(model.m, 0);
  for (EntityId n = 0; n < base.entity_count(); ++n) {
    uint32_t c = set.assignment[n];
    ++set.cluster_sizes[c];
    if (!set.anchors[c]) {
      set.anchors[c] = n;
      continue;
    }
    uint32_t best = base.degree(*set.anchors[c]);
    uint32_t cur = base.degree(n);
    if (cur > best) set.anchors[c] = n;  // ties keep the earlier (lower) id
  }
  return set;
}

std::vector<std::vector<uint32_t>> GlobalAnchorSet::realizer_lists() const {
  std::vector<std::vector<uint32_t>> lists(m);
  for (uint32_t c = 0; c < m; ++c)
    if (anchors[c]) lists[c].push_back(*anchors[c]);
  return lists;
}

AnchorCounts label_global_features(const AugmentedGraph& g, const GlobalAnchorSet& anchors,
                                   uint32_t hops) {
  std::vector<uint32_t> nbrs(g.edges.size());
  for (size_t i = 0; i < g.edges.size(); ++i) nbrs[i] = g.edges[i].second;
  return label_anchor_counts(g.entity_count, g.offsets, nbrs, anchors.realizer_lists(),
                             anchors.m, hops);
}

}  // namespace glar
