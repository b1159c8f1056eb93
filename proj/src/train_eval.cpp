#include "glar/train_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

namespace glar {

std::vector<DirectedQuery> directed_queries(const std::vector<Triple>& triples,
                                            uint32_t base_relation_count) {
  std::vector<DirectedQuery> out;
  out.reserve(2 * triples.size());
  for (const Triple& t : triples) {
    out.push_back({t.head, t.rel, t.tail, t});
    out.push_back({t.tail, t.rel + base_relation_count, t.head, t});
  }
  return out;
}

std::shared_ptr<const QueryContext> QueryContextCache::get(const AugmentedGraph& g,
                                                           EntityId center,
                                                           const ModelHyper& hyper,
                                                           Instrumentation* instr) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = index_.find(center);
    if (it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      if (instr) ++instr->cache_hits;
      return it->second->second;
    }
  }
  // Build outside the lock; a racing duplicate build is harmless.
  auto ctx = std::make_shared<const QueryContext>(
      build_query_context(g, center, hyper, std::nullopt, instr));
  std::lock_guard<std::mutex> lock(mu_);
  auto it = index_.find(center);
  if (it != index_.end()) return it->second->second;
  lru_.emplace_front(center, ctx);
  index_[center] = lru_.begin();
  used_ += ctx->approx_bytes();
  while (used_ > budget_ && lru_.size() > 1) {
    auto& [old_center, old_ctx] = lru_.back();
    used_ -= old_ctx->approx_bytes();
    index_.erase(old_center);
    lru_.pop_back();
  }
  return ctx;
}

ScoringSetup make_scoring_setup(const KnowledgeGraph& graph,
                                const std::vector<Triple>& eval_triples,
                                const ModelParams& params, const ClusteringModel& clusters,
                                bool relational_multiplicity) {
  ScoringSetup s;
  s.base = &graph;
  s.aug = augment(graph);
  s.features = relational_features(s.aug, relational_multiplicity);
  s.gctx = build_global_context(s.aug, clusters, s.features, graph, params.hyper);
  s.global_layers = global_embeddings(params, s.gctx);
  s.known.reserve(graph.triples.size() + eval_triples.size());
  for (const Triple& t : graph.triples) s.known.insert(t);
  for (const Triple& t : eval_triples) s.known.insert(t);
  return s;
}

std::vector<EntityId> sample_filtered_negatives(const ScoringSetup& setup,
                                                const DirectedQuery& q, uint32_t count,
                                                RngStream rng) {
  uint32_t entity_count = setup.aug.entity_count;
  uint32_t base_rels = setup.aug.base_relation_count;
  bool tail_query = q.rel < base_rels;
  std::vector<EntityId> out;
  out.reserve(count);
  if (entity_count <= 1) return out;
  constexpr uint32_t kMaxAttemptsPerSlot = 256;
  for (uint32_t slot = 0; slot < count; ++slot) {
    for (uint32_t attempt = 0; attempt < kMaxAttemptsPerSlot; ++attempt) {
      EntityId x = static_cast<EntityId>(rng.below(entity_count));
      if (x == q.answer) continue;
      Triple corrupted = tail_query ? Triple{q.base.head, q.base.rel, x}
                                    : Triple{x, q.base.rel, q.base.tail};
      if (setup.known.contains(corrupted)) continue;
      out.push_back(x);
      break;
    }
  }
  return out;
}

namespace {

// Runs fn(query_index, per-thread instrumentation) over [0, n), optionally on
// several workers. Results must be written to per-index slots by fn; worker
// instrumentation is merged in worker order so counter totals are stable.
template <typename Fn>
void for_each_query(size_t n, uint32_t threads, Instrumentation* instr, Fn&& fn) {
  uint32_t t = std::max<uint32_t>(1, threads);
  if (t == 1) {
    Instrumentation local;
    for (size_t i = 0; i < n; ++i) fn(i, local);
    if (instr) instr->merge(local);
    return;
  }
  std::vector<Instrumentation> per(t);
  std::vector<std::thread> workers;
  std::mutex err_mu;
  std::exception_ptr first_error;
  for (uint32_t w = 0; w < t; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (size_t i = w; i < n; i += t) fn(i, per[w]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : workers) th.join();
  if (first_error) std::rethrow_exception(first_error);
  if (instr)
    for (const Instrumentation& p : per) instr->merge(p);
}

struct DegreeBuckets {
  static constexpr const char* kNames[3] = {"deg0-2", "deg3-5", "deg6+"};
  static size_t bucket(uint32_t degree) { return degree < 3 ? 0 : (degree < 6 ? 1 : 2); }
};

}  // namespace

HitsResult hits_at_k(const ModelParams& params, const ScoringSetup& setup,
                     const std::vector<Triple>& eval_triples, const RankingOptions& opts,
                     Instrumentation* instr) {
  std::vector<DirectedQuery> queries =
      directed_queries(eval_triples, setup.aug.base_relation_count);
  std::vector<uint8_t> hit(queries.size(), 0);

  QueryContextCache cache(opts.cache_bytes);
  RngStream neg_base = RngStream(opts.seed).fork(0x6e6567);  // "neg"

  for_each_query(queries.size(), opts.threads, instr, [&](size_t qi, Instrumentation& ins) {
    const DirectedQuery& q = queries[qi];
    std::shared_ptr<const QueryContext> ctx;
    if (opts.use_cache) {
      ctx = cache.get(setup.aug, q.center, params.hyper, &ins);
    } else {
      ctx = std::make_shared<const QueryContext>(
          build_query_context(setup.aug, q.center, params.hyper, std::nullopt, &ins));
    }
    std::vector<EntityId> negatives =
        sample_filtered_negatives(setup, q, opts.negatives, neg_base.fork(qi));
    std::vector<EntityId> candidates;
    candidates.reserve(1 + negatives.size());
    candidates.push_back(q.answer);
    candidates.insert(candidates.end(), negatives.begin(), negatives.end());
    std::vector<double> logits =
        score_query_frozen(params, setup.global_layers, *ctx, q.rel, candidates, &ins);
    uint32_t not_below = 0;  // negatives scoring >= the answer: ties hurt
    for (size_t i = 1; i < logits.size(); ++i)
      if (logits[i] >= logits[0]) ++not_below;
    hit[qi] = not_below < opts.hits_k ? 1 : 0;
  });

  HitsResult res;
  res.queries = queries.size();
  if (opts.group_by_degree) {
    res.bucket_names.assign(std::begin(DegreeBuckets::kNames), std::end(DegreeBuckets::kNames));
    res.bucket_queries.assign(3, 0);
    res.bucket_hits.assign(3, 0);
  }
  for (size_t qi = 0; qi < queries.size(); ++qi) {
    res.hits += hit[qi];
    if (opts.group_by_degree) {
      size_t b = DegreeBuckets::bucket(setup.base->degree(queries[qi].answer));
      ++res.bucket_queries[b];
      res.bucket_hits[b] += hit[qi];
    }
  }
  res.hits_fraction =
      res.queries ? static_cast<double>(res.hits) / static_cast<double>(res.queries) : 0.0;
  return res;
}

double auc_pr(const std::vector<double>& pos_scores, const std::vector<double>& neg_scores) {
  if (pos_scores.empty()) return 0.0;
  std::vector<std::pair<double, int>> all;  // (score, is_positive)
  all.reserve(pos_scores.size() + neg_scores.size());
  for (double s : pos_scores) all.emplace_back(s, 1);
  for (double s : neg_scores) all.emplace_back(s, 0);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.first > b.first;  // descending score; equal scores form one step
  });
  double total_pos = static_cast<double>(pos_scores.size());
  uint64_t tp = 0, fp = 0;
  double prev_recall = 0.0, area = 0.0;
  size_t i = 0;
  while (i < all.size()) {
    size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) {
      if (all[j].second) ++tp;
      else ++fp;
      ++j;
    }
    double recall = static_cast<double>(tp) / total_pos;
    double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

AucResult auc_pr_eval(const ModelParams& params, const ScoringSetup& setup,
                      const std::vector<Triple>& eval_triples, const AucOptions& opts,
                      Instrumentation* instr) {
  AucResult res;
  QueryContextCache cache(opts.cache_bytes);
  uint32_t entity_count = setup.aug.entity_count;

  for (uint32_t s = 0; s < opts.seeds; ++s) {
    uint64_t seed = opts.base_seed + s;
    RngStream seed_rng = RngStream(seed).fork(0x617563);  // "auc"
    std::vector<double> pos(eval_triples.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<double> neg(eval_triples.size(), std::numeric_limits<double>::quiet_NaN());

    for_each_query(eval_triples.size(), opts.threads, instr,
                   [&](size_t ti, Instrumentation& ins) {
      const Triple& t = eval_triples[ti];
      RngStream rng = seed_rng.fork(ti);
      auto ctx_for = [&](EntityId center) {
        return opts.use_cache
                   ? cache.get(setup.aug, center, params.hyper, &ins)
                   : std::make_shared<const QueryContext>(build_query_context(
                         setup.aug, center, params.hyper, std::nullopt, &ins));
      };
      // Every triple (a, r, b) is scored canonically: query (a, r, ?) against
      // candidate b. The corrupted partner replaces head or tail on a coin.
      bool corrupt_tail = rng.below(2) == 0;
      EntityId x = 0;
      bool have_neg = false;
      for (uint32_t attempt = 0; attempt < 256 && entity_count > 1; ++attempt) {
        x = static_cast<EntityId>(rng.below(entity_count));
        Triple corrupted = corrupt_tail ? Triple{t.head, t.rel, x} : Triple{x, t.rel, t.tail};
        if ((corrupt_tail && x == t.tail) || (!corrupt_tail && x == t.head)) continue;
        if (setup.known.contains(corrupted)) continue;
        have_neg = true;
        break;
      }
      auto head_ctx = ctx_for(t.head);
      if (have_neg && corrupt_tail) {
        std::vector<double> lg = score_query_frozen(params, setup.global_layers, *head_ctx,
                                                    t.rel, {t.tail, x}, &ins);
        pos[ti] = 1.0 / (1.0 + std::exp(-lg[0]));
        neg[ti] = 1.0 / (1.0 + std::exp(-lg[1]));
      } else {
        std::vector<double> lg = score_query_frozen(params, setup.global_layers, *head_ctx,
                                                    t.rel, {t.tail}, &ins);
        pos[ti] = 1.0 / (1.0 + std::exp(-lg[0]));
        if (have_neg) {
          auto x_ctx = ctx_for(x);
          std::vector<double> ln = score_query_frozen(params, setup.global_layers, *x_ctx,
                                                      t.rel, {t.tail}, &ins);
          neg[ti] = 1.0 / (1.0 + std::exp(-ln[0]));
        }
      }
    });

    std::vector<double> pos_clean, neg_clean;
    for (double v : pos)
      if (!std::isnan(v)) pos_clean.push_back(v);
    for (double v : neg)
      if (!std::isnan(v)) neg_clean.push_back(v);
    res.per_seed.push_back(auc_pr(pos_clean, neg_clean));
  }
  double sum = 0.0;
  for (double v : res.per_seed) sum += v;
  res.mean = res.per_seed.empty() ? 0.0 : sum / static_cast<double>(res.per_seed.size());
  return res;
}

// ----- training -----

namespace {

std::vector<Eigen::MatrixXd> snapshot_values(const ParamStore& store) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(store.size());
  for (const Param& p : store.params) out.push_back(p.value);
  return out;
}

void restore_values(ParamStore& store, const std::vector<Eigen::MatrixXd>& values) {
  for (size_t i = 0; i < store.size(); ++i) store[static_cast<int>(i)].value = values[i];
}

}  // namespace

TrainResult train_model(const DatasetSplit& split, const RunConfig& cfg) {
  StopWatch total_watch;
  cfg.validate();
  const KnowledgeGraph& graph = split.train_graph;
  AugmentedGraph aug = augment(graph);
  ModelHyper hyper = cfg.hyper(aug.relation_count);

  RelationalFeatures features = relational_features(aug, cfg.relational_multiplicity);
  ClusteringModel clusters = fit_clusters(features, cfg.clusters, cfg.seed);
  GlobalContext gctx = build_global_context(aug, clusters, features, graph, hyper);
  ModelParams params = init_params(hyper, cfg.seed);

  std::vector<DirectedQuery> queries =
      directed_queries(graph.triples, aug.base_relation_count);
  std::vector<uint32_t> order(queries.size());
  for (uint32_t i = 0; i < order.size(); ++i) order[i] = i;

  Adam adam;
  adam.lr = cfg.lr;

  // Validation state: negatives are drawn with the same seed every epoch so
  // epoch-to-epoch hits are comparable, and the loop early-stops on them.
  bool has_valid = !split.valid_triples.empty();
  std::unordered_set<Triple, TripleHash> valid_known;
  if (has_valid) {
    for (const Triple& t : graph.triples) valid_known.insert(t);
    for (const Triple& t : split.valid_triples) valid_known.insert(t);
  }
  RankingOptions valid_opts;
  valid_opts.negatives = cfg.negatives_eval;
  valid_opts.hits_k = cfg.hits_k;
  valid_opts.seed = cfg.seed;
  valid_opts.threads = cfg.effective_threads();
  valid_opts.cache_bytes = cfg.cache_mb << 20;

  TrainResult result;
  double best_valid = -1.0;
  std::vector<Eigen::MatrixXd> best_values;
  uint32_t epochs_since_best = 0;

  RngStream shuffle_base = RngStream(cfg.seed).fork(0x73686166);  // "shuf"
  RngStream neg_root = RngStream(cfg.seed).fork(0x746e6567);      // "tneg"

  for (uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    RngStream shuffle_rng = shuffle_base.fork(epoch);
    for (size_t i = order.size(); i > 1; --i) {
      size_t j = shuffle_rng.below(i);
      std::swap(order[i - 1], order[j]);
    }
    RngStream epoch_neg = neg_root.fork(epoch);

    double epoch_loss = 0.0;
    for (size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      size_t end = std::min(order.size(), begin + static_cast<size_t>(cfg.batch_size));

      Tape global_tape;
      ParamBinding global_pb = bind_params(global_tape, params.store);
      std::vector<Tensor> global_tensors = run_global_pass(global_tape, global_pb, params, gctx);
      std::vector<Eigen::MatrixXd> global_grads(
          global_tensors.size());  // lazily sized on first contribution

      double batch_loss = 0.0;
      for (size_t pos = begin; pos < end; ++pos) {
        const DirectedQuery& q = queries[order[pos]];
        RngStream qrng = epoch_neg.fork(pos);
        EntityId negative = q.answer;
        while (negative == q.answer)
          negative = static_cast<EntityId>(qrng.below(aug.entity_count));

        // The query's own edge is hidden from its subgraph: extraction and
        // induced edges skip (h, r, t) and its inverse, so the answer can
        // only be found through alternative evidence.
        QueryContext ctx = build_query_context(aug, q.center, hyper, q.base);

        Tape tape;
        ParamBinding pb = bind_params(tape, params.store);
        std::vector<Tensor> gleaves;
        gleaves.reserve(global_tensors.size());
        for (Tensor gt : global_tensors) gleaves.push_back(tape.leaf(global_tape.value(gt)));
        LocalPass local = run_local_pass(tape, pb, params, ctx, gleaves);
        CandidateScores cs = score_candidates(tape, pb, params, ctx, gleaves, local, q.rel,
                                              {q.answer, negative});
        Tensor loss = logistic_loss(tape, candidate_logit(tape, cs, 0),
                                    candidate_logit(tape, cs, 1));
        batch_loss += tape.value(loss)(0, 0);
        tape.backward(loss);
        merge_param_grads(tape, pb, params.store);
        for (size_t l = 0; l < gleaves.size(); ++l) {
          if (!tape.has_grad(gleaves[l])) continue;
          if (global_grads[l].size() == 0)
            global_grads[l] = Eigen::MatrixXd::Zero(tape.grad(gleaves[l]).rows(),
                                                    tape.grad(gleaves[l]).cols());
          global_grads[l] += tape.grad(gleaves[l]);
        }
      }

      if (!std::isfinite(batch_loss)) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << ", batch starting at "
            << begin;
        throw NumericError(msg.str());
      }
      for (size_t l = 0; l < global_tensors.size(); ++l)
        if (global_grads[l].size() != 0)
          global_tape.accumulate_grad(global_tensors[l], global_grads[l]);
      global_tape.run_backward();
      merge_param_grads(global_tape, global_pb, params.store);
      adam.step(params.store);  // validates gradient finiteness
      epoch_loss += batch_loss;
    }

    result.epoch_losses.push_back(epoch_loss);
    result.epochs_run = epoch;

    double vh = std::numeric_limits<double>::quiet_NaN();
    if (has_valid && epoch % cfg.valid_every == 0) {
      ScoringSetup vsetup;
      vsetup.base = &graph;
      vsetup.aug = aug;  // copy is cheap relative to an epoch
      vsetup.features = features;
      vsetup.gctx = build_global_context(vsetup.aug, clusters, vsetup.features, graph, hyper);
      vsetup.global_layers = global_embeddings(params, vsetup.gctx);
      vsetup.known = valid_known;
      HitsResult hr = hits_at_k(params, vsetup, split.valid_triples, valid_opts, nullptr);
      vh = hr.hits_fraction;
      if (vh > best_valid) {
        best_valid = vh;
        result.best_epoch = epoch;
        best_values = snapshot_values(params.store);
        epochs_since_best = 0;
      } else {
        ++epochs_since_best;
        if (epochs_since_best >= cfg.patience) {
          result.valid_hits.push_back(vh);
          break;
        }
      }
    }
    result.valid_hits.push_back(vh);
  }
  while (result.valid_hits.size() < result.epoch_losses.size())
    result.valid_hits.push_back(std::numeric_limits<double>::quiet_NaN());

  if (!best_values.empty()) restore_values(params.store, best_values);
  result.params = std::move(params);
  result.clusters = std::move(clusters);
  result.train_seconds = total_watch.seconds();
  return result;
}

// ----- reasoning-time benchmark -----

std::vector<BenchRow> bench_reasoning(const ModelParams& params, const ScoringSetup& setup,
                                      const std::vector<Triple>& eval_triples,
                                      const std::vector<uint32_t>& negative_counts,
                                      uint64_t seed, uint32_t hits_k,
                                      const std::string& version) {
  std::vector<BenchRow> rows;
  for (uint32_t negatives : negative_counts) {
    RankingOptions opts;
    opts.negatives = negatives;
    opts.hits_k = hits_k;
    opts.seed = seed;
    opts.use_cache = false;  // every query pays extraction: honest per-query cost
    opts.threads = 1;
    Instrumentation instr;
    StopWatch watch;
    HitsResult hr = hits_at_k(params, setup, eval_triples, opts, &instr);
    BenchRow row;
    row.version = version;
    row.negatives = negatives;
    row.seconds = watch.seconds();
    row.extraction_s = instr.extraction_seconds;
    row.labeling_s = instr.labeling_seconds;
    row.forward_s = instr.forward_seconds;
    row.directed_queries = hr.queries;
    row.extractions = instr.extractions;
    row.hits_fraction = hr.hits_fraction;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace glar
