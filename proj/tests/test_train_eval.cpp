#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "glar/synth.hpp"
#include "glar/train_eval.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace glar;

namespace {

// A tiny learnable split: two entity worlds sharing one rule r0(x,y) => r1(x,y).
DatasetSplit rule_split(uint32_t pairs_train, uint32_t pairs_test, uint32_t holdout) {
  std::ostringstream train, test_graph, test_eval;
  for (uint32_t i = 0; i < pairs_train; ++i) {
    train << "a" << i << "\tr0\tb" << i << "\n";
    if (i >= holdout)
      train << "a" << i << "\tr1\tb" << i << "\n";
    train << "b" << i << "\tr2\ta" << (i + 1) % pairs_train << "\n";
  }
  for (uint32_t i = 0; i < pairs_test; ++i) {
    test_graph << "x" << i << "\tr0\ty" << i << "\n";
    test_graph << "y" << i << "\tr2\tx" << (i + 1) % pairs_test << "\n";
    test_eval << "x" << i << "\tr1\ty" << i << "\n";
  }
  // The train-side eval list: the held-out r1 pairs.
  std::ostringstream train_eval;
  for (uint32_t i = 0; i < holdout; ++i) train_eval << "a" << i << "\tr1\tb" << i << "\n";

  testutil::TempDir dir;  // local write, loaded before destruction
  testutil::write_file(dir.path() / "train.txt", train.str());
  testutil::write_file(dir.path() / "valid.txt", train_eval.str());
  testutil::write_file(dir.path() / "test_graph.txt", test_graph.str());
  testutil::write_file(dir.path() / "test.txt", test_eval.str());
  return load_split(dir.path().string());
}

RunConfig small_cfg() {
  RunConfig cfg;
  cfg.dim = 8;
  cfg.layers = 1;
  cfg.hops = 1;
  cfg.k = 2;
  cfg.clusters = 3;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.lr = 5e-3;
  cfg.seed = 11;
  cfg.valid_every = 2;
  cfg.patience = 50;
  cfg.negatives_eval = 10;
  cfg.hits_k = 5;
  cfg.auc_seeds = 2;
  cfg.threads = 1;
  cfg.cache_mb = 16;
  return cfg;
}

}  // namespace

TEST_CASE("directed queries expand each triple into both directions") {
  std::vector<Triple> triples{{0, 1, 2}, {3, 0, 4}};
  std::vector<DirectedQuery> qs = directed_queries(triples, 5);
  REQUIRE(qs.size() == 4);
  CHECK(qs[0].center == 0);
  CHECK(qs[0].rel == 1);
  CHECK(qs[0].answer == 2);
  CHECK(qs[1].center == 2);
  CHECK(qs[1].rel == 1 + 5);  // inverse id
  CHECK(qs[1].answer == 0);
  CHECK(qs[1].base.head == 0);
  CHECK(qs[1].base.rel == 1);
  CHECK(qs[1].base.tail == 2);
  CHECK(qs[2].rel == 0);
  CHECK(qs[3].rel == 5);
}

TEST_CASE("filtered negative sampling excludes known triples and the answer") {
  DatasetSplit split = rule_split(6, 4, 2);
  ModelHyper h;
  h.dim = 8;
  h.layers = 1;
  h.hops = 1;
  h.k = 2;
  h.clusters = 2;
  h.augmented_relations = 2 * split.train_graph.relation_count();
  ModelParams params = init_params(h, 3);
  RelationalFeatures feats = relational_features(augment(split.train_graph));
  ClusteringModel clusters = fit_clusters(feats, 2, 3);
  ScoringSetup setup =
      make_scoring_setup(split.train_graph, split.valid_triples, params, clusters, true);

  std::vector<DirectedQuery> qs = directed_queries(split.valid_triples, split.train_graph.relation_count());
  for (const DirectedQuery& q : qs) {
    std::vector<EntityId> negs = sample_filtered_negatives(setup, q, 30, RngStream(9));
    bool tail_side = q.rel < split.train_graph.relation_count();
    for (EntityId x : negs) {
      CHECK(x != q.answer);
      CHECK(x < setup.aug.entity_count);
      Triple corrupted = tail_side ? Triple{q.base.head, q.base.rel, x}
                                   : Triple{x, q.base.rel, q.base.tail};
      CHECK(!setup.known.count(corrupted));
    }
    // Determinism in the stream state.
    std::vector<EntityId> again = sample_filtered_negatives(setup, q, 30, RngStream(9));
    CHECK(negs == again);
    std::vector<EntityId> other = sample_filtered_negatives(setup, q, 30, RngStream(10));
    CHECK(negs != other);
  }
}

TEST_CASE("ties count against the answer: zero params rank everything equal") {
  DatasetSplit split = rule_split(6, 4, 2);
  ModelHyper h;
  h.dim = 8;
  h.layers = 1;
  h.hops = 1;
  h.k = 2;
  h.clusters = 2;
  h.augmented_relations = 2 * split.train_graph.relation_count();
  ModelParams zero = make_params(h);  // all-zero weights: every logit is 0
  RelationalFeatures feats = relational_features(augment(split.train_graph));
  ClusteringModel clusters = fit_clusters(feats, 2, 3);
  ScoringSetup setup = make_scoring_setup(split.train_graph, split.valid_triples, zero, clusters, true);

  RankingOptions opts;
  opts.seed = 5;
  opts.use_cache = false;

  // With >= K tied negatives, nothing is a hit.
  opts.negatives = 12;
  opts.hits_k = 10;
  HitsResult r = hits_at_k(zero, setup, split.valid_triples, opts);
  CHECK(r.queries == 2 * split.valid_triples.size());
  CHECK(r.hits == 0);

  // With < K negatives available, even rank-last is a hit.
  opts.negatives = 4;
  HitsResult r2 = hits_at_k(zero, setup, split.valid_triples, opts);
  CHECK(r2.hits == r2.queries);
  CHECK(r2.hits_fraction == 1.0);
}

TEST_CASE("hits' ranking agrees with direct frozen scoring") {
  DatasetSplit split = rule_split(6, 4, 2);
  RunConfig cfg = small_cfg();
  cfg.epochs = 1;
  TrainResult tr = train_model(split, cfg);

  ScoringSetup setup = make_scoring_setup(split.train_graph, split.valid_triples, tr.params,
                                          tr.clusters, cfg.relational_multiplicity);
  RankingOptions opts;
  opts.negatives = 8;
  opts.hits_k = 3;
  opts.seed = cfg.seed;
  opts.use_cache = false;

  HitsResult got = hits_at_k(tr.params, setup, split.valid_triples, opts);

  // Reimplement the loop through the public pieces with the same RNG layout.
  std::vector<DirectedQuery> qs = directed_queries(split.valid_triples, split.train_graph.relation_count());
  RngStream neg_base = RngStream(opts.seed).fork(0x6e6567);
  uint64_t hits = 0;
  for (size_t qi = 0; qi < qs.size(); ++qi) {
    const DirectedQuery& q = qs[qi];
    std::vector<EntityId> negs =
        sample_filtered_negatives(setup, q, opts.negatives, neg_base.fork(qi));
    QueryContext ctx = build_query_context(setup.aug, q.center, tr.params.hyper);
    std::vector<EntityId> cands{q.answer};
    cands.insert(cands.end(), negs.begin(), negs.end());
    std::vector<double> logits =
        score_query_frozen(tr.params, setup.global_layers, ctx, q.rel, cands);
    uint32_t tied_or_above = 0;
    for (size_t i = 1; i < logits.size(); ++i)
      if (logits[i] >= logits[0]) ++tied_or_above;
    if (tied_or_above < opts.hits_k) ++hits;
  }
  CHECK(got.hits == hits);
  CHECK(got.queries == qs.size());
}

TEST_CASE("degree buckets partition the query count") {
  DatasetSplit split = rule_split(6, 4, 2);
  RunConfig cfg = small_cfg();
  cfg.epochs = 1;
  TrainResult tr = train_model(split, cfg);
  ScoringSetup setup = make_scoring_setup(split.train_graph, split.valid_triples, tr.params,
                                          tr.clusters, cfg.relational_multiplicity);
  RankingOptions opts;
  opts.negatives = 5;
  opts.seed = 3;
  opts.use_cache = false;
  opts.group_by_degree = true;
  HitsResult r = hits_at_k(tr.params, setup, split.valid_triples, opts);
  REQUIRE(r.bucket_names.size() == 3);
  uint64_t q_total = 0, h_total = 0;
  for (size_t b = 0; b < r.bucket_names.size(); ++b) {
    q_total += r.bucket_queries[b];
    h_total += r.bucket_hits[b];
  }
  CHECK(q_total == r.queries);
  CHECK(h_total == r.hits);
}

TEST_CASE("auc_pr matches the threshold-sweep oracle") {
  RngStream rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    size_t np = 1 + rng.below(20), nn = 1 + rng.below(20);
    std::vector<double> pos, neg;
    // Coarse grid scores force plenty of cross-class ties.
    for (size_t i = 0; i < np; ++i) pos.push_back(rng.below(5) * 0.25);
    for (size_t i = 0; i < nn; ++i) neg.push_back(rng.below(5) * 0.25);
    double got = auc_pr(pos, neg);
    double want = oracle::auc_pr_naive(pos, neg);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }

  CHECK(auc_pr({1.0, 0.9}, {0.1, 0.2}) == 1.0);                    // separable
  CHECK(auc_pr({0.5, 0.5}, {0.5, 0.5}) == doctest::Approx(0.5));   // all tied, balanced
  CHECK(auc_pr({0.3}, {}) == 1.0);                                 // no negatives
}

TEST_CASE("cross-entropy agrees with the tape loss on training-like values") {
  std::vector<double> pos{0.73, 0.21, 0.99}, neg{0.4, 0.02};
  double ce = cross_entropy_loss(pos, neg);
  Tape tape;
  Eigen::MatrixXd pl(3, 1), nl(2, 1);
  auto logit = [](double p) { return std::log(p / (1 - p)); };
  pl << logit(0.73), logit(0.21), logit(0.99);
  nl << logit(0.4), logit(0.02);
  Tensor loss = logistic_loss(tape, tape.constant(pl), tape.constant(nl));
  CHECK(tape.value(loss)(0, 0) == doctest::Approx(ce).epsilon(1e-10));
}

TEST_CASE("context cache: hits, eviction budget, reuse") {
  DatasetSplit split = rule_split(8, 4, 2);
  AugmentedGraph aug = augment(split.train_graph);
  ModelHyper h;
  h.dim = 8;
  h.layers = 1;
  h.hops = 1;
  h.k = 2;
  h.clusters = 2;
  h.augmented_relations = aug.relation_count;

  Instrumentation instr;
  QueryContextCache cache(8ull << 20);
  auto c1 = cache.get(aug, 0, h, &instr);
  auto c2 = cache.get(aug, 0, h, &instr);
  CHECK(c1.get() == c2.get());
  CHECK(instr.extractions == 1);
  CHECK(instr.cache_hits == 1);
  auto c3 = cache.get(aug, 1, h, &instr);
  CHECK(instr.extractions == 2);
  CHECK(cache.used_bytes() >= c1->approx_bytes());

  // A tiny budget keeps at most one context resident but must still serve.
  QueryContextCache tiny(1);
  Instrumentation i2;
  auto t1 = tiny.get(aug, 0, h, &i2);
  auto t2 = tiny.get(aug, 1, h, &i2);
  auto t3 = tiny.get(aug, 0, h, &i2);
  CHECK(i2.extractions == 3);  // 0 was evicted by 1
  CHECK(t1->sub.node_count() == t3->sub.node_count());
  CHECK(tiny.used_bytes() <= std::max<uint64_t>(1, t3->approx_bytes()));
}

TEST_CASE("eval counts extractions per distinct center when cached") {
  DatasetSplit split = rule_split(6, 4, 2);
  RunConfig cfg = small_cfg();
  cfg.epochs = 1;
  TrainResult tr = train_model(split, cfg);
  ScoringSetup setup = make_scoring_setup(split.test_graph, split.test_triples, tr.params,
                                          tr.clusters, cfg.relational_multiplicity);

  std::vector<DirectedQuery> qs = directed_queries(split.test_triples, split.train_graph.relation_count());
  std::unordered_set<EntityId> centers;
  for (const auto& q : qs) centers.insert(q.center);

  RankingOptions opts;
  opts.negatives = 4;
  opts.seed = 7;

  opts.use_cache = true;
  Instrumentation cached;
  hits_at_k(tr.params, setup, split.test_triples, opts, &cached);
  CHECK(cached.extractions == centers.size());
  CHECK(cached.cache_hits == qs.size() - centers.size());

  opts.use_cache = false;
  Instrumentation uncached;
  hits_at_k(tr.params, setup, split.test_triples, opts, &uncached);
  CHECK(uncached.extractions == qs.size());
  CHECK(uncached.cache_hits == 0);
}

TEST_CASE("training: loss drops, library API is deterministic, thread count is neutral") {
  DatasetSplit split = rule_split(10, 6, 3);
  RunConfig cfg = small_cfg();
  cfg.epochs = 8;
  cfg.valid_every = 4;

  TrainResult a = train_model(split, cfg);
  REQUIRE(a.epochs_run >= 2);
  REQUIRE(a.epoch_losses.size() == a.epochs_run);
  CHECK(a.epoch_losses.back() < a.epoch_losses.front());
  CHECK(a.valid_hits.size() == a.epochs_run);

  TrainResult b = train_model(split, cfg);
  REQUIRE(b.epochs_run == a.epochs_run);
  for (uint32_t e = 0; e < a.epochs_run; ++e)
    CHECK(a.epoch_losses[e] == b.epoch_losses[e]);  // bit-identical reruns
  for (size_t i = 0; i < a.params.store.size(); ++i)
    CHECK((a.params.store.params[i].value.array() ==
           b.params.store.params[i].value.array()).all());

  // Same metrics regardless of eval threading.
  ScoringSetup s1 = make_scoring_setup(split.test_graph, split.test_triples, a.params,
                                       a.clusters, cfg.relational_multiplicity);
  RankingOptions opts;
  opts.negatives = 6;
  opts.seed = 19;
  opts.threads = 1;
  HitsResult h1 = hits_at_k(a.params, s1, split.test_triples, opts);
  opts.threads = 3;
  HitsResult h3 = hits_at_k(a.params, s1, split.test_triples, opts);
  CHECK(h1.hits == h3.hits);
  CHECK(h1.queries == h3.queries);

  AucOptions aopts;
  aopts.seeds = 2;
  aopts.base_seed = 19;
  aopts.threads = 1;
  AucResult auc1 = auc_pr_eval(a.params, s1, split.test_triples, aopts);
  aopts.threads = 3;
  AucResult auc3 = auc_pr_eval(a.params, s1, split.test_triples, aopts);
  REQUIRE(auc1.per_seed.size() == 2);
  for (size_t s = 0; s < auc1.per_seed.size(); ++s)
    CHECK(auc1.per_seed[s] == auc3.per_seed[s]);
  CHECK(auc1.mean == doctest::Approx((auc1.per_seed[0] + auc1.per_seed[1]) / 2).epsilon(1e-15));
  for (double v : auc1.per_seed) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("learning transfers to the disjoint test world") {
  DatasetSplit split = rule_split(12, 8, 4);
  RunConfig cfg = small_cfg();
  cfg.epochs = 30;
  cfg.valid_every = 5;
  cfg.lr = 1e-2;
  TrainResult tr = train_model(split, cfg);

  ScoringSetup setup = make_scoring_setup(split.test_graph, split.test_triples, tr.params,
                                          tr.clusters, cfg.relational_multiplicity);
  RankingOptions opts;
  opts.negatives = 10;
  opts.hits_k = 3;
  opts.seed = 4;
  HitsResult r = hits_at_k(tr.params, setup, split.test_triples, opts);
  // The rule r0 => r1 is fully regular; a trained model must beat chance by a
  // wide margin even at K=3 of 10 negatives.
  CHECK(r.hits_fraction > 0.6);
}

TEST_CASE("benchmark rows: extraction counts and saturation behavior") {
  DatasetSplit split = rule_split(6, 5, 2);
  RunConfig cfg = small_cfg();
  cfg.epochs = 1;
  TrainResult tr = train_model(split, cfg);
  ScoringSetup setup = make_scoring_setup(split.test_graph, split.test_triples, tr.params,
                                          tr.clusters, cfg.relational_multiplicity);

  std::vector<BenchRow> rows =
      bench_reasoning(tr.params, setup, split.test_triples, {3, 6}, 17, 3, "test");
  REQUIRE(rows.size() == 2);
  for (const BenchRow& row : rows) {
    CHECK(row.version == "test");
    CHECK(row.directed_queries == 2 * split.test_triples.size());
    CHECK(row.extractions == row.directed_queries);  // cache off by design
    CHECK(row.seconds > 0.0);
    CHECK(row.extraction_s >= 0.0);
    CHECK(row.forward_s >= 0.0);
    CHECK(row.hits_fraction >= 0.0);
  }
  CHECK(rows[0].negatives == 3);
  CHECK(rows[1].negatives == 6);
}

TEST_CASE("synthetic dataset generator: loadable, disjoint, rule-governed") {
  testutil::TempDir dir;
  SynthSpec spec = SynthSpec::preset("tiny");
  generate_synthetic_dataset(dir.path().string(), spec);
  DatasetSplit split = load_split(dir.path().string());

  CHECK(split.train_graph.triple_count() == spec.train.triples);
  CHECK(split.test_graph.triple_count() == spec.test.triples);
  CHECK(split.valid_triples.size() == spec.train.holdouts);
  CHECK(split.test_triples.size() == spec.test.holdouts);
  CHECK(split.has_test);

  // Same seed regenerates byte-identical files.
  testutil::TempDir dir2;
  generate_synthetic_dataset(dir2.path().string(), spec);
  for (const char* name : {"train.txt", "valid.txt", "test_graph.txt", "test.txt"})
    CHECK(testutil::slurp(dir.path() / name) == testutil::slurp(dir2.path() / name));
}
