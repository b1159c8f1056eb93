#include "glar/cli_commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "glar/checkpoint.hpp"
#include "glar/config.hpp"
#include "glar/errors.hpp"
#include "glar/kg_store.hpp"
#include "glar/subgraph_extract.hpp"
#include "glar/synth.hpp"
#include "glar/train_eval.hpp"

namespace glar {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

// Options shared by every subcommand; flags win over --set, --set wins over
// the config file.
struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::string data, out, run_id, checkpoint;
  int64_t seed = -1;
  int64_t threads = -1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_file, "key = value config file");
  cmd->add_option("--set", c.sets, "config override, key=value (repeatable)");
  cmd->add_option("--data", c.data, "dataset directory");
  cmd->add_option("--out", c.out, "output root (default: runs)");
  cmd->add_option("--run-id", c.run_id, "run directory name (default: config hash)");
  cmd->add_option("--checkpoint", c.checkpoint, "checkpoint path (eval/bench)");
  cmd->add_option("--seed", c.seed, "base random seed")->check(CLI::NonNegativeNumber);
  cmd->add_option("--threads", c.threads, "worker threads (0: use $GLAR_THREADS, else 1)")
      ->check(CLI::NonNegativeNumber);
}

RunConfig make_config(const Common& c) {
  RunConfig cfg;
  if (!c.config_file.empty()) cfg = RunConfig::from_file(c.config_file);
  for (const std::string& kv : c.sets) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw UsageError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!c.data.empty()) cfg.dataset_dir = c.data;
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (!c.run_id.empty()) cfg.run_id = c.run_id;
  if (!c.checkpoint.empty()) cfg.checkpoint = c.checkpoint;
  if (c.seed >= 0) cfg.seed = static_cast<uint64_t>(c.seed);
  if (c.threads >= 0) cfg.threads = static_cast<uint32_t>(c.threads);
  cfg.validate();
  return cfg;
}

fs::path make_run_dir(const RunConfig& cfg) {
  fs::path dir = fs::path(cfg.output_dir) / cfg.derived_run_id();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "config.txt", cfg.canonical());
  return dir;
}

fs::path checkpoint_path(const RunConfig& cfg, const fs::path& run_dir) {
  if (!cfg.checkpoint.empty()) return cfg.checkpoint;
  return run_dir / "checkpoint.json";
}

// Evaluation targets the test side when the dataset has one, otherwise the
// validation triples against the training graph.
struct EvalTarget {
  const KnowledgeGraph* graph;
  const std::vector<Triple>* triples;
  const char* side;
};

EvalTarget eval_target(const DatasetSplit& split) {
  if (split.has_test) return {&split.test_graph, &split.test_triples, "test"};
  if (!split.valid_triples.empty()) return {&split.train_graph, &split.valid_triples, "valid"};
  throw DataError("dataset has neither test triples nor validation triples to evaluate");
}

json instrumentation_json(const Instrumentation& instr, double wall_seconds) {
  return json{{"extractions", instr.extractions},
              {"cache_hits", instr.cache_hits},
              {"forward_passes", instr.forward_passes},
              {"extraction_seconds", instr.extraction_seconds},
              {"labeling_seconds", instr.labeling_seconds},
              {"forward_seconds", instr.forward_seconds},
              {"wall_seconds", wall_seconds}};
}

// ----- subcommands -----

struct PrepareFlags {
  bool dump_ids = false;
  std::string subgraph_label;
  std::string subgraph_graph = "train";
  std::string subgraph_out;
};

int cmd_prepare(const Common& c, const PrepareFlags& f) {
  RunConfig cfg = make_config(c);
  if (cfg.dataset_dir.empty()) throw UsageError("prepare needs --data (or dataset_dir)");
  DatasetSplit split = load_split(cfg.dataset_dir);

  std::cout << "train: entities=" << split.train_graph.entity_count()
            << " relations=" << split.train_graph.relation_count()
            << " triples=" << split.train_graph.triple_count()
            << " duplicates_removed=" << split.train_graph.duplicates_removed << "\n";
  std::cout << "valid: triples=" << split.valid_triples.size()
            << " novel_entities=" << split.novel_valid_entities << "\n";
  if (split.has_test) {
    std::cout << "test_graph: entities=" << split.test_graph.entity_count()
              << " relations=" << split.test_graph.relation_count()
              << " triples=" << split.test_graph.triple_count()
              << " duplicates_removed=" << split.test_graph.duplicates_removed << "\n";
    std::cout << "test: triples=" << split.test_triples.size()
              << " novel_entities=" << split.novel_test_entities << "\n";
  }
  if (split.eval_duplicates_removed)
    std::cout << "eval duplicates removed: " << split.eval_duplicates_removed << "\n";

  if (f.dump_ids) {
    json ids{{"train", dump_id_maps(split.train_graph)}};
    if (split.has_test) ids["test"] = dump_id_maps(split.test_graph);
    std::cout << ids.dump(1) << "\n";
  }
  if (!f.subgraph_label.empty()) {
    const KnowledgeGraph* g = nullptr;
    if (f.subgraph_graph == "train") g = &split.train_graph;
    else if (f.subgraph_graph == "test") g = split.has_test ? &split.test_graph : nullptr;
    else throw UsageError("--subgraph-graph must be train or test");
    if (!g) throw DataError("dataset has no test graph");
    std::optional<uint32_t> id = g->entities.find(f.subgraph_label);
    if (!id) throw DataError("entity '" + f.subgraph_label + "' not in " + f.subgraph_graph);
    OpeningSubgraph sub = extract_opening_subgraph(augment(*g), *id, cfg.k);
    json dump = dump_subgraph(sub, g);
    if (f.subgraph_out.empty()) std::cout << dump.dump(1) << "\n";
    else write_json(f.subgraph_out, dump);
  }
  return 0;
}

int cmd_cluster(const Common& c) {
  RunConfig cfg = make_config(c);
  if (cfg.dataset_dir.empty()) throw UsageError("cluster needs --data (or dataset_dir)");
  fs::path run_dir = make_run_dir(cfg);
  DatasetSplit split = load_split(cfg.dataset_dir);
  AugmentedGraph aug = augment(split.train_graph);
  RelationalFeatures features = relational_features(aug, cfg.relational_multiplicity);
  ClusteringModel model = fit_clusters(features, cfg.clusters, cfg.seed);
  GlobalAnchorSet anchors = select_global_anchors(model, features, split.train_graph);

  uint32_t nonempty = 0, min_size = UINT32_MAX, max_size = 0;
  for (uint32_t s : anchors.cluster_sizes) {
    if (s > 0) ++nonempty;
    min_size = std::min(min_size, s);
    max_size = std::max(max_size, s);
  }
  json summary{{"m", model.m},
               {"objective", model.objective},
               {"iterations", model.iterations},
               {"clusters_nonempty", nonempty},
               {"cluster_size_min", min_size},
               {"cluster_size_max", max_size},
               {"entities", features.entity_count()}};
  write_json(run_dir / "cluster_summary.json", summary);
  std::cout << "clusters: m=" << model.m << " objective=" << g17(model.objective)
            << " iterations=" << model.iterations << " nonempty=" << nonempty << "\n";
  std::cout << "wrote " << (run_dir / "cluster_summary.json").string() << "\n";
  return 0;
}

int cmd_train(const Common& c) {
  RunConfig cfg = make_config(c);
  if (cfg.dataset_dir.empty()) throw UsageError("train needs --data (or dataset_dir)");
  fs::path run_dir = make_run_dir(cfg);
  DatasetSplit split = load_split(cfg.dataset_dir);

  TrainResult tr = train_model(split, cfg);

  Checkpoint ck;
  ck.params = std::move(tr.params);
  ck.clusters = std::move(tr.clusters);
  ck.relational_multiplicity = cfg.relational_multiplicity;
  ck.dataset_name = cfg.effective_dataset_name();
  ck.seed = cfg.seed;
  save_checkpoint(ck, run_dir / "checkpoint.json");

  std::string log = "epoch,loss,valid_hits\n";
  for (size_t i = 0; i < tr.epoch_losses.size(); ++i) {
    log += std::to_string(i + 1) + "," + g17(tr.epoch_losses[i]) + ",";
    if (!std::isnan(tr.valid_hits[i])) log += g17(tr.valid_hits[i]);
    log += "\n";
  }
  write_text(run_dir / "loss_log.csv", log);
  write_json(run_dir / "timings.json", json{{"train_seconds", tr.train_seconds},
                                            {"epochs_run", tr.epochs_run},
                                            {"best_epoch", tr.best_epoch}});

  std::cout << "trained " << tr.epochs_run << " epochs; final loss "
            << g17(tr.epoch_losses.back());
  if (tr.best_epoch) std::cout << "; best validation epoch " << tr.best_epoch;
  std::cout << "\nwrote " << (run_dir / "checkpoint.json").string() << "\n";
  return 0;
}

int cmd_eval(const Common& c, bool group_by_degree_flag) {
  RunConfig cfg = make_config(c);
  if (group_by_degree_flag) cfg.group_by_degree = true;
  if (cfg.dataset_dir.empty()) throw UsageError("eval needs --data (or dataset_dir)");
  fs::path run_dir = make_run_dir(cfg);
  Checkpoint ck = load_checkpoint(checkpoint_path(cfg, run_dir));
  require_structural_match(ck, cfg);

  DatasetSplit split = load_split(cfg.dataset_dir);
  EvalTarget target = eval_target(split);

  StopWatch wall;
  Instrumentation instr;
  ScoringSetup setup = make_scoring_setup(*target.graph, *target.triples, ck.params,
                                          ck.clusters, ck.relational_multiplicity);

  RankingOptions ropts;
  ropts.negatives = cfg.negatives_eval;
  ropts.hits_k = cfg.hits_k;
  ropts.seed = cfg.seed;
  ropts.use_cache = true;
  ropts.cache_bytes = cfg.cache_mb << 20;
  ropts.threads = cfg.effective_threads();
  ropts.group_by_degree = cfg.group_by_degree;
  HitsResult hits = hits_at_k(ck.params, setup, *target.triples, ropts, &instr);

  AucOptions aopts;
  aopts.base_seed = cfg.seed;
  aopts.seeds = cfg.auc_seeds;
  aopts.cache_bytes = cfg.cache_mb << 20;
  aopts.threads = cfg.effective_threads();
  AucResult auc = auc_pr_eval(ck.params, setup, *target.triples, aopts, &instr);

  std::string hits_name = "hits@" + std::to_string(cfg.hits_k);
  json metrics{{"dataset", cfg.effective_dataset_name()},
               {"version", cfg.dataset_version},
               {"seed", cfg.seed},
               {"side", target.side},
               {"negatives", cfg.negatives_eval},
               {"queries", hits.queries},
               {"hits", hits.hits},
               {hits_name, hits.hits_fraction},
               {"auc_pr_mean", auc.mean},
               {"auc_pr_per_seed", auc.per_seed}};
  if (!hits.bucket_names.empty()) {
    json buckets = json::object();
    for (size_t b = 0; b < hits.bucket_names.size(); ++b)
      buckets[hits.bucket_names[b]] =
          json{{"queries", hits.bucket_queries[b]},
               {"hits", hits.bucket_hits[b]},
               {hits_name, hits.bucket_queries[b]
                               ? static_cast<double>(hits.bucket_hits[b]) /
                                     static_cast<double>(hits.bucket_queries[b])
                               : 0.0}};
    metrics["by_degree"] = buckets;
  }
  write_json(run_dir / "metrics.json", metrics);

  std::string prefix = cfg.effective_dataset_name() + "," + cfg.dataset_version + "," +
                       std::to_string(cfg.seed) + ",";
  std::string csv = "dataset,version,seed,metric,value\n";
  csv += prefix + hits_name + "," + g17(hits.hits_fraction) + "\n";
  for (size_t b = 0; b < hits.bucket_names.size(); ++b) {
    double frac = hits.bucket_queries[b] ? static_cast<double>(hits.bucket_hits[b]) /
                                               static_cast<double>(hits.bucket_queries[b])
                                         : 0.0;
    csv += prefix + hits_name + "_" + hits.bucket_names[b] + "," + g17(frac) + "\n";
  }
  for (size_t s = 0; s < auc.per_seed.size(); ++s)
    csv += prefix + "auc_pr_seed" + std::to_string(s) + "," + g17(auc.per_seed[s]) + "\n";
  csv += prefix + "auc_pr_mean," + g17(auc.mean) + "\n";
  write_text(run_dir / "metrics.csv", csv);
  write_json(run_dir / "timings.json", instrumentation_json(instr, wall.seconds()));

  std::cout << target.side << " " << hits_name << " " << g17(hits.hits_fraction) << " ("
            << hits.hits << "/" << hits.queries << " directed queries)\n";
  std::cout << "auc_pr mean " << g17(auc.mean) << " over " << auc.per_seed.size()
            << " seeds\n";
  std::cout << "wrote " << (run_dir / "metrics.json").string() << "\n";
  return 0;
}

int cmd_bench(const Common& c) {
  RunConfig cfg = make_config(c);
  if (cfg.dataset_dir.empty()) throw UsageError("bench needs --data (or dataset_dir)");
  fs::path run_dir = make_run_dir(cfg);
  Checkpoint ck = load_checkpoint(checkpoint_path(cfg, run_dir));
  require_structural_match(ck, cfg);

  DatasetSplit split = load_split(cfg.dataset_dir);
  EvalTarget target = eval_target(split);
  ScoringSetup setup = make_scoring_setup(*target.graph, *target.triples, ck.params,
                                          ck.clusters, ck.relational_multiplicity);
  std::vector<BenchRow> rows =
      bench_reasoning(ck.params, setup, *target.triples, cfg.bench_negative_counts(),
                      cfg.seed, cfg.hits_k, cfg.dataset_version);

  std::string csv = "version,negatives,seconds,extraction_s,labeling_s,forward_s\n";
  for (const BenchRow& r : rows) {
    csv += r.version + "," + std::to_string(r.negatives) + "," + g17(r.seconds) + "," +
           g17(r.extraction_s) + "," + g17(r.labeling_s) + "," + g17(r.forward_s) + "\n";
    std::cout << "negatives=" << r.negatives << " seconds=" << g17(r.seconds)
              << " extraction_s=" << g17(r.extraction_s) << " labeling_s="
              << g17(r.labeling_s) << " forward_s=" << g17(r.forward_s)
              << " directed_queries=" << r.directed_queries
              << " extractions=" << r.extractions << " " << "hits=" << g17(r.hits_fraction)
              << "\n";
  }
  write_text(run_dir / "bench.csv", csv);
  if (rows.size() >= 2 && rows.front().seconds > 0) {
    const BenchRow& lo = rows.front();
    const BenchRow& hi = rows.back();
    std::cout << "ratio t(" << hi.negatives << ")/t(" << lo.negatives << ") = "
              << g17(hi.seconds / lo.seconds) << "\n";
  }
  std::cout << "wrote " << (run_dir / "bench.csv").string() << "\n";
  return 0;
}

struct SynthFlags {
  std::string preset = "wn1";
  std::string dir;
};

int cmd_synth(const Common& c, const SynthFlags& f) {
  RunConfig cfg = make_config(c);
  std::string dir = f.dir.empty() ? cfg.dataset_dir : f.dir;
  if (dir.empty()) throw UsageError("synth needs --dir (or --data)");
  SynthSpec spec = SynthSpec::preset(f.preset);
  spec.seed = cfg.seed;
  generate_synthetic_dataset(dir, spec);
  std::cout << "wrote synthetic dataset (" << f.preset << ", seed " << cfg.seed << ") to "
            << dir << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  try {
    CLI::App app{"inductive knowledge-graph completion with local/global anchors"};
    app.require_subcommand(1);

    Common c;
    PrepareFlags pf;
    SynthFlags sf;

    CLI::App* prepare = app.add_subcommand("prepare", "load and validate a dataset");
    add_common(prepare, c);
    prepare->add_flag("--dump-ids", pf.dump_ids, "print label -> id maps");
    prepare->add_option("--dump-subgraph", pf.subgraph_label,
                        "print the opening subgraph of this entity");
    prepare->add_option("--subgraph-graph", pf.subgraph_graph, "train or test");
    prepare->add_option("--subgraph-out", pf.subgraph_out, "write the subgraph JSON here");

    CLI::App* cluster = app.add_subcommand("cluster", "fit relational-profile clusters");
    add_common(cluster, c);
    CLI::App* train = app.add_subcommand("train", "train a model, write a checkpoint");
    add_common(train, c);
    CLI::App* eval = app.add_subcommand("eval", "ranking metrics from a checkpoint");
    add_common(eval, c);
    bool group_by_degree_flag = false;
    eval->add_flag("--group-by-degree", group_by_degree_flag,
                   "break hits down by answer degree");
    CLI::App* bench = app.add_subcommand("bench", "reasoning-time benchmark");
    add_common(bench, c);
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(synth, c);
    synth->add_option("--preset", sf.preset, "wn1 or tiny");
    synth->add_option("--dir", sf.dir, "target directory (defaults to --data)");

    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      app.exit(e);
      return 1;
    }

    if (prepare->parsed()) return cmd_prepare(c, pf);
    if (cluster->parsed()) return cmd_cluster(c);
    if (train->parsed()) return cmd_train(c);
    if (eval->parsed()) return cmd_eval(c, group_by_degree_flag);
    if (bench->parsed()) return cmd_bench(c);
    if (synth->parsed()) return cmd_synth(c, sf);
    throw UsageError("no subcommand given");
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {  // parse / data / io / shape / index
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace glar
