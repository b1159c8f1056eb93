#include "glar/config.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace glar {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
    uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected unsigned integer, got '" + value + "'");
  }
}

uint32_t parse_u32(const std::string& key, const std::string& value) {
  uint64_t v = parse_u64(key, value);
  if (v > 0xffffffffULL) throw ConfigError("config key '" + key + "': value too large");
  return static_cast<uint32_t>(v);
}

double parse_f64(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config key '" + key + "': expected boolean, got '" + value + "'");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  RunConfig cfg;
  std::string line;
  uint64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos) {
      std::ostringstream msg;
      msg << path.string() << ":" << lineno << ": expected key = value";
      throw ConfigError(msg.str());
    }
    cfg.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "dataset_dir") dataset_dir = value;
  else if (key == "output_dir") output_dir = value;
  else if (key == "run_id") run_id = value;
  else if (key == "dataset_name") dataset_name = value;
  else if (key == "dataset_version") dataset_version = value;
  else if (key == "checkpoint") checkpoint = value;
  else if (key == "seed") seed = parse_u64(key, value);
  else if (key == "dim") dim = parse_u32(key, value);
  else if (key == "layers") layers = parse_u32(key, value);
  else if (key == "hops") hops = parse_u32(key, value);
  else if (key == "k") k = parse_u32(key, value);
  else if (key == "clusters") clusters = parse_u32(key, value);
  else if (key == "batch_size") batch_size = parse_u32(key, value);
  else if (key == "lr") lr = parse_f64(key, value);
  else if (key == "epochs") epochs = parse_u32(key, value);
  else if (key == "patience") patience = parse_u32(key, value);
  else if (key == "valid_every") valid_every = parse_u32(key, value);
  else if (key == "negatives_eval") negatives_eval = parse_u32(key, value);
  else if (key == "hits_k") hits_k = parse_u32(key, value);
  else if (key == "auc_seeds") auc_seeds = parse_u32(key, value);
  else if (key == "bench_negatives") bench_negatives = value;
  else if (key == "group_by_degree") group_by_degree = parse_bool(key, value);
  else if (key == "relational_multiplicity") relational_multiplicity = parse_bool(key, value);
  else if (key == "threads") threads = parse_u32(key, value);
  else if (key == "cache_mb") cache_mb = parse_u64(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  if (dim == 0) throw ConfigError("dim must be positive");
  if (layers == 0) throw ConfigError("layers must be positive");
  if (k == 0) throw ConfigError("k must be positive");
  if (clusters == 0) throw ConfigError("clusters must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(lr > 0)) throw ConfigError("lr must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (valid_every == 0) throw ConfigError("valid_every must be positive");
  if (negatives_eval == 0) throw ConfigError("negatives_eval must be positive");
  if (hits_k == 0) throw ConfigError("hits_k must be positive");
  if (auc_seeds == 0) throw ConfigError("auc_seeds must be positive");
  bench_negative_counts();  // throws on malformed list
}

std::string RunConfig::canonical() const {
  std::map<std::string, std::string> kv;
  kv["dataset_dir"] = dataset_dir;
  kv["output_dir"] = output_dir;
  kv["dataset_name"] = dataset_name;
  kv["dataset_version"] = dataset_version;
  kv["checkpoint"] = checkpoint;
  kv["seed"] = std::to_string(seed);
  kv["dim"] = std::to_string(dim);
  kv["layers"] = std::to_string(layers);
  kv["hops"] = std::to_string(hops);
  kv["k"] = std::to_string(k);
  kv["clusters"] = std::to_string(clusters);
  kv["batch_size"] = std::to_string(batch_size);
  kv["lr"] = fmt_double(lr);
  kv["epochs"] = std::to_string(epochs);
  kv["patience"] = std::to_string(patience);
  kv["valid_every"] = std::to_string(valid_every);
  kv["negatives_eval"] = std::to_string(negatives_eval);
  kv["hits_k"] = std::to_string(hits_k);
  kv["auc_seeds"] = std::to_string(auc_seeds);
  kv["bench_negatives"] = bench_negatives;
  kv["group_by_degree"] = group_by_degree ? "true" : "false";
  kv["relational_multiplicity"] = relational_multiplicity ? "true" : "false";
  kv["threads"] = std::to_string(threads);
  kv["cache_mb"] = std::to_string(cache_mb);
  std::string out;
  for (const auto& [key, value] : kv) out += key + " = " + value + "\n";
  return out;
}

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string RunConfig::derived_run_id() const {
  if (!run_id.empty()) return run_id;
  char buf[24];
  std::snprintf(buf, sizeof buf, "run-%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical())));
  return buf;
}

std::string RunConfig::effective_dataset_name() const {
  if (!dataset_name.empty()) return dataset_name;
  std::filesystem::path p(dataset_dir);
  std::string base = p.filename().string();
  if (base.empty()) base = p.parent_path().filename().string();
  return base.empty() ? "dataset" : base;
}

uint32_t RunConfig::effective_threads() const {
  if (threads > 0) return threads;
  if (const char* env = std::getenv("GLAR_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v > 0) return static_cast<uint32_t>(v);
  }
  return 1;
}

std::vector<uint32_t> RunConfig::bench_negative_counts() const {
  std::vector<uint32_t> out;
  std::string cur;
  std::istringstream in(bench_negatives);
  while (std::getline(in, cur, ',')) {
    cur = trim(cur);
    if (cur.empty()) continue;
    uint32_t v = parse_u32("bench_negatives", cur);
    if (v == 0) throw ConfigError("bench_negatives entries must be positive");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("bench_negatives must list at least one count");
  return out;
}

ModelHyper RunConfig::hyper(uint32_t augmented_relations) const {
  ModelHyper h;
  h.dim = dim;
  h.layers = layers;
  h.hops = hops;
  h.k = k;
  h.clusters = clusters;
  h.augmented_relations = augmented_relations;
  return h;
}

}  // namespace glar
