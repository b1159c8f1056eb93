#include "glar/kg_store.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

namespace glar {

uint32_t KnowledgeGraph::degree(EntityId n) const {
  if (n >= entity_count()) throw IndexError("entity id out of range in degree()");
  return static_cast<uint32_t>(out_edges[n].size() + in_edges[n].size());
}

void KnowledgeGraph::ensure_entity_rows() {
  out_edges.resize(entity_count());
  in_edges.resize(entity_count());
}

void KnowledgeGraph::add_triple(const Triple& t) {
  if (!seen_.emplace(t, 0).second) {
    ++duplicates_removed;
    return;
  }
  triples.push_back(t);
  ensure_entity_rows();
  out_edges[t.head].emplace_back(t.rel, t.tail);
  in_edges[t.tail].emplace_back(t.rel, t.head);
}

namespace {

// Splits one TSV line into exactly three fields. Tolerates a trailing '\r'
// (CRLF files) and skips lines that are entirely empty.
bool split_triple_line(std::string line, std::string out[3],
                       const std::string& source, uint64_t lineno) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.empty()) return false;
  size_t a = line.find('\t');
  size_t b = (a == std::string::npos) ? std::string::npos : line.find('\t', a + 1);
  if (a == std::string::npos || b == std::string::npos || line.find('\t', b + 1) != std::string::npos) {
    std::ostringstream msg;
    msg << source << ":" << lineno << ": expected 3 tab-separated fields";
    throw ParseError(msg.str());
  }
  out[0] = line.substr(0, a);
  out[1] = line.substr(a + 1, b - a - 1);
  out[2] = line.substr(b + 1);
  for (int i = 0; i < 3; ++i) {
    if (out[i].empty()) {
      std::ostringstream msg;
      msg << source << ":" << lineno << ": empty field " << (i + 1);
      throw ParseError(msg.str());
    }
  }
  return true;
}

}  // namespace

void load_triples(std::istream& in, const std::string& source_name, KnowledgeGraph& graph) {
  std::string line, f[3];
  uint64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!split_triple_line(std::move(line), f, source_name, lineno)) continue;
    Triple t;
    t.head = graph.entities.intern(f[0]);
    t.rel = graph.relations.intern(f[1]);
    t.tail = graph.entities.intern(f[2]);
    graph.add_triple(t);
  }
  graph.ensure_entity_rows();
}

void load_graph_file(const std::filesystem::path& path, KnowledgeGraph& graph) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  load_triples(in, path.filename().string(), graph);
}

namespace {

// Loads an eval-triple file. Entities are interned into the target graph's
// vocabulary (novel ones become isolated nodes); relations must already
// exist in `relation_vocab_owner` (the graph whose label space is canonical).
std::vector<Triple> load_eval_triples(const std::filesystem::path& path,
                                      KnowledgeGraph& graph,
                                      uint64_t& novel_entities,
                                      uint64_t& duplicates) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string source = path.filename().string();
  std::string line, f[3];
  uint64_t lineno = 0;
  std::vector<Triple> out;
  std::unordered_set<Triple, TripleHash> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (!split_triple_line(std::move(line), f, source, lineno)) continue;
    auto rel = graph.relations.find(f[1]);
    if (!rel) {
      throw DataError(source + ": relation '" + f[1] +
                      "' does not exist in the training relation vocabulary");
    }
    Triple t;
    uint32_t before = graph.entities.size();
    t.head = graph.entities.intern(f[0]);
    if (graph.entities.size() > before) ++novel_entities;
    before = graph.entities.size();
    t.tail = graph.entities.intern(f[2]);
    if (graph.entities.size() > before) ++novel_entities;
    t.rel = *rel;
    if (seen.insert(t).second)
      out.push_back(t);
    else
      ++duplicates;
  }
  graph.ensure_entity_rows();
  return out;
}

}  // namespace

DatasetSplit load_split(const std::filesystem::path& dataset_dir) {
  namespace fs = std::filesystem;
  DatasetSplit split;
  fs::path train_path = dataset_dir / "train.txt";
  if (!fs::exists(train_path)) throw IoError("missing " + train_path.string());
  load_graph_file(train_path, split.train_graph);
  if (split.train_graph.triple_count() == 0)
    throw DataError(train_path.string() + ": training graph has zero triples");

  fs::path valid_path = dataset_dir / "valid.txt";
  if (fs::exists(valid_path)) {
    split.valid_triples = load_eval_triples(valid_path, split.train_graph,
                                            split.novel_valid_entities,
                                            split.eval_duplicates_removed);
  }

  fs::path tg_path = dataset_dir / "test_graph.txt";
  fs::path tt_path = dataset_dir / "test.txt";
  bool have_tg = fs::exists(tg_path), have_tt = fs::exists(tt_path);
  if (have_tg != have_tt)
    throw IoError("test_graph.txt and test.txt must be present together in " +
                  dataset_dir.string());
  if (!have_tg) return split;

  split.has_test = true;
  // The test graph shares the relation vocabulary by label: seed it with the
  // training labels so ids coincide, then refuse any relation that only
  // appears on the test side.
  for (const auto& label : split.train_graph.relations.labels)
    split.test_graph.relations.intern(label);
  uint32_t train_rel_count = split.train_graph.relation_count();
  load_graph_file(tg_path, split.test_graph);
  if (split.test_graph.triple_count() == 0)
    throw DataError(tg_path.string() + ": test graph has zero triples");
  if (split.test_graph.relation_count() > train_rel_count) {
    throw DataError(tg_path.string() + ": relation '" +
                    split.test_graph.relations.labels[train_rel_count] +
                    "' does not exist in the training relation vocabulary");
  }
  split.test_triples = load_eval_triples(tt_path, split.test_graph,
                                         split.novel_test_entities,
                                         split.eval_duplicates_removed);

  // Inductive contract: entity label spaces of train and test are disjoint.
  std::vector<std::string> overlap;
  for (const auto& label : split.test_graph.entities.labels) {
    if (split.train_graph.entities.find(label)) {
      overlap.push_back(label);
      if (overlap.size() >= 3) break;
    }
  }
  if (!overlap.empty()) {
    std::string msg = "inductive disjointness violated; shared entity labels:";
    for (const auto& l : overlap) msg += " '" + l + "'";
    throw DataError(msg);
  }
  return split;
}

AugmentedGraph augment(const KnowledgeGraph& g) {
  AugmentedGraph a;
  a.entity_count = g.entity_count();
  a.base_relation_count = g.relation_count();
  a.relation_count = 2 * a.base_relation_count;
  a.offsets.assign(a.entity_count + 1, 0);
  for (EntityId n = 0; n < a.entity_count; ++n)
    a.offsets[n + 1] = a.offsets[n] +
                       static_cast<uint32_t>(g.out_edges[n].size() + g.in_edges[n].size());
  a.edges.resize(a.offsets.back());
  std::vector<uint32_t> cursor(a.offsets.begin(), a.offsets.end() - 1);
  for (EntityId n = 0; n < a.entity_count; ++n) {
    for (const auto& [r, t] : g.out_edges[n]) a.edges[cursor[n]++] = {r, t};
    for (const auto& [r, h] : g.in_edges[n])
      a.edges[cursor[n]++] = {r + a.base_relation_count, h};
  }
  return a;
}

void serialize_triples(const KnowledgeGraph& g, std::ostream& out) {
  for (const Triple& t : g.triples) {
    out << g.entities.labels[t.head] << '\t' << g.relations.labels[t.rel] << '\t'
        << g.entities.labels[t.tail] << '\n';
  }
}

nlohmann::json dump_id_maps(const KnowledgeGraph& g) {
  nlohmann::json entities = nlohmann::json::object();
  for (uint32_t i = 0; i < g.entities.size(); ++i) entities[g.entities.labels[i]] = i;
  nlohmann::json relations = nlohmann::json::object();
  for (uint32_t i = 0; i < g.relations.size(); ++i) relations[g.relations.labels[i]] = i;
  return nlohmann::json{{"entities", std::move(entities)}, {"relations", std::move(relations)}};
}

}  // namespace glar
