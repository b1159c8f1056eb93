#include "glar/synth.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>
#include <vector>

#include "glar/errors.hpp"
#include "glar/rng.hpp"

namespace glar {

SynthSpec SynthSpec::preset(const std::string& name) {
  SynthSpec s;
  if (name == "wn1") return s;
  if (name == "tiny") {
    s.community = 40;
    s.train = {"tr", 140, 360, 48};
    s.test = {"te", 90, 220, 40};
    return s;
  }
  throw ConfigError("unknown synthetic preset '" + name + "' (expected wn1 or tiny)");
}

namespace {

// Base relation i connects type i to type i + 1; composed relation 6 + j is
// rel_{2j} followed by rel_{2j+1}, i.e. type 2j to type 2j + 2.
constexpr uint32_t kBaseRelations = 6;
constexpr uint32_t kRules = 3;

struct SideData {
  std::vector<Triple> graph;  // shuffled, exactly spec.triples
  std::vector<Triple> eval;   // shuffled holdouts
};

struct Buckets {
  uint32_t communities = 0;
  // by_ct[c * types + t] and by_t[t] list entity ids of type t.
  std::vector<std::vector<uint32_t>> by_ct;
  std::vector<std::vector<uint32_t>> by_t;
};

uint32_t pick_entity(const Buckets& b, uint32_t type, uint32_t community, double bridge,
                     RngStream& rng) {
  const std::vector<uint32_t>* pool = &b.by_ct[community * b.by_t.size() + type];
  if (pool->empty() || rng.next_unit() < bridge) pool = &b.by_t[type];
  return (*pool)[rng.below(pool->size())];
}

SideData generate_side(const SynthSideSpec& side, const SynthSpec& spec, RngStream rng) {
  if (spec.types < kBaseRelations + 1)
    throw ConfigError("synthetic generator needs at least 7 types");
  if (side.entities < spec.types * 2)
    throw ConfigError("synthetic side too small for its type vocabulary");

  RngStream type_rng = rng.fork(0x74797065);
  RngStream chain_rng = rng.fork(0x636861696e);
  RngStream fill_rng = rng.fork(0x66696c6c);
  RngStream hold_rng = rng.fork(0x686f6c64);
  RngStream shuffle_rng = rng.fork(0x73687566);

  std::vector<uint32_t> type_of(side.entities);
  Buckets b;
  b.communities = (side.entities + spec.community - 1) / spec.community;
  b.by_ct.resize(static_cast<size_t>(b.communities) * spec.types);
  b.by_t.resize(spec.types);
  for (uint32_t e = 0; e < side.entities; ++e) {
    uint32_t t = static_cast<uint32_t>(type_rng.below(spec.types));
    type_of[e] = t;
    uint32_t c = e / spec.community;
    b.by_ct[c * spec.types + t].push_back(e);
    b.by_t[t].push_back(e);
  }

  std::unordered_set<Triple, TripleHash> base_seen, composed_seen;
  std::vector<Triple> base_edges;          // goes into the graph, in full
  std::vector<Triple> composed_edges;      // graph prefix + holdout suffix
  std::vector<char> entity_used(side.entities, 0);
  auto add_base = [&](const Triple& t) {
    if (!base_seen.insert(t).second) return false;
    base_edges.push_back(t);
    entity_used[t.head] = entity_used[t.tail] = 1;
    return true;
  };

  uint32_t base_holdout = static_cast<uint32_t>(
      std::min<double>(side.holdouts, std::llround(side.holdouts * spec.base_holdout_share)));
  uint32_t composed_holdout = side.holdouts - base_holdout;
  uint32_t composed_in_graph =
      static_cast<uint32_t>(std::llround(side.triples * spec.composed_graph_share));
  uint64_t composed_needed = static_cast<uint64_t>(composed_in_graph) + composed_holdout;

  // Phase 1: type-consistent chains h -> m -> t. Witness edges always enter
  // the graph; the composed edge joins a pool split later into graph edges
  // and holdouts (every holdout therefore has both witnesses in the graph).
  uint64_t attempts = 0, max_attempts = 400 * std::max<uint64_t>(composed_needed, 1);
  while (composed_edges.size() < composed_needed) {
    if (++attempts > max_attempts)
      throw DataError("synthetic generation stalled sampling composed chains");
    uint32_t rule = static_cast<uint32_t>(chain_rng.below(kRules));
    uint32_t c = static_cast<uint32_t>(chain_rng.below(b.communities));
    uint32_t h = pick_entity(b, 2 * rule, c, spec.bridge_fraction, chain_rng);
    uint32_t m = pick_entity(b, 2 * rule + 1, c, spec.bridge_fraction, chain_rng);
    uint32_t t = pick_entity(b, 2 * rule + 2, c, spec.bridge_fraction, chain_rng);
    Triple composed{h, kBaseRelations + rule, t};
    if (!composed_seen.insert(composed).second) continue;
    add_base({h, 2 * rule, m});
    add_base({m, 2 * rule + 1, t});
    composed_edges.push_back(composed);
  }

  // Phase 2: every entity must appear in the graph, or the side's entity
  // count would drift below spec. Unused entities get one type-admissible
  // edge each.
  for (uint32_t e = 0; e < side.entities; ++e) {
    if (entity_used[e]) continue;
    uint32_t tau = type_of[e];
    for (uint32_t attempt = 0; attempt < 200; ++attempt) {
      bool as_head = tau < kBaseRelations;
      uint32_t c = e / spec.community;
      if (as_head) {
        uint32_t partner = pick_entity(b, tau + 1, c, spec.bridge_fraction, fill_rng);
        if (partner != e && add_base({e, tau, partner})) break;
      } else {
        uint32_t partner = pick_entity(b, tau - 1, c, spec.bridge_fraction, fill_rng);
        if (partner != e && add_base({partner, tau - 1, e})) break;
      }
    }
  }

  // Phase 3: standalone base edges up to the graph's base-edge budget.
  uint64_t base_needed = side.triples > composed_in_graph
                             ? side.triples - composed_in_graph
                             : 0;
  attempts = 0;
  max_attempts = 400 * std::max<uint64_t>(base_needed, 1);
  while (base_edges.size() < base_needed) {
    if (++attempts > max_attempts)
      throw DataError("synthetic generation stalled sampling base edges");
    uint32_t r = static_cast<uint32_t>(fill_rng.below(kBaseRelations));
    uint32_t c = static_cast<uint32_t>(fill_rng.below(b.communities));
    uint32_t h = pick_entity(b, r, c, spec.bridge_fraction, fill_rng);
    uint32_t t = pick_entity(b, r + 1, c, spec.bridge_fraction, fill_rng);
    add_base({h, r, t});
  }
  if (base_edges.size() > side.triples)
    throw DataError("synthetic parameters infeasible: witness edges exceed the triple budget");

  // Assemble the graph: all base edges plus as many pooled composed edges as
  // the budget allows; everything past the graph prefix is holdout material.
  uint64_t kept_composed = side.triples - base_edges.size();
  if (composed_edges.size() < kept_composed + composed_holdout)
    throw DataError("synthetic generation produced too few composed edges");

  SideData out;
  out.graph.assign(base_edges.begin(), base_edges.end());
  out.graph.insert(out.graph.end(), composed_edges.begin(),
                   composed_edges.begin() + static_cast<ptrdiff_t>(kept_composed));
  out.eval.assign(composed_edges.begin() + static_cast<ptrdiff_t>(kept_composed),
                  composed_edges.begin() + static_cast<ptrdiff_t>(kept_composed + composed_holdout));

  // Phase 4: fresh type-admissible base holdouts, absent from the graph.
  attempts = 0;
  max_attempts = 400 * std::max<uint64_t>(base_holdout, 1);
  uint32_t made = 0;
  while (made < base_holdout) {
    if (++attempts > max_attempts)
      throw DataError("synthetic generation stalled sampling holdout edges");
    uint32_t r = static_cast<uint32_t>(hold_rng.below(kBaseRelations));
    uint32_t c = static_cast<uint32_t>(hold_rng.below(b.communities));
    uint32_t h = pick_entity(b, r, c, spec.bridge_fraction, hold_rng);
    uint32_t t = pick_entity(b, r + 1, c, spec.bridge_fraction, hold_rng);
    Triple cand{h, r, t};
    if (!base_seen.insert(cand).second) continue;  // also blocks repeats here
    out.eval.push_back(cand);
    ++made;
  }

  auto shuffle = [&](std::vector<Triple>& v, uint64_t salt) {
    RngStream r = shuffle_rng.fork(salt);
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[r.below(i)]);
  };
  shuffle(out.graph, 1);
  shuffle(out.eval, 2);
  return out;
}

void write_triples(const std::filesystem::path& path, const std::vector<Triple>& triples,
                   const std::string& prefix) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const Triple& t : triples) {
    out << prefix << "_e" << t.head << '\t' << "rel_" << t.rel << '\t' << prefix << "_e"
        << t.tail << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

void generate_synthetic_dataset(const std::filesystem::path& dir, const SynthSpec& spec) {
  if (spec.train.prefix == spec.test.prefix)
    throw ConfigError("synthetic sides must use distinct entity prefixes");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  RngStream world(spec.seed);
  SideData train = generate_side(spec.train, spec, world.fork(0x747261696e));
  SideData test = generate_side(spec.test, spec, world.fork(0x74657374));

  write_triples(dir / "train.txt", train.graph, spec.train.prefix);
  write_triples(dir / "valid.txt", train.eval, spec.train.prefix);
  write_triples(dir / "test_graph.txt", test.graph, spec.test.prefix);
  write_triples(dir / "test.txt", test.eval, spec.test.prefix);
}

}  // namespace glar
