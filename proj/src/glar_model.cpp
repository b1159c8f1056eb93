#include "glar/glar_model.hpp"

#include <cmath>

namespace glar {

ModelParams make_params(const ModelHyper& hyper) {
  if (hyper.augmented_relations == 0 || hyper.augmented_relations % 2 != 0)
    throw ConfigError("augmented relation count must be a positive even number");
  if (hyper.dim == 0 || hyper.layers == 0)
    throw ConfigError("dim and layer count must be positive");
  ModelParams p;
  p.hyper = hyper;
  Eigen::Index d = hyper.dim;
  Eigen::Index twoR = hyper.augmented_relations;

  auto addw = [&](const std::string& name, Eigen::Index r, Eigen::Index c) {
    int i = p.store.add(name, r, c);
    p.weight_indices.push_back(i);
    return i;
  };
  auto addb = [&](const std::string& name, Eigen::Index c) {
    return p.store.add(name, 1, c);
  };

  p.rel_emb = addw("rel_emb", twoR, d);
  p.W0 = addw("W0", hyper.local_feature_width(), d);
  p.b0 = addb("b0", d);
  p.Wr = addw("W_r", twoR, d);
  p.Wg = addw("W_g0", hyper.global_feature_width(), d);
  for (uint32_t l = 0; l < hyper.layers; ++l) {
    std::string s = "." + std::to_string(l);
    ModelParams::LayerIdx ly;
    ly.Wg = addw("W_g" + s, 2 * d, d);
    ly.bg = addb("b_g" + s, d);
    ly.W = addw("W" + s, 3 * d, d);
    ly.b = addb("b" + s, d);
    ly.ra = addw("r_a" + s, d, 1);
    ly.Wa = addw("W_a" + s, 4 * d, d);
    ly.ba = addb("b_a" + s, d);
    ly.Wbeta = addw("W_beta" + s, 2 * d, d);
    ly.Wbp = addw("W_betap" + s, 3 * d, d);
    ly.bbp = addb("b_betap" + s, d);
    p.layer.push_back(ly);
  }
  p.Wo = addw("W_o", (hyper.layers + 1) * d, d);
  p.bo = addb("b_o", d);
  p.Wq = addw("W_q", 3 * d, d);
  p.bq = addb("b_q", d);
  return p;
}

ModelParams init_params(const ModelHyper& hyper, uint64_t seed) {
  ModelParams p = make_params(hyper);
  RngStream rng = RngStream(seed).fork(0x696e6974);  // "init"
  for (int i : p.weight_indices) xavier_init(p.store[i], rng);
  return p;
}

// ----- global context -----

GlobalContext build_global_context(const AugmentedGraph& g, const ClusteringModel& clusters,
                                   const RelationalFeatures& features,
                                   const KnowledgeGraph& base, const ModelHyper& hyper) {
  if (g.relation_count != hyper.augmented_relations)
    throw ShapeError("graph relation count does not match model config");
  if (clusters.m != hyper.clusters)
    throw ShapeError("clustering model size does not match model config");
  GlobalContext ctx;
  ctx.entity_count = g.entity_count;
  ctx.anchors = select_global_anchors(clusters, features, base);

  ctx.vr.cols = g.relation_count;
  for (EntityId n = 0; n < g.entity_count; ++n) {
    std::vector<std::pair<uint32_t, double>> row;
    row.reserve(features.rows[n].size());
    for (const auto& [rel, c] : features.rows[n]) row.emplace_back(rel, double(c));
    ctx.vr.append_row(row);
  }

  AnchorCounts vg = label_global_features(g, ctx.anchors, hyper.hops);
  ctx.vg.cols = vg.width();
  for (EntityId n = 0; n < g.entity_count; ++n) {
    std::vector<std::pair<uint32_t, double>> row;
    row.reserve(vg.rows[n].size());
    for (const auto& [col, c] : vg.rows[n]) row.emplace_back(col, double(c));
    ctx.vg.append_row(row);
  }

  // Neighbor-mean and relation-mean operators: one application computes the
  // (1/|N(n)|) * sum over incoming messages of an entire GCN layer.
  ctx.adj_mean.cols = g.entity_count;
  ctx.rel_mean.cols = g.relation_count;
  std::vector<std::pair<uint32_t, double>> nbr_row, rel_row;
  for (EntityId n = 0; n < g.entity_count; ++n) {
    auto span = g.neighbors(n);
    if (span.empty()) {  // zero mean; the layer bias still applies
      ctx.adj_mean.append_row({});
      ctx.rel_mean.append_row({});
      continue;
    }
    double inv = 1.0 / static_cast<double>(span.size());
    nbr_row.clear();
    rel_row.clear();
    for (const auto& [rel, nbr] : span) {
      nbr_row.emplace_back(nbr, inv);
      rel_row.emplace_back(rel, inv);
    }
    auto merge = [](std::vector<std::pair<uint32_t, double>>& v) {
      std::sort(v.begin(), v.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      size_t w = 0;
      for (size_t i = 0; i < v.size();) {
        size_t j = i;
        double sum = 0;
        while (j < v.size() && v[j].first == v[i].first) sum += v[j++].second;
        v[w++] = {v[i].first, sum};
        i = j;
      }
      v.resize(w);
    };
    merge(nbr_row);
    merge(rel_row);
    ctx.adj_mean.append_row(nbr_row);
    ctx.rel_mean.append_row(rel_row);
  }
  return ctx;
}

std::vector<Tensor> run_global_pass(Tape& tape, const ParamBinding& pb,
                                    const ModelParams& p, const GlobalContext& ctx) {
  Eigen::Index d = p.hyper.dim;
  std::vector<Tensor> layers;
  layers.push_back(tape.add(tape.sparse_matmul(&ctx.vr, pb.leaves[p.Wr]),
                            tape.sparse_matmul(&ctx.vg, pb.leaves[p.Wg])));
  for (uint32_t l = 0; l < p.hyper.layers; ++l) {
    const auto& ly = p.layer[l];
    Tensor nm = tape.sparse_matmul(&ctx.adj_mean, layers.back());
    Tensor rm = tape.sparse_matmul(&ctx.rel_mean, pb.leaves[p.rel_emb]);
    Tensor top = tape.matmul(nm, tape.row_slice(pb.leaves[ly.Wg], 0, d));
    Tensor bot = tape.matmul(rm, tape.row_slice(pb.leaves[ly.Wg], d, d));
    layers.push_back(tape.add_row_vector(tape.add(top, bot), pb.leaves[ly.bg]));
  }
  return layers;
}

std::vector<Eigen::MatrixXd> global_embeddings(const ModelParams& p, const GlobalContext& ctx) {
  Tape tape;
  ParamBinding pb = bind_params(tape, p.store);
  std::vector<Tensor> layers = run_global_pass(tape, pb, p, ctx);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(layers.size());
  for (Tensor t : layers) out.push_back(tape.value(t));
  return out;
}

// ----- query context -----

QueryContext build_query_context(const AugmentedGraph& g, EntityId center,
                                 const ModelHyper& hyper, std::optional<Triple> masked,
                                 Instrumentation* instr) {
  if (g.relation_count != hyper.augmented_relations)
    throw ShapeError("graph relation count does not match model config");
  QueryContext q;
  {
    StopWatch w;
    q.sub = extract_opening_subgraph(g, center, hyper.k, masked);
    if (instr) {
      ++instr->extractions;
      instr->extraction_seconds += w.seconds();
    }
  }
  StopWatch label_watch;

  LocalAnchorSet anchors = select_local_anchors(q.sub, g.relation_count);
  AnchorCounts sc = label_structure_features(q.sub, anchors, hyper.hops);
  std::vector<uint32_t> dist = label_distance_features(q.sub);

  q.feats.cols = hyper.local_feature_width();
  uint32_t dist_offset = (hyper.hops + 1) * hyper.anchor_vocab();
  std::vector<std::pair<uint32_t, double>> row;
  for (uint32_t n = 0; n < q.sub.node_count(); ++n) {
    row.clear();
    for (const auto& [col, c] : sc.rows[n]) row.emplace_back(col, double(c));
    row.emplace_back(dist_offset + dist[n], 1.0);
    q.feats.append_row(row);
  }

  q.edge_src.reserve(q.sub.edges.size());
  q.edge_dst.reserve(q.sub.edges.size());
  q.edge_rel.reserve(q.sub.edges.size());
  for (const auto& e : q.sub.edges) {
    q.edge_src.push_back(e.src);
    q.edge_dst.push_back(e.dst);
    q.edge_rel.push_back(e.rel);
  }
  q.node_global = q.sub.node_ids;
  if (instr) instr->labeling_seconds += label_watch.seconds();
  return q;
}

uint64_t QueryContext::approx_bytes() const {
  return sub.node_ids.size() * 48 + sub.edges.size() * 12 + feats.entries.size() * 12 +
         edge_src.size() * 12 + node_global.size() * 4 + 256;
}

// ----- local pass -----

LocalPass run_local_pass(Tape& tape, const ParamBinding& pb, const ModelParams& p,
                         const QueryContext& q, const std::vector<Tensor>& global_layers) {
  if (global_layers.size() != p.hyper.layers + 1)
    throw ShapeError("expected one global embedding per layer plus the input layer");
  Eigen::Index d = p.hyper.dim;
  uint32_t N = q.sub.node_count();

  LocalPass out;
  out.layers.push_back(tape.add_row_vector(tape.sparse_matmul(&q.feats, pb.leaves[p.W0]),
                                           pb.leaves[p.b0]));

  for (uint32_t l = 0; l < p.hyper.layers; ++l) {
    const auto& ly = p.layer[l];
    Tensor e_l = out.layers.back();
    Tensor eg_sub = tape.gather(global_layers[l], q.node_global);  // N x d

    // Attention logit per edge (n --r--> z):
    //   sigma( r_a . (W_a^T [e_n ‖ e_gz ‖ r ‖ e_z]) + b_a . r_a )
    // computed as per-node/per-relation dot products against W_a r_a, added
    // along edge endpoints — no per-edge concatenation is materialized.
    Tensor wa = tape.matmul(pb.leaves[ly.Wa], pb.leaves[ly.ra]);  // 4d x 1
    Tensor c = tape.matmul(pb.leaves[ly.ba], pb.leaves[ly.ra]);   // 1 x 1
    Tensor ndot = tape.matmul(e_l, tape.row_slice(wa, 0, d));
    Tensor gdot = tape.matmul(eg_sub, tape.row_slice(wa, d, d));
    Tensor rdot = tape.matmul(pb.leaves[p.rel_emb], tape.row_slice(wa, 2 * d, d));
    Tensor zdot = tape.matmul(e_l, tape.row_slice(wa, 3 * d, d));
    Tensor logits = tape.add_scalar(
        tape.add(tape.add(tape.gather(ndot, q.edge_src),
                          tape.gather(tape.add(gdot, zdot), q.edge_dst)),
                 tape.gather(rdot, q.edge_rel)),
        c);
    Tensor alpha = tape.sigmoid(logits);  // per-edge gate, not normalized

    // Message [e_z ‖ e_gz ‖ r] W, decomposed into per-node and per-relation
    // projections gathered along edges.
    Tensor W = pb.leaves[ly.W];
    Tensor pz = tape.add(tape.matmul(e_l, tape.row_slice(W, 0, d)),
                         tape.matmul(eg_sub, tape.row_slice(W, d, d)));
    Tensor pr = tape.matmul(pb.leaves[p.rel_emb], tape.row_slice(W, 2 * d, d));
    Tensor msg = tape.add(tape.gather(pz, q.edge_dst), tape.gather(pr, q.edge_rel));

    Tensor agg = tape.weighted_segment_sum(msg, alpha, q.edge_src, N);
    Tensor eprime = tape.add_row_vector(agg, pb.leaves[ly.b]);  // b once, after the sum

    // Gate beta = sigma([e_n ‖ e_gn ‖ e'_n] W_betap + b_betap).
    Tensor Wbp = pb.leaves[ly.Wbp];
    Tensor gsum = tape.add(tape.add(tape.matmul(e_l, tape.row_slice(Wbp, 0, d)),
                                    tape.matmul(eg_sub, tape.row_slice(Wbp, d, d))),
                           tape.matmul(eprime, tape.row_slice(Wbp, 2 * d, d)));
    Tensor beta = tape.sigmoid(tape.add_row_vector(gsum, pb.leaves[ly.bbp]));

    // e_{l+1} = beta ⊙ [e_n ‖ e_gn] W_beta + (1 - beta) ⊙ e'_n.
    Tensor Wb = pb.leaves[ly.Wbeta];
    Tensor mix = tape.add(tape.matmul(e_l, tape.row_slice(Wb, 0, d)),
                          tape.matmul(eg_sub, tape.row_slice(Wb, d, d)));
    out.layers.push_back(tape.add(tape.mul(beta, mix),
                                  tape.mul(tape.one_minus(beta), eprime)));
  }

  Tensor cat = out.layers[0];
  for (uint32_t l = 1; l < out.layers.size(); ++l) cat = tape.hstack(cat, out.layers[l]);
  out.final_nodes = tape.add_row_vector(tape.matmul(cat, pb.leaves[p.Wo]), pb.leaves[p.bo]);
  out.subgraph_embedding = tape.mean_rows(out.final_nodes);
  return out;
}

// ----- candidate scoring -----

CandidateScores score_candidates(Tape& tape, const ParamBinding& pb, const ModelParams& p,
                                 const QueryContext& q, const std::vector<Tensor>& global_layers,
                                 const LocalPass& local, RelationId query_rel,
                                 const std::vector<EntityId>& candidates) {
  if (query_rel >= p.hyper.augmented_relations)
    throw IndexError("query relation out of augmented range");
  Eigen::Index d = p.hyper.dim;

  Tensor r_row = tape.gather(pb.leaves[p.rel_emb], {query_rel});
  Tensor e_h = tape.gather(local.final_nodes, {0});
  Tensor qcat = tape.hstack(tape.hstack(local.subgraph_embedding, e_h), r_row);
  Tensor e_query = tape.add_row_vector(tape.matmul(qcat, pb.leaves[p.Wq]), pb.leaves[p.bq]);

  CandidateScores cs;
  std::vector<uint32_t> in_rows, out_rows;
  for (EntityId cand : candidates) {
    if (auto local_idx = q.sub.membership(cand)) {
      cs.slot.emplace_back(true, static_cast<uint32_t>(in_rows.size()));
      in_rows.push_back(*local_idx);
    } else {
      cs.slot.emplace_back(false, static_cast<uint32_t>(out_rows.size()));
      out_rows.push_back(cand);
    }
  }

  if (!in_rows.empty()) {
    Tensor e_in = tape.gather(local.final_nodes, std::move(in_rows));
    cs.in_logits = tape.matmul_bt(e_in, e_query);
  }
  if (!out_rows.empty()) {
    // Out-of-subgraph candidates: the local stream is zero by construction,
    // so each layer reduces to the gated global mix and the layer-0 block of
    // the output concatenation is a zero matrix.
    Tensor cat = tape.zeros(static_cast<Eigen::Index>(out_rows.size()), d);
    for (uint32_t l = 0; l < p.hyper.layers; ++l) {
      const auto& ly = p.layer[l];
      Tensor go = tape.gather(global_layers[l], out_rows);
      Tensor beta = tape.sigmoid(tape.add_row_vector(
          tape.matmul(go, tape.row_slice(pb.leaves[ly.Wbp], d, d)), pb.leaves[ly.bbp]));
      Tensor eo = tape.mul(beta, tape.matmul(go, tape.row_slice(pb.leaves[ly.Wbeta], d, d)));
      cat = tape.hstack(cat, eo);
    }
    Tensor e_out = tape.add_row_vector(tape.matmul(cat, pb.leaves[p.Wo]), pb.leaves[p.bo]);
    cs.out_logits = tape.matmul_bt(e_out, e_query);
  }

  cs.ordered.resize(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    const auto& [is_in, row] = cs.slot[i];
    const Tensor& t = is_in ? *cs.in_logits : *cs.out_logits;
    cs.ordered[i] = tape.value(t)(row, 0);
  }
  return cs;
}

Tensor candidate_logit(Tape& tape, const CandidateScores& scores, size_t candidate_index) {
  const auto& [is_in, row] = scores.slot.at(candidate_index);
  const Tensor& t = is_in ? *scores.in_logits : *scores.out_logits;
  return tape.row_slice(t, row, 1);
}

std::vector<double> score_query_frozen(const ModelParams& p,
                                       const std::vector<Eigen::MatrixXd>& global_layers,
                                       const QueryContext& q, RelationId query_rel,
                                       const std::vector<EntityId>& candidates,
                                       Instrumentation* instr) {
  StopWatch w;
  Tape tape;
  ParamBinding pb = bind_params(tape, p.store);
  std::vector<Tensor> gl;
  gl.reserve(global_layers.size());
  for (const Eigen::MatrixXd& g : global_layers) gl.push_back(tape.leaf(g));
  LocalPass local = run_local_pass(tape, pb, p, q, gl);
  CandidateScores cs = score_candidates(tape, pb, p, q, gl, local, query_rel, candidates);
  if (instr) {
    ++instr->forward_passes;
    instr->forward_seconds += w.seconds();
  }
  return std::move(cs.ordered);
}

// ----- loss -----

double cross_entropy_loss(const std::vector<double>& pos_scores,
                          const std::vector<double>& neg_scores) {
  double loss = 0.0;
  for (double f : pos_scores) loss -= std::log(f);
  for (double f : neg_scores) loss -= std::log1p(-f);
  return loss;
}

Tensor logistic_loss(Tape& tape, Tensor pos_logits, Tensor neg_logits) {
  Tensor lp = tape.sum_all(tape.softplus(tape.neg(pos_logits)));
  Tensor ln = tape.sum_all(tape.softplus(neg_logits));
  return tape.add(lp, ln);
}

}  // namespace glar
