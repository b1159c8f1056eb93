#include "glar/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

namespace glar {

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& what) {
  Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw DataError("checkpoint: bad matrix payload for " + what);
  Eigen::MatrixXd m(rows, cols);
  size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[i++].get<double>();
  return m;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const ModelHyper& h = ckpt.params.hyper;
  nlohmann::json j;
  j["format"] = "glar-checkpoint";
  j["format_version"] = kCheckpointFormatVersion;
  j["structural"] = {
      {"dim", h.dim},           {"layers", h.layers},
      {"hops", h.hops},         {"k", h.k},
      {"clusters", h.clusters}, {"augmented_relations", h.augmented_relations},
      {"relational_multiplicity", ckpt.relational_multiplicity},
  };
  j["dataset_name"] = ckpt.dataset_name;
  j["seed"] = ckpt.seed;
  j["centroids"] = matrix_to_json(ckpt.clusters.centroids);
  nlohmann::json params = nlohmann::json::array();
  for (const Param& p : ckpt.params.store.params) {
    nlohmann::json e = matrix_to_json(p.value);
    e["name"] = p.name;
    params.push_back(std::move(e));
  }
  j["params"] = std::move(params);

  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << j.dump(1) << "\n";
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "glar-checkpoint")
      throw DataError("checkpoint " + path.string() + ": unrecognized format tag");
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion)
      throw DataError("checkpoint " + path.string() + ": unsupported format version");

    const auto& s = j.at("structural");
    ModelHyper h;
    h.dim = s.at("dim").get<uint32_t>();
    h.layers = s.at("layers").get<uint32_t>();
    h.hops = s.at("hops").get<uint32_t>();
    h.k = s.at("k").get<uint32_t>();
    h.clusters = s.at("clusters").get<uint32_t>();
    h.augmented_relations = s.at("augmented_relations").get<uint32_t>();

    Checkpoint ckpt;
    ckpt.params = make_params(h);
    ckpt.relational_multiplicity = s.at("relational_multiplicity").get<bool>();
    ckpt.dataset_name = j.at("dataset_name").get<std::string>();
    ckpt.seed = j.at("seed").get<uint64_t>();
    ckpt.clusters.m = h.clusters;
    ckpt.clusters.centroids = matrix_from_json(j.at("centroids"), "centroids");
    if (ckpt.clusters.centroids.rows() != static_cast<Eigen::Index>(h.clusters))
      throw DataError("checkpoint: centroid count does not match structural clusters");

    const auto& params = j.at("params");
    if (params.size() != ckpt.params.store.size())
      throw DataError("checkpoint: parameter count does not match structural config");
    for (size_t i = 0; i < params.size(); ++i) {
      Param& p = ckpt.params.store[static_cast<int>(i)];
      if (params[i].at("name").get<std::string>() != p.name)
        throw DataError("checkpoint: parameter order mismatch at " + p.name);
      Eigen::MatrixXd v = matrix_from_json(params[i], p.name);
      if (v.rows() != p.value.rows() || v.cols() != p.value.cols())
        throw DataError("checkpoint: shape mismatch for " + p.name);
      p.value = std::move(v);
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
}

void require_structural_match(const Checkpoint& ckpt, const RunConfig& cfg) {
  const ModelHyper& h = ckpt.params.hyper;
  auto fail = [](const std::string& what) {
    throw ConfigError("checkpoint structural config differs from run config: " + what);
  };
  if (h.dim != cfg.dim) fail("dim");
  if (h.layers != cfg.layers) fail("layers");
  if (h.hops != cfg.hops) fail("hops");
  if (h.k != cfg.k) fail("k");
  if (h.clusters != cfg.clusters) fail("clusters");
  if (ckpt.relational_multiplicity != cfg.relational_multiplicity)
    fail("relational_multiplicity");
}

}  // namespace glar
