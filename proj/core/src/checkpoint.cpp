#include "hjbadp/checkpoint.hpp"

#include <fstream>

namespace hjbadp {

nlohmann::ordered_json mlp_to_json(const MlpParams& p) {
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const MlpLayer& l : p.layers) {
    nlohmann::ordered_json jl;
    jl["input_width"] = l.spec.input_width;
    jl["output_width"] = l.spec.output_width;
    jl["activation"] = activation_name(l.spec.activation);
    jl["scale"] = l.spec.scale;
    std::vector<double> w;
    w.reserve(static_cast<size_t>(l.weights.size()));
    for (int i = 0; i < l.weights.rows(); ++i) {
      for (int j = 0; j < l.weights.cols(); ++j) w.push_back(l.weights(i, j));
    }
    jl["weights"] = w;
    jl["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
    layers.push_back(std::move(jl));
  }
  nlohmann::ordered_json j;
  j["layers"] = std::move(layers);
  return j;
}

MlpParams mlp_from_json(const nlohmann::json& j) {
  if (!j.contains("layers") || !j["layers"].is_array() || j["layers"].empty()) {
    throw ConfigError("network json: missing or empty layers array");
  }
  MlpParams p;
  for (const auto& jl : j["layers"]) {
    MlpLayer l;
    l.spec.input_width = jl.at("input_width").get<int>();
    l.spec.output_width = jl.at("output_width").get<int>();
    l.spec.activation = activation_from_name(jl.at("activation").get<std::string>());
    l.spec.scale = jl.value("scale", 1.0);
    const auto w = jl.at("weights").get<std::vector<double>>();
    const auto b = jl.at("bias").get<std::vector<double>>();
    const size_t expect_w =
        static_cast<size_t>(l.spec.input_width) * static_cast<size_t>(l.spec.output_width);
    if (w.size() != expect_w || b.size() != static_cast<size_t>(l.spec.output_width)) {
      throw ConfigError("network json: weight/bias length does not match layer widths");
    }
    l.weights.resize(l.spec.output_width, l.spec.input_width);
    size_t idx = 0;
    for (int i = 0; i < l.weights.rows(); ++i) {
      for (int jc = 0; jc < l.weights.cols(); ++jc) l.weights(i, jc) = w[idx++];
    }
    l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    p.layers.push_back(std::move(l));
  }
  std::vector<LayerSpec> specs;
  specs.reserve(p.layers.size());
  for (const MlpLayer& l : p.layers) specs.push_back(l.spec);
  validate_specs(specs);
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["seed"] = ckpt.seed;
  j["actor"] = mlp_to_json(ckpt.actor);
  j["critic"] = mlp_to_json(ckpt.critic);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open checkpoint file for writing: " + path.string());
  out << j.dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint parse error in " + path.string() + ": " + e.what());
  }
  if (!j.contains("format") || j["format"] != kCheckpointFormat) {
    throw ConfigError("checkpoint " + path.string() + " has unknown format tag");
  }
  Checkpoint c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.actor = mlp_from_json(j.at("actor"));
  c.critic = mlp_from_json(j.at("critic"));
  return c;
}

}  // namespace hjbadp
