#include "elegance/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

namespace elegance::numerics {

using nlohmann::json;

void save_mlp(const std::filesystem::path& path, const MlpParams& params,
              const std::map<std::string, std::string>& meta) {
  json doc;
  doc["format"] = "mlp-checkpoint-v1";
  doc["activation"] = activation_name(params.activation);
  doc["dims"] = params.dims();
  json layers = json::array();
  for (const auto& l : params.layers) {
    json jl;
    jl["w"] = l.w.data;
    jl["b"] = l.b.data;
    layers.push_back(std::move(jl));
  }
  doc["layers"] = std::move(layers);
  doc["meta"] = meta;

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write checkpoint: " + path.string());
    out << doc.dump() << "\n";
  }
  std::filesystem::rename(tmp, path);
}

LoadedMlp load_mlp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("missing checkpoint: " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw ConfigError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "mlp-checkpoint-v1")
    throw ConfigError("unexpected checkpoint format in " + path.string());
  LoadedMlp out;
  out.params.activation = activation_from_name(doc.at("activation").get<std::string>());
  std::vector<int> dims = doc.at("dims").get<std::vector<int>>();
  const json& layers = doc.at("layers");
  if (layers.size() + 1 != dims.size()) throw ConfigError("checkpoint dims/layers mismatch");
  for (size_t i = 0; i < layers.size(); ++i) {
    DenseLayer l;
    l.w = Tensor({dims[i + 1], dims[i]}, layers[i].at("w").get<std::vector<double>>());
    l.b = Tensor({dims[i + 1]}, layers[i].at("b").get<std::vector<double>>());
    out.params.layers.push_back(std::move(l));
  }
  if (doc.contains("meta")) out.meta = doc.at("meta").get<std::map<std::string, std::string>>();
  return out;
}

}  // namespace elegance::numerics
