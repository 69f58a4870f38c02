#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "sgmatch/model.hpp"

namespace sgmatch {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload assumes a little-endian host");

inline nlohmann::json model_config_to_json(const ModelConfig& cfg,
                                           const Vocab& vocab) {
  nlohmann::json j;
  j["dim"] = cfg.dim;
  j["word_dim"] = cfg.word_dim;
  j["joint_dim"] = cfg.joint_dim;
  j["heads"] = cfg.heads;
  j["text_layers"] = cfg.text_layers;
  j["kee_layers"] = cfg.kee_layers;
  j["kmax"] = cfg.kmax;
  j["max_tokens"] = cfg.max_tokens;
  j["lambda"] = cfg.lambda;
  j["triple_fusion"] = to_string(cfg.triple_fusion);
  j["image_hidden"] = cfg.image_hidden;
  j["image_dim"] = cfg.image_dim;
  j["seed"] = cfg.seed;
  j["vocab"] = vocab.words();
  return j;
}

inline std::pair<ModelConfig, Vocab> model_config_from_json(
    const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.dim = j.at("dim").get<std::size_t>();
  cfg.word_dim = j.at("word_dim").get<std::size_t>();
  cfg.joint_dim = j.at("joint_dim").get<std::size_t>();
  cfg.heads = j.at("heads").get<std::size_t>();
  cfg.text_layers = j.at("text_layers").get<std::size_t>();
  cfg.kee_layers = j.at("kee_layers").get<std::size_t>();
  cfg.kmax = j.at("kmax").get<std::size_t>();
  cfg.max_tokens = j.at("max_tokens").get<std::size_t>();
  cfg.lambda = j.at("lambda").get<double>();
  cfg.triple_fusion =
      triple_fusion_from_string(j.at("triple_fusion").get<std::string>());
  cfg.image_hidden = j.at("image_hidden").get<std::size_t>();
  cfg.image_dim = j.at("image_dim").get<std::size_t>();
  cfg.seed = j.at("seed").get<uint64_t>();
  Vocab vocab = Vocab::from_words(j.at("vocab").get<std::vector<std::string>>());
  return {cfg, vocab};
}

// Container format: one UTF-8 JSON manifest line holding the model config
// and the ordered tensor list {name, shape}, followed by the concatenated
// little-endian float32 payloads in manifest order.
template <typename T>
void save_checkpoint(const std::string& path, const Model<T>& model) {
  nlohmann::json manifest;
  manifest["config"] = model_config_to_json(model.config(), model.vocab());
  manifest["tensors"] = nlohmann::json::array();
  for (const auto& [name, p] : model.params())
    manifest["tensors"].push_back(
        {{"name", name}, {"shape", p.value.shape()}});

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << manifest.dump() << "\n";
  std::vector<float> buf;
  for (const auto& [name, p] : model.params()) {
    buf.resize(p.value.size());
    for (std::size_t i = 0; i < p.value.size(); ++i)
      buf[i] = static_cast<float>(p.value[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) throw IoError("short write to checkpoint: " + path);
}

struct CheckpointManifest {
  nlohmann::json config;
  std::vector<std::pair<std::string, std::vector<std::size_t>>> tensors;
};

inline CheckpointManifest read_checkpoint_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw IoError("checkpoint has no manifest line: " + path);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad checkpoint manifest: ") + e.what());
  }
  CheckpointManifest out;
  out.config = manifest.at("config");
  for (const auto& t : manifest.at("tensors"))
    out.tensors.emplace_back(t.at("name").get<std::string>(),
                             t.at("shape").get<std::vector<std::size_t>>());
  return out;
}

template <typename T>
std::unique_ptr<Model<T>> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw IoError("checkpoint has no manifest line: " + path);
  nlohmann::json manifest = nlohmann::json::parse(line);

  auto [cfg, vocab] = model_config_from_json(manifest.at("config"));
  auto model = std::make_unique<Model<T>>(cfg, vocab);

  for (const auto& t : manifest.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    const auto shape = t.at("shape").get<std::vector<std::size_t>>();
    Param<T>& p = model->params().get(name);
    if (p.value.shape() != shape)
      throw IoError("checkpoint tensor " + name + " has shape mismatch");
    std::vector<float> buf(p.value.size());
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw IoError("checkpoint payload truncated at tensor " + name);
    for (std::size_t i = 0; i < buf.size(); ++i)
      p.value[i] = static_cast<T>(buf[i]);
  }
  return model;
}

}  // namespace sgmatch
