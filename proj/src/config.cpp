#include "sgmatch/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"

namespace sgmatch {

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

using Setter = std::function<void(RunConfig&, const nlohmann::json&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"model.dim", [](RunConfig& c, const nlohmann::json& v) { c.model.dim = v.get<std::size_t>(); }},
      {"model.word_dim", [](RunConfig& c, const nlohmann::json& v) { c.model.word_dim = v.get<std::size_t>(); }},
      {"model.joint_dim", [](RunConfig& c, const nlohmann::json& v) { c.model.joint_dim = v.get<std::size_t>(); }},
      {"model.heads", [](RunConfig& c, const nlohmann::json& v) { c.model.heads = v.get<std::size_t>(); }},
      {"model.text_layers", [](RunConfig& c, const nlohmann::json& v) { c.model.text_layers = v.get<std::size_t>(); }},
      {"model.kee_layers", [](RunConfig& c, const nlohmann::json& v) { c.model.kee_layers = v.get<std::size_t>(); }},
      {"model.kmax", [](RunConfig& c, const nlohmann::json& v) { c.model.kmax = v.get<std::size_t>(); }},
      {"model.max_tokens", [](RunConfig& c, const nlohmann::json& v) { c.model.max_tokens = v.get<std::size_t>(); }},
      {"model.lambda", [](RunConfig& c, const nlohmann::json& v) { c.model.lambda = v.get<double>(); }},
      {"model.triple_fusion", [](RunConfig& c, const nlohmann::json& v) { c.model.triple_fusion = triple_fusion_from_string(v.get<std::string>()); }},
      {"model.image_hidden", [](RunConfig& c, const nlohmann::json& v) { c.model.image_hidden = v.get<std::size_t>(); }},
      {"model.seed", [](RunConfig& c, const nlohmann::json& v) { c.model.seed = v.get<uint64_t>(); }},
      {"loss.margin", [](RunConfig& c, const nlohmann::json& v) { c.loss.margin = v.get<double>(); }},
      {"loss.temperature", [](RunConfig& c, const nlohmann::json& v) { c.loss.temperature = v.get<double>(); }},
      {"loss.neg_in_denominator", [](RunConfig& c, const nlohmann::json& v) { c.loss.neg_in_denominator = v.get<bool>(); }},
      {"optim.lr", [](RunConfig& c, const nlohmann::json& v) { c.optim.lr = v.get<double>(); }},
      {"optim.beta1", [](RunConfig& c, const nlohmann::json& v) { c.optim.beta1 = v.get<double>(); }},
      {"optim.beta2", [](RunConfig& c, const nlohmann::json& v) { c.optim.beta2 = v.get<double>(); }},
      {"optim.eps", [](RunConfig& c, const nlohmann::json& v) { c.optim.eps = v.get<double>(); }},
      {"optim.weight_decay", [](RunConfig& c, const nlohmann::json& v) { c.optim.weight_decay = v.get<double>(); }},
      {"train.epochs", [](RunConfig& c, const nlohmann::json& v) { c.train_epochs = v.get<std::size_t>(); }},
      {"train.batch_size", [](RunConfig& c, const nlohmann::json& v) { c.train_batch_size = v.get<std::size_t>(); }},
      {"train.seed", [](RunConfig& c, const nlohmann::json& v) { c.train_seed = v.get<uint64_t>(); }},
      {"train.mode", [](RunConfig& c, const nlohmann::json& v) { c.train_mode = sampler_mode_from_string(v.get<std::string>()); }},
      {"data.nouns", [](RunConfig& c, const nlohmann::json& v) { c.data.nouns = v.get<std::vector<std::string>>(); }},
      {"data.adjectives", [](RunConfig& c, const nlohmann::json& v) { c.data.adjectives = v.get<std::vector<std::string>>(); }},
      {"data.relations", [](RunConfig& c, const nlohmann::json& v) { c.data.relations = v.get<std::vector<std::string>>(); }},
      {"data.n_attr", [](RunConfig& c, const nlohmann::json& v) { c.data.n_attr = v.get<std::size_t>(); }},
      {"data.n_rel", [](RunConfig& c, const nlohmann::json& v) { c.data.n_rel = v.get<std::size_t>(); }},
      {"data.noise_std", [](RunConfig& c, const nlohmann::json& v) { c.data.noise_std = v.get<double>(); }},
      {"data.seed", [](RunConfig& c, const nlohmann::json& v) { c.data.seed = v.get<uint64_t>(); }},
      {"eval.seed", [](RunConfig& c, const nlohmann::json& v) { c.eval_seed = v.get<uint64_t>(); }},
  };
  return table;
}

bool is_list_key(const std::string& key) {
  return key == "data.nouns" || key == "data.adjectives" ||
         key == "data.relations";
}

}  // namespace

RunConfig::RunConfig() {
  data.nouns = {"dog",  "cat",  "horse", "cow",   "bird",  "fish",
                "car",  "truck", "boat",  "plane", "house", "tree",
                "table", "chair", "cup",   "plate", "ball",  "box",
                "shirt", "hat",   "dress", "book",  "lamp",  "door"};
  data.adjectives = {"red",   "blue", "green", "yellow", "black",
                     "white", "small", "big",  "old",    "new"};
  data.relations = {"holds", "carries", "pushes", "faces", "sits on",
                    "stands near"};
}

void RunConfig::load_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  const auto& table = setters();
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto s = table.find(it.key());
    if (s == table.end()) throw ConfigError("unknown config key: " + it.key());
    try {
      s->second(*this, it.value());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config key " + it.key() + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  load_json_text(buf.str());
}

void RunConfig::apply_override(const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like key=value: " + assignment);
  std::string key = assignment.substr(0, eq);
  std::string raw = assignment.substr(eq + 1);
  const auto& table = setters();
  auto s = table.find(key);
  if (s == table.end()) throw ConfigError("unknown config key: " + key);

  nlohmann::json value;
  if (is_list_key(key)) {
    value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded() || !value.is_array())
      value = split_csv(raw);  // bare comma-separated form
  } else {
    value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;  // treat as a string
  }
  try {
    s->second(*this, value);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("override " + key + ": " + e.what());
  }
}

std::string RunConfig::dump() const {
  nlohmann::json j;
  j["model.dim"] = model.dim;
  j["model.word_dim"] = model.word_dim;
  j["model.joint_dim"] = model.joint_dim;
  j["model.heads"] = model.heads;
  j["model.text_layers"] = model.text_layers;
  j["model.kee_layers"] = model.kee_layers;
  j["model.kmax"] = model.kmax;
  j["model.max_tokens"] = model.max_tokens;
  j["model.lambda"] = model.lambda;
  j["model.triple_fusion"] = to_string(model.triple_fusion);
  j["model.image_hidden"] = model.image_hidden;
  j["model.seed"] = model.seed;
  j["loss.margin"] = loss.margin;
  j["loss.temperature"] = loss.temperature;
  j["loss.neg_in_denominator"] = loss.neg_in_denominator;
  j["optim.lr"] = optim.lr;
  j["optim.beta1"] = optim.beta1;
  j["optim.beta2"] = optim.beta2;
  j["optim.eps"] = optim.eps;
  j["optim.weight_decay"] = optim.weight_decay;
  j["train.epochs"] = train_epochs;
  j["train.batch_size"] = train_batch_size;
  j["train.seed"] = train_seed;
  j["train.mode"] = to_string(train_mode);
  j["data.nouns"] = data.nouns;
  j["data.adjectives"] = data.adjectives;
  j["data.relations"] = data.relations;
  j["data.n_attr"] = data.n_attr;
  j["data.n_rel"] = data.n_rel;
  j["data.noise_std"] = data.noise_std;
  j["data.seed"] = data.seed;
  j["eval.seed"] = eval_seed;
  return j.dump(2);
}

}  // namespace sgmatch
