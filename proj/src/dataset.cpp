#include "sgmatch/dataset.hpp"

#include <fstream>

#include "json.hpp"

namespace sgmatch {

std::vector<Sample> read_dataset_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path);
  std::vector<Sample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("dataset line " + std::to_string(line_no) + ": " +
                    e.what());
    }
    Sample s;
    s.id = j.at("id").get<std::string>();
    s.caption = j.at("caption").get<std::string>();
    s.image_features = j.at("image_features").get<std::vector<float>>();
    if (j.contains("scene_graph")) {
      s.scene_graph = scene_graph_from_json(j.at("scene_graph").dump());
      s.triples = scene_graph_to_triples(s.scene_graph);
      s.parsed = true;
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

void write_dataset_jsonl(const std::string& path,
                         const std::vector<Sample>& samples,
                         bool with_scene_graph) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset file: " + path);
  for (const Sample& s : samples) {
    nlohmann::json j;
    j["id"] = s.id;
    j["caption"] = s.caption;
    j["image_features"] = s.image_features;
    if (with_scene_graph && s.parsed)
      j["scene_graph"] = nlohmann::json::parse(scene_graph_to_json(s.scene_graph));
    out << j.dump() << "\n";
  }
}

void prepare_samples(std::vector<Sample>& samples, const Lexicon& lexicon) {
  for (Sample& s : samples) {
    if (s.parsed) continue;
    s.scene_graph = parse_scene_graph(s.caption, lexicon);
    s.triples = scene_graph_to_triples(s.scene_graph);
    s.parsed = true;
  }
}

}  // namespace sgmatch
