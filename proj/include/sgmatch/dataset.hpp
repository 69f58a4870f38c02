#pragma once

#include <string>
#include <vector>

#include "sgmatch/textgraph.hpp"

namespace sgmatch {

// One (caption, image-feature) pair. The scene graph and triples are parsed
// once and cached; parsing is deterministic so the cache is just a speedup.
struct Sample {
  std::string id;
  std::string caption;
  std::vector<float> image_features;
  SceneGraph scene_graph;
  std::vector<Triple> triples;
  bool parsed = false;
};

// JSONL, one object per line:
//   {"id": ..., "caption": ..., "image_features": [...]}
// with an optional "scene_graph" field in the scene-graph JSON schema.
std::vector<Sample> read_dataset_jsonl(const std::string& path);
void write_dataset_jsonl(const std::string& path,
                         const std::vector<Sample>& samples,
                         bool with_scene_graph = false);

// Parses captions and caches scene graphs + triples on each sample.
void prepare_samples(std::vector<Sample>& samples, const Lexicon& lexicon);

}  // namespace sgmatch
