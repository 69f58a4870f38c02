#pragma once

#include <string>
#include <vector>

#include "sgmatch/model.hpp"
#include "sgmatch/training.hpp"

namespace sgmatch {

// Merged view of all module configs. Loaded from a JSON object with flat
// dotted keys ({"model.dim": 64, ...}); unknown keys are hard errors; every
// field has a default so an empty config is a valid run.
struct RunConfig {
  ModelConfig model;
  LossConfig loss;
  OptimizerConfig optim;
  std::size_t train_epochs = 10;
  std::size_t train_batch_size = 32;
  uint64_t train_seed = 1;
  SamplerMode train_mode = SamplerMode::Semantic;
  SyntheticGenConfig data;
  uint64_t eval_seed = 99;

  RunConfig();

  TrainConfig train_config() const {
    TrainConfig t;
    t.epochs = train_epochs;
    t.batch_size = train_batch_size;
    t.seed = train_seed;
    t.mode = train_mode;
    t.loss = loss;
    t.optim = optim;
    return t;
  }

  // Applies the flat JSON object at `path` over the defaults.
  void load_file(const std::string& path);
  void load_json_text(const std::string& text);

  // `key=value` override, same key space as the file.
  void apply_override(const std::string& assignment);

  // All known keys with their current values, for --help and round-trips.
  std::string dump() const;
};

}  // namespace sgmatch
