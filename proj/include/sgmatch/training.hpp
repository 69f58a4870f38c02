#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sgmatch/dataset.hpp"
#include "sgmatch/model.hpp"
#include "sgmatch/negsample.hpp"
#include "sgmatch/rng.hpp"

namespace sgmatch {

// -------------------------------------------------------------------------
// Synthetic compositional dataset

struct SyntheticGenConfig {
  std::vector<std::string> nouns;
  std::vector<std::string> adjectives;
  std::vector<std::string> relations;  // single- or multi-word phrases
  std::size_t n_attr = 2000;  // captions "the A1 N1 and the A2 N2"
  std::size_t n_rel = 2000;   // captions "the A1 N1 R the A2 N2"
  double noise_std = 0.05;
  uint64_t seed = 1;

  // Feature layout: a multi-hot block over (adjective, noun) pairs followed
  // by a multi-hot block over (noun, relation, noun) triples.
  std::size_t attr_block() const { return adjectives.size() * nouns.size(); }
  std::size_t rel_block() const {
    return nouns.size() * relations.size() * nouns.size();
  }
  std::size_t feature_dim() const { return attr_block() + rel_block(); }

  std::size_t attr_bit(std::size_t adj, std::size_t noun) const {
    return adj * nouns.size() + noun;
  }
  std::size_t rel_bit(std::size_t n1, std::size_t rel, std::size_t n2) const {
    return attr_block() +
           (n1 * relations.size() + rel) * nouns.size() + n2;
  }

  void validate() const;
};

// The matching lexicon: nouns NOUN, adjectives ADJ, first relation word
// VERB and the rest ADP, plus the closed-class words the templates and the
// attribute triples need ("the", "and", "a", "an", "is", "of").
Lexicon synthetic_lexicon(const SyntheticGenConfig& cfg);

std::vector<Sample> gen_synthetic(const SyntheticGenConfig& cfg);

// -------------------------------------------------------------------------
// Batching

enum class SamplerMode { Semantic, Random, None };

SamplerMode sampler_mode_from_string(const std::string& s);
std::string to_string(SamplerMode mode);

struct Batch {
  std::vector<std::size_t> sample_ids;
  std::vector<std::optional<NegativeSample>> negatives;
  std::size_t epoch = 0;
  std::size_t first_step = 0;
};

// Shuffles the dataset with the epoch's derived stream and attaches one
// negative per sample according to the mode. Stateless in the epoch index,
// so resumed runs see the same batch stream.
std::vector<Batch> make_batches(const std::vector<Sample>& dataset,
                                std::size_t batch_size, std::size_t epoch,
                                uint64_t seed, SamplerMode mode);

// -------------------------------------------------------------------------
// Optimizer: adaptive moments with decoupled weight decay

struct OptimizerConfig {
  double lr = 1e-3;  // desk-scale default; full-scale runs used 2e-6
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.1;
};

template <typename T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

  const OptimizerConfig& config() const { return cfg_; }
  std::size_t step_count() const { return step_; }

  void step(ParamStore<T>& params) {
    if (moments_.empty())
      for (auto& [name, p] : params) {
        moments_.emplace_back(Tensor<T>::zeros(p.value.shape()),
                              Tensor<T>::zeros(p.value.shape()));
      }
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    std::size_t idx = 0;
    for (auto& [name, p] : params) {
      auto& [m, v] = moments_[idx++];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = static_cast<double>(p.grad[i]);
        const double mi =
            cfg_.beta1 * static_cast<double>(m[i]) + (1.0 - cfg_.beta1) * g;
        const double vi = cfg_.beta2 * static_cast<double>(v[i]) +
                          (1.0 - cfg_.beta2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double update = (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps);
        p.value[i] = static_cast<T>(
            static_cast<double>(p.value[i]) -
            cfg_.lr * (update +
                       cfg_.weight_decay * static_cast<double>(p.value[i])));
      }
    }
  }

 private:
  OptimizerConfig cfg_;
  std::size_t step_ = 0;
  std::vector<std::pair<Tensor<T>, Tensor<T>>> moments_;  // store order
};

// -------------------------------------------------------------------------
// Training loop

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  uint64_t seed = 1;  // batching + negative sampling
  SamplerMode mode = SamplerMode::Semantic;
  std::size_t start_epoch = 0;  // for resumed runs
  LossConfig loss;
  OptimizerConfig optim;
};

struct StepLogEntry {
  std::size_t step;
  double final_loss, hinge, itcl;
};

// Parses each negative caption so its triples feed the knowledge encoder.
template <typename T>
BatchInput batch_input(const std::vector<Sample>& dataset, const Batch& batch,
                       const Lexicon& lexicon) {
  BatchInput in;
  for (std::size_t k = 0; k < batch.sample_ids.size(); ++k) {
    in.samples.push_back(&dataset[batch.sample_ids[k]]);
    const auto& neg = batch.negatives[k];
    if (!neg) {
      in.negatives.emplace_back(std::nullopt);
      continue;
    }
    TextInput t;
    t.caption = neg->negative_caption;
    t.triples =
        scene_graph_to_triples(parse_scene_graph(t.caption, lexicon));
    in.negatives.emplace_back(std::move(t));
  }
  return in;
}

template <typename T>
StepMetrics train_step(Model<T>& model, const BatchInput& batch,
                       Optimizer<T>& opt, const LossConfig& loss_cfg) {
  model.params().zero_grads();
  StepMetrics metrics = model_loss(model, batch, loss_cfg, true);
  if (!std::isfinite(metrics.final_loss))
    throw NonFiniteLoss("non-finite loss at optimizer step " +
                        std::to_string(opt.step_count()));
  opt.step(model.params());
  return metrics;
}

// Runs the epochs and reports each step through the callback (step index,
// metrics). Negatives are re-drawn per epoch from the epoch's stream.
template <typename T>
std::vector<StepLogEntry> train(
    Model<T>& model, const std::vector<Sample>& dataset,
    const Lexicon& lexicon, const TrainConfig& cfg,
    const std::function<void(const StepLogEntry&)>& on_step = {}) {
  if (dataset.empty()) throw ConfigError("train: empty dataset");
  Optimizer<T> opt(cfg.optim);
  std::vector<StepLogEntry> log;
  std::size_t step = 0;
  for (std::size_t epoch = cfg.start_epoch; epoch < cfg.epochs; ++epoch) {
    auto batches =
        make_batches(dataset, cfg.batch_size, epoch, cfg.seed, cfg.mode);
    for (const Batch& b : batches) {
      BatchInput in = batch_input<T>(dataset, b, lexicon);
      StepMetrics m;
      try {
        m = train_step(model, in, opt, cfg.loss);
      } catch (const NonFiniteLoss&) {
        throw NonFiniteLoss("non-finite loss at step " +
                            std::to_string(step) + " (epoch " +
                            std::to_string(epoch) + ")");
      }
      StepLogEntry entry{step, m.final_loss, m.hinge, m.itcl};
      log.push_back(entry);
      if (on_step) on_step(entry);
      ++step;
    }
  }
  return log;
}

// JSON lines {"step", "final", "hinge", "itcl"}.
void write_metrics_jsonl(const std::string& path,
                         const std::vector<StepLogEntry>& log);

}  // namespace sgmatch
