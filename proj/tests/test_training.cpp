#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <set>

#include "sgmatch/checkpoint.hpp"
#include "sgmatch/model.hpp"
#include "sgmatch/training.hpp"

using namespace sgmatch;

namespace {

SyntheticGenConfig tiny_config() {
  SyntheticGenConfig cfg;
  cfg.nouns = {"dress", "book", "cow", "hay", "dog"};
  cfg.adjectives = {"red", "blue", "white", "black"};
  cfg.relations = {"holds", "sits on"};
  cfg.n_attr = 12;
  cfg.n_rel = 12;
  cfg.noise_std = 0.05;
  cfg.seed = 21;
  return cfg;
}

ModelConfig tiny_model_config(const SyntheticGenConfig& data) {
  ModelConfig mc;
  mc.dim = 16;
  mc.word_dim = 16;
  mc.joint_dim = 16;
  mc.heads = 2;
  mc.text_layers = 1;
  mc.kee_layers = 1;
  mc.kmax = 4;
  mc.max_tokens = 16;
  mc.lambda = 0.2;
  mc.image_hidden = 16;
  mc.image_dim = data.feature_dim();
  mc.seed = 5;
  return mc;
}

std::vector<float> param_snapshot(const ParamStore<float>& params) {
  std::vector<float> out;
  for (const auto& [name, p] : params)
    for (std::size_t i = 0; i < p.value.size(); ++i) out.push_back(p.value[i]);
  return out;
}

}  // namespace

TEST_CASE("gen_synthetic sets exactly the encoded bits before noise") {
  SyntheticGenConfig cfg;
  cfg.nouns = {"dress", "book"};
  cfg.adjectives = {"red", "blue"};
  cfg.relations = {"holds"};
  cfg.n_attr = 30;
  cfg.n_rel = 30;
  cfg.noise_std = 0.0;
  cfg.seed = 4;
  auto samples = gen_synthetic(cfg);
  Lexicon lex = synthetic_lexicon(cfg);
  REQUIRE(samples.size() == 60);

  for (const Sample& s : samples) {
    std::size_t ones = 0;
    for (float v : s.image_features) {
      CHECK((v == 0.0f || v == 1.0f));
      if (v == 1.0f) ++ones;
    }
    const bool is_rel = s.id.rfind("rel-", 0) == 0;
    CHECK(ones == (is_rel ? 3u : 2u));
  }

  // a specific caption decодes to its exact bit pair
  bool found = false;
  for (const Sample& s : samples) {
    if (s.caption != "the red dress and the blue book") continue;
    found = true;
    CHECK(s.image_features[cfg.attr_bit(0, 0)] == 1.0f);  // (red, dress)
    CHECK(s.image_features[cfg.attr_bit(1, 1)] == 1.0f);  // (blue, book)
    // the swapped caption would set the other diagonal
    CHECK(s.image_features[cfg.attr_bit(1, 0)] == 0.0f);
    CHECK(s.image_features[cfg.attr_bit(0, 1)] == 0.0f);
  }
  CHECK(found);

  // determinism
  auto again = gen_synthetic(cfg);
  REQUIRE(again.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(again[i].caption == samples[i].caption);
    CHECK(again[i].image_features == samples[i].image_features);
  }
  (void)lex;
}

TEST_CASE("gen_synthetic captions parse to the template structure") {
  SyntheticGenConfig cfg = tiny_config();
  cfg.n_attr = 200;
  cfg.n_rel = 200;
  auto samples = gen_synthetic(cfg);
  Lexicon lex = synthetic_lexicon(cfg);
  for (const Sample& s : samples) {
    SceneGraph sg = parse_scene_graph(s.caption, lex);
    CHECK(sg.objects.size() == 2);
    CHECK(sg.attributes.size() == 2);
    const bool is_rel = s.id.rfind("rel-", 0) == 0;
    CHECK(sg.relations.size() == (is_rel ? 1u : 0u));
  }
}

TEST_CASE("gen_synthetic validates its vocabulary") {
  SyntheticGenConfig cfg = tiny_config();
  cfg.nouns.clear();
  CHECK_THROWS_AS(gen_synthetic(cfg), ConfigError);

  SyntheticGenConfig clash = tiny_config();
  clash.adjectives.push_back("dress");  // already a noun
  CHECK_THROWS_AS(gen_synthetic(clash), ConfigError);

  SyntheticGenConfig reserved = tiny_config();
  reserved.nouns.push_back("the");
  CHECK_THROWS_AS(gen_synthetic(reserved), ConfigError);
}

TEST_CASE("make_batches: modes, shapes, determinism") {
  SyntheticGenConfig cfg = tiny_config();
  auto dataset = gen_synthetic(cfg);
  Lexicon lex = synthetic_lexicon(cfg);
  prepare_samples(dataset, lex);

  auto none = make_batches(dataset, 8, 0, 3, SamplerMode::None);
  std::size_t total = 0;
  for (const auto& b : none) {
    total += b.sample_ids.size();
    for (const auto& n : b.negatives) CHECK(!n.has_value());
  }
  CHECK(total == dataset.size());

  auto semantic = make_batches(dataset, 8, 0, 3, SamplerMode::Semantic);
  for (const auto& b : semantic)
    for (std::size_t k = 0; k < b.sample_ids.size(); ++k) {
      REQUIRE(b.negatives[k].has_value());
      const Sample& s = dataset[b.sample_ids[k]];
      CHECK(b.negatives[k]->source_caption == s.caption);
      CHECK(b.negatives[k]->negative_caption != s.caption);
      CHECK(canonical_word_multiset(b.negatives[k]->negative_caption) ==
            canonical_word_multiset(s.caption));
    }

  // attribute template has a single candidate: the adjective swap
  for (const auto& b : semantic)
    for (std::size_t k = 0; k < b.sample_ids.size(); ++k) {
      const Sample& s = dataset[b.sample_ids[k]];
      if (s.id.rfind("attr-", 0) != 0) continue;
      SceneGraph sg = s.scene_graph;
      SceneGraph swapped = apply_swap(sg, b.negatives[k]->swap);
      CHECK(b.negatives[k]->swap.kind == SwapKind::AttributeSwap);
      CHECK(swapped.attributes[0].lemma == sg.attributes[1].lemma);
    }

  auto again = make_batches(dataset, 8, 0, 3, SamplerMode::Semantic);
  REQUIRE(again.size() == semantic.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(again[i].sample_ids == semantic[i].sample_ids);
    for (std::size_t k = 0; k < again[i].negatives.size(); ++k)
      CHECK(again[i].negatives[k]->negative_caption ==
            semantic[i].negatives[k]->negative_caption);
  }

  auto other_epoch = make_batches(dataset, 8, 1, 3, SamplerMode::Semantic);
  bool same_order = true;
  for (std::size_t i = 0; i < other_epoch.size() && same_order; ++i)
    if (other_epoch[i].sample_ids != semantic[i].sample_ids) same_order = false;
  CHECK(!same_order);

  auto random_mode = make_batches(dataset, 8, 0, 3, SamplerMode::Random);
  for (const auto& b : random_mode)
    for (const auto& n : b.negatives)
      if (n) CHECK(n->negative_caption != n->source_caption);
}

TEST_CASE("train_step: lr=0 leaves parameters bit-identical") {
  SyntheticGenConfig cfg = tiny_config();
  auto dataset = gen_synthetic(cfg);
  Lexicon lex = synthetic_lexicon(cfg);
  prepare_samples(dataset, lex);

  Model<float> model(tiny_model_config(cfg), Vocab::from_lexicon(lex));
  model.init_params(5);
  auto before = param_snapshot(model.params());

  OptimizerConfig oc;
  oc.lr = 0.0;
  Optimizer<float> opt(oc);
  auto batches = make_batches(dataset, 8, 0, 3, SamplerMode::Semantic);
  BatchInput in = batch_input<float>(dataset, batches.front(), lex);
  train_step(model, in, opt, LossConfig{});

  auto after = param_snapshot(model.params());
  CHECK(before == after);
}

TEST_CASE("train_step: identical seeds give identical loss trajectories") {
  SyntheticGenConfig cfg = tiny_config();
  auto dataset = gen_synthetic(cfg);
  Lexicon lex = synthetic_lexicon(cfg);
  prepare_samples(dataset, lex);

  auto run = [&]() {
    Model<float> model(tiny_model_config(cfg), Vocab::from_lexicon(lex));
    model.init_params(5);
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 8;
    tc.seed = 3;
    tc.mode = SamplerMode::Semantic;
    return train(model, dataset, lex, tc);
  };
  auto log1 = run();
  auto log2 = run();
  REQUIRE(log1.size() == log2.size());
  for (std::size_t i = 0; i < log1.size(); ++i) {
    CHECK(log1[i].final_loss == log2[i].final_loss);
    CHECK(log1[i].hinge == log2[i].hinge);
    CHECK(log1[i].itcl == log2[i].itcl);
  }
}

TEST_CASE("train_step: loss decreases on a fixed small batch") {
  SyntheticGenConfig cfg = tiny_config();
  auto dataset = gen_synthetic(cfg);
  Lexicon lex = synthetic_lexicon(cfg);
  prepare_samples(dataset, lex);

  Model<float> model(tiny_model_config(cfg), Vocab::from_lexicon(lex));
  model.init_params(5);
  Optimizer<float> opt(OptimizerConfig{});
  auto batches = make_batches(dataset, 12, 0, 3, SamplerMode::Semantic);
  BatchInput in = batch_input<float>(dataset, batches.front(), lex);

  double first = 0.0, last = 0.0;
  for (int step = 0; step < 50; ++step) {
    StepMetrics m = train_step(model, in, opt, LossConfig{});
    if (step == 0) first = m.final_loss;
    last = m.final_loss;
  }
  CHECK(last < first);
  CHECK(last < 0.5 * first);
}

TEST_CASE("mode none trains with the contrastive term only") {
  SyntheticGenConfig cfg = tiny_config();
  auto dataset = gen_synthetic(cfg);
  Lexicon lex = synthetic_lexicon(cfg);
  prepare_samples(dataset, lex);

  Model<float> model(tiny_model_config(cfg), Vocab::from_lexicon(lex));
  model.init_params(5);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 8;
  tc.mode = SamplerMode::None;
  auto log = train(model, dataset, lex, tc);
  for (const auto& e : log) {
    CHECK(e.hinge == 0.0);
    CHECK(e.final_loss == e.itcl);
  }
}

TEST_CASE("train: zero epochs, metrics bookkeeping, resume consistency") {
  SyntheticGenConfig cfg = tiny_config();
  auto dataset = gen_synthetic(cfg);
  Lexicon lex = synthetic_lexicon(cfg);
  prepare_samples(dataset, lex);

  // zero epochs: parameters unchanged, empty log
  Model<float> model(tiny_model_config(cfg), Vocab::from_lexicon(lex));
  model.init_params(5);
  auto before = param_snapshot(model.params());
  TrainConfig t0;
  t0.epochs = 0;
  auto empty_log = train(model, dataset, lex, t0);
  CHECK(empty_log.empty());
  CHECK(param_snapshot(model.params()) == before);

  // metrics line count = steps per epoch x epochs
  TrainConfig t2;
  t2.epochs = 2;
  t2.batch_size = 8;
  t2.seed = 3;
  Model<float> m2(tiny_model_config(cfg), Vocab::from_lexicon(lex));
  m2.init_params(5);
  auto log = train(m2, dataset, lex, t2);
  const std::size_t steps_per_epoch = (dataset.size() + 7) / 8;
  CHECK(log.size() == 2 * steps_per_epoch);

  // resume: epoch-1 checkpoint reproduces the uninterrupted epoch-2 start
  Model<float> m_one(tiny_model_config(cfg), Vocab::from_lexicon(lex));
  m_one.init_params(5);
  TrainConfig t1 = t2;
  t1.epochs = 1;
  train(m_one, dataset, lex, t1);

  TrainConfig tr = t2;
  tr.start_epoch = 1;
  auto resumed = train(m_one, dataset, lex, tr);
  CHECK(resumed.front().final_loss ==
        doctest::Approx(log[steps_per_epoch].final_loss).epsilon(1e-12));
}

TEST_CASE("poisoned parameters raise NonFiniteLoss with the step index") {
  SyntheticGenConfig cfg = tiny_config();
  auto dataset = gen_synthetic(cfg);
  Lexicon lex = synthetic_lexicon(cfg);
  prepare_samples(dataset, lex);

  Model<float> model(tiny_model_config(cfg), Vocab::from_lexicon(lex));
  model.init_params(5);
  model.params().get("text.out.w").value[0] =
      std::numeric_limits<float>::quiet_NaN();
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 8;
  CHECK_THROWS_AS(train(model, dataset, lex, tc), NonFiniteLoss);
  try {
    train(model, dataset, lex, tc);
  } catch (const NonFiniteLoss& e) {
    CHECK(std::string(e.what()).find("step 0") != std::string::npos);
  }
}

TEST_CASE("metrics JSONL writer emits one line per step") {
  std::vector<StepLogEntry> log = {{0, 1.5, 0.2, 1.3}, {1, 1.2, 0.1, 1.1}};
  std::string path = "metrics_test.jsonl";
  write_metrics_jsonl(path, log);
  std::ifstream in(path);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    CHECK(line.find("\"step\"") != std::string::npos);
    CHECK(line.find("\"final\"") != std::string::npos);
    CHECK(line.find("\"hinge\"") != std::string::npos);
    CHECK(line.find("\"itcl\"") != std::string::npos);
  }
  CHECK(lines == 2);
  std::remove(path.c_str());
}
