#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sgmatch/evaluation.hpp"
#include "sgmatch/model.hpp"
#include "sgmatch/training.hpp"

using namespace sgmatch;

namespace {

SyntheticGenConfig eval_config() {
  SyntheticGenConfig cfg;
  cfg.nouns = {"dress", "book", "cow", "hay"};
  cfg.adjectives = {"red", "blue", "white"};
  cfg.relations = {"holds", "sits on"};
  cfg.n_attr = 10;
  cfg.n_rel = 10;
  cfg.noise_std = 0.05;
  cfg.seed = 31;
  return cfg;
}

ModelConfig eval_model_config(const SyntheticGenConfig& data) {
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
  return mc;
}

}  // namespace

TEST_CASE("build_eval_cases: kinds from the swap taxonomy, skip counting") {
  SyntheticGenConfig cfg = eval_config();
  auto dataset = gen_synthetic(cfg);
  Lexicon lex = synthetic_lexicon(cfg);
  prepare_samples(dataset, lex);

  // a caption with no swap candidate gets skipped and counted
  Sample bare;
  bare.id = "bare";
  bare.caption = "a dog";
  Lexicon lex2 = lex;
  lex2.add("dog", PosTag::Noun);
  bare.scene_graph = parse_scene_graph(bare.caption, lex2);
  bare.triples = scene_graph_to_triples(bare.scene_graph);
  bare.parsed = true;
  bare.image_features.assign(cfg.feature_dim(), 0.0f);
  dataset.push_back(bare);

  SeededRng rng(7);
  EvalCases cases = build_eval_cases(dataset, rng);
  CHECK(cases.skipped == 1);
  CHECK(cases.cases.size() == dataset.size() - 1);
  for (const EvalCase& c : cases.cases) {
    CHECK(c.aligned_caption != c.unaligned_caption);
    CHECK(canonical_word_multiset(c.aligned_caption) ==
          canonical_word_multiset(c.unaligned_caption));
  }
  // attr-template samples yield attribute swaps, rel templates may yield both
  std::size_t attr_kind = 0;
  for (const EvalCase& c : cases.cases)
    if (c.kind == SwapKind::AttributeSwap) ++attr_kind;
  CHECK(attr_kind >= 10);  // every T_attr sample has only the attribute swap
}

TEST_CASE("swap discrimination: bag-of-words model ties to zero accuracy") {
  SyntheticGenConfig cfg = eval_config();
  auto dataset = gen_synthetic(cfg);
  Lexicon lex = synthetic_lexicon(cfg);
  prepare_samples(dataset, lex);

  ModelConfig mc = eval_model_config(cfg);
  mc.lambda = 0.0;  // knowledge path off
  Model<float> model(mc, Vocab::from_lexicon(lex));
  model.init_params(11, 0.2);
  // zero positional encodings make the text encoder order-blind, so the
  // swapped caption embeds identically and every case ties
  model.params().get("text.pos_emb").value.fill(0.0f);

  SeededRng rng(7);
  EvalCases cases = build_eval_cases(dataset, rng);
  EvalReport report = eval_swap_discrimination(model, cases, lex);
  CHECK(report.evaluated == cases.cases.size());
  CHECK(report.overall_accuracy == doctest::Approx(0.0));
  CHECK(report.correct == 0);
  for (double m : report.margins) CHECK(std::fabs(m) < 1e-6);
}

TEST_CASE("swap discrimination: counts split by kind, margins recorded") {
  SyntheticGenConfig cfg = eval_config();
  auto dataset = gen_synthetic(cfg);
  Lexicon lex = synthetic_lexicon(cfg);
  prepare_samples(dataset, lex);

  Model<float> model(eval_model_config(cfg), Vocab::from_lexicon(lex));
  model.init_params(11, 0.2);
  SeededRng rng(7);
  EvalCases cases = build_eval_cases(dataset, rng);
  EvalReport report = eval_swap_discrimination(model, cases, lex);
  CHECK(report.relation_count + report.attribute_count == report.evaluated);
  CHECK(report.margins.size() == report.evaluated);
  CHECK(report.overall_accuracy >= 0.0);
  CHECK(report.overall_accuracy <= 1.0);

  // pure evaluation: a second run reports identical numbers
  EvalReport again = eval_swap_discrimination(model, cases, lex);
  CHECK(again.overall_accuracy == report.overall_accuracy);
  CHECK(again.mean_margin == report.mean_margin);
}

TEST_CASE("rank_of_true: strict ordering with index tie-break") {
  CHECK(rank_of_true({0.9, 0.5, 0.1}, 0) == 1);
  CHECK(rank_of_true({0.9, 0.5, 0.1}, 1) == 2);
  CHECK(rank_of_true({0.5, 0.5, 0.5}, 0) == 1);
  CHECK(rank_of_true({0.5, 0.5, 0.5}, 1) == 2);
  CHECK(rank_of_true({0.5, 0.5, 0.5}, 2) == 3);
  // invariant under positive rescaling
  CHECK(rank_of_true({0.9, 0.45, 0.2}, 1) ==
        rank_of_true({9.0, 4.5, 2.0}, 1));
}

TEST_CASE("retrieval: exhaustive cutoff, degenerate ties, single pair") {
  SyntheticGenConfig cfg = eval_config();
  auto dataset = gen_synthetic(cfg);
  Lexicon lex = synthetic_lexicon(cfg);
  prepare_samples(dataset, lex);

  Model<float> model(eval_model_config(cfg), Vocab::from_lexicon(lex));
  model.init_params(11, 0.2);

  RetrievalReport full =
      eval_retrieval(model, dataset, {1, 5, dataset.size()});
  CHECK(full.image_to_text.at(dataset.size()) == doctest::Approx(1.0));
  CHECK(full.text_to_image.at(dataset.size()) == doctest::Approx(1.0));
  // monotone in K
  CHECK(full.image_to_text.at(1) <= full.image_to_text.at(5));
  CHECK(full.text_to_image.at(1) <= full.text_to_image.at(5));

  // identical embeddings: only index 0 ranks first
  std::vector<Sample> clones(dataset.begin(), dataset.begin() + 5);
  for (auto& s : clones) {
    s.caption = clones[0].caption;
    s.image_features = clones[0].image_features;
    s.scene_graph = clones[0].scene_graph;
    s.triples = clones[0].triples;
  }
  RetrievalReport tied = eval_retrieval(model, clones, {1});
  CHECK(tied.image_to_text.at(1) == doctest::Approx(1.0 / 5.0));
  CHECK(tied.text_to_image.at(1) == doctest::Approx(1.0 / 5.0));

  std::vector<Sample> one(dataset.begin(), dataset.begin() + 1);
  RetrievalReport single = eval_retrieval(model, one, {1});
  CHECK(single.image_to_text.at(1) == doctest::Approx(1.0));
  CHECK(single.text_to_image.at(1) == doctest::Approx(1.0));
}

TEST_CASE("property: recall is monotone nondecreasing in K") {
  SyntheticGenConfig cfg = eval_config();
  cfg.n_attr = 15;
  cfg.n_rel = 15;
  auto dataset = gen_synthetic(cfg);
  Lexicon lex = synthetic_lexicon(cfg);
  prepare_samples(dataset, lex);
  Model<float> model(eval_model_config(cfg), Vocab::from_lexicon(lex));
  model.init_params(13, 0.2);

  std::vector<std::size_t> ks;
  for (std::size_t k = 1; k <= dataset.size(); ++k) ks.push_back(k);
  RetrievalReport r = eval_retrieval(model, dataset, ks);
  for (std::size_t k = 2; k <= dataset.size(); ++k) {
    CHECK(r.image_to_text.at(k) >= r.image_to_text.at(k - 1));
    CHECK(r.text_to_image.at(k) >= r.text_to_image.at(k - 1));
  }
}
