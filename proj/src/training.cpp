#include "sgmatch/training.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

namespace sgmatch {

void SyntheticGenConfig::validate() const {
  if (nouns.empty() || adjectives.empty() || relations.empty())
    throw ConfigError("synthetic config: vocabularies must be non-empty");
  // POS classes must stay disjoint so the lexicon is unambiguous.
  std::set<std::string> seen;
  auto claim = [&seen](const std::string& word, const char* klass) {
    if (!seen.insert(to_lower(word)).second)
      throw ConfigError("synthetic config: word '" + word +
                        "' appears in more than one class (" + klass + ")");
  };
  for (const auto& n : nouns) claim(n, "noun");
  for (const auto& a : adjectives) claim(a, "adjective");
  std::set<std::string> rel_first, rel_rest;
  for (const auto& r : relations) {
    std::vector<Token> words = tokenize(r);
    for (std::size_t i = 0; i < words.size(); ++i) {
      std::string w = to_lower(words[i].text);
      if (seen.count(w) && !rel_first.count(w) && !rel_rest.count(w))
        throw ConfigError("synthetic config: relation word '" + w +
                          "' clashes with another class");
      (i == 0 ? rel_first : rel_rest).insert(w);
    }
  }
  for (const auto& w : rel_first)
    if (rel_rest.count(w))
      throw ConfigError("synthetic config: relation word '" + w +
                        "' used both relation-initially and after the verb");
  for (const char* reserved : {"the", "and", "a", "an", "is", "of"})
    if (seen.count(reserved) || rel_first.count(reserved) ||
        rel_rest.count(reserved))
      throw ConfigError(std::string("synthetic config: '") + reserved +
                        "' is reserved for the closed-class lexicon");
}

Lexicon synthetic_lexicon(const SyntheticGenConfig& cfg) {
  cfg.validate();
  Lexicon lex;
  for (const auto& n : cfg.nouns) lex.add(n, PosTag::Noun);
  for (const auto& a : cfg.adjectives) lex.add(a, PosTag::Adj);
  for (const auto& r : cfg.relations) {
    std::vector<Token> words = tokenize(r);
    for (std::size_t i = 0; i < words.size(); ++i)
      lex.add(words[i].text, i == 0 ? PosTag::Verb : PosTag::Adp);
  }
  lex.add("the", PosTag::Det);
  lex.add("a", PosTag::Det);
  lex.add("an", PosTag::Det);
  lex.add("and", PosTag::Conj);
  lex.add("is", PosTag::Verb);  // carries the attribute-triple relation
  lex.add("of", PosTag::Adp);
  return lex;
}

namespace {

struct PairPick {
  std::size_t a1, n1, a2, n2;
};

PairPick pick_pairs(const SyntheticGenConfig& cfg, SeededRng& rng) {
  PairPick p;
  p.a1 = rng.uniform_index(cfg.adjectives.size());
  p.a2 = rng.uniform_index(cfg.adjectives.size() - 1);
  if (p.a2 >= p.a1) ++p.a2;
  p.n1 = rng.uniform_index(cfg.nouns.size());
  p.n2 = rng.uniform_index(cfg.nouns.size() - 1);
  if (p.n2 >= p.n1) ++p.n2;
  return p;
}

std::vector<float> make_features(const SyntheticGenConfig& cfg,
                                 const std::vector<std::size_t>& attr_bits,
                                 const std::vector<std::size_t>& rel_bits,
                                 SeededRng& rng) {
  std::vector<float> f(cfg.feature_dim(), 0.0f);
  for (std::size_t b : attr_bits) f[b] = 1.0f;
  for (std::size_t b : rel_bits) f[b] = 1.0f;
  if (cfg.noise_std > 0.0)
    for (auto& x : f)
      x += static_cast<float>(rng.normal() * cfg.noise_std);
  return f;
}

}  // namespace

std::vector<Sample> gen_synthetic(const SyntheticGenConfig& cfg) {
  cfg.validate();
  SeededRng rng(cfg.seed);
  std::vector<Sample> out;
  out.reserve(cfg.n_attr + cfg.n_rel);

  for (std::size_t k = 0; k < cfg.n_attr; ++k) {
    PairPick p = pick_pairs(cfg, rng);
    Sample s;
    s.id = "attr-" + std::to_string(k);
    s.caption = "the " + cfg.adjectives[p.a1] + " " + cfg.nouns[p.n1] +
                " and the " + cfg.adjectives[p.a2] + " " + cfg.nouns[p.n2];
    s.image_features = make_features(
        cfg, {cfg.attr_bit(p.a1, p.n1), cfg.attr_bit(p.a2, p.n2)}, {}, rng);
    out.push_back(std::move(s));
  }
  for (std::size_t k = 0; k < cfg.n_rel; ++k) {
    PairPick p = pick_pairs(cfg, rng);
    std::size_t r = rng.uniform_index(cfg.relations.size());
    Sample s;
    s.id = "rel-" + std::to_string(k);
    s.caption = "the " + cfg.adjectives[p.a1] + " " + cfg.nouns[p.n1] + " " +
                cfg.relations[r] + " the " + cfg.adjectives[p.a2] + " " +
                cfg.nouns[p.n2];
    s.image_features = make_features(
        cfg, {cfg.attr_bit(p.a1, p.n1), cfg.attr_bit(p.a2, p.n2)},
        {cfg.rel_bit(p.n1, r, p.n2)}, rng);
    out.push_back(std::move(s));
  }
  return out;
}

SamplerMode sampler_mode_from_string(const std::string& s) {
  if (s == "semantic") return SamplerMode::Semantic;
  if (s == "random") return SamplerMode::Random;
  if (s == "none") return SamplerMode::None;
  throw ConfigError("unknown sampler mode: " + s +
                    " (expected semantic|random|none)");
}

std::string to_string(SamplerMode mode) {
  switch (mode) {
    case SamplerMode::Semantic: return "semantic";
    case SamplerMode::Random: return "random";
    case SamplerMode::None: return "none";
  }
  return "none";
}

std::vector<Batch> make_batches(const std::vector<Sample>& dataset,
                                std::size_t batch_size, std::size_t epoch,
                                uint64_t seed, SamplerMode mode) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  SeededRng rng = SeededRng(seed).derive(epoch);

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_index(i)]);

  std::vector<Batch> batches;
  std::size_t step = 0;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    Batch b;
    b.epoch = epoch;
    b.first_step = step++;
    const std::size_t end = std::min(start + batch_size, order.size());
    for (std::size_t k = start; k < end; ++k) {
      const Sample& s = dataset[order[k]];
      b.sample_ids.push_back(order[k]);
      switch (mode) {
        case SamplerMode::Semantic:
          if (!s.parsed)
            throw ConfigError("sample " + s.id +
                              " has no cached scene graph; call "
                              "prepare_samples first");
          b.negatives.push_back(
              try_sample_negative(s.caption, s.scene_graph, rng));
          break;
        case SamplerMode::Random:
          b.negatives.push_back(random_word_swap(s.caption, rng));
          break;
        case SamplerMode::None:
          b.negatives.emplace_back(std::nullopt);
          break;
      }
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

void write_metrics_jsonl(const std::string& path,
                         const std::vector<StepLogEntry>& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write metrics log: " + path);
  for (const auto& e : log) {
    nlohmann::json j;
    j["step"] = e.step;
    j["final"] = e.final_loss;
    j["hinge"] = e.hinge;
    j["itcl"] = e.itcl;
    out << j.dump() << "\n";
  }
}

}  // namespace sgmatch
