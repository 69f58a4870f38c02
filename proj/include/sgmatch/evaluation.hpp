#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "sgmatch/model.hpp"
#include "sgmatch/negsample.hpp"
#include "sgmatch/training.hpp"

namespace sgmatch {

struct EvalCase {
  std::vector<float> image_features;
  std::string aligned_caption;
  std::string unaligned_caption;
  SwapKind kind = SwapKind::RelationSwap;
};

struct EvalCases {
  std::vector<EvalCase> cases;
  std::size_t skipped = 0;  // samples with no swap candidate
};

struct EvalReport {
  double overall_accuracy = 0.0;
  double relation_accuracy = 0.0;
  double attribute_accuracy = 0.0;
  std::size_t relation_count = 0;
  std::size_t attribute_count = 0;
  std::size_t correct = 0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
  double mean_margin = 0.0;  // mean of sim(aligned) - sim(unaligned)
  std::vector<double> margins;
};

// One swapped-caption case per sample; the swap taxonomy names the kind.
inline EvalCases build_eval_cases(const std::vector<Sample>& dataset,
                                  SeededRng& rng) {
  EvalCases out;
  for (const Sample& s : dataset) {
    if (!s.parsed)
      throw ConfigError("build_eval_cases: sample " + s.id +
                        " lacks a cached scene graph");
    auto neg = try_sample_negative(s.caption, s.scene_graph, rng);
    if (!neg) {
      ++out.skipped;
      continue;
    }
    EvalCase c;
    c.image_features = s.image_features;
    c.aligned_caption = s.caption;
    c.unaligned_caption = neg->negative_caption;
    c.kind = neg->swap.kind;
    out.cases.push_back(std::move(c));
  }
  return out;
}

// A case counts as correct only when the aligned caption scores strictly
// higher; ties are failures so a degenerate encoder cannot sit at chance.
template <typename T>
EvalReport eval_swap_discrimination(const Model<T>& model,
                                    const EvalCases& cases,
                                    const Lexicon& lexicon) {
  EvalReport r;
  r.skipped = cases.skipped;
  double margin_sum = 0.0;
  for (const EvalCase& c : cases.cases) {
    Tensor<T> v = model.embed_image(c.image_features);
    auto embed = [&](const std::string& caption) {
      auto triples =
          scene_graph_to_triples(parse_scene_graph(caption, lexicon));
      return model.embed_fused_text(caption, triples);
    };
    Tensor<T> e_aligned = embed(c.aligned_caption);
    Tensor<T> e_unaligned = embed(c.unaligned_caption);
    double s_aligned = 0.0, s_unaligned = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      s_aligned += static_cast<double>(v[i]) * static_cast<double>(e_aligned[i]);
      s_unaligned +=
          static_cast<double>(v[i]) * static_cast<double>(e_unaligned[i]);
    }
    const bool correct = s_aligned > s_unaligned;
    const double margin = s_aligned - s_unaligned;
    margin_sum += margin;
    r.margins.push_back(margin);
    ++r.evaluated;
    if (correct) ++r.correct;
    if (c.kind == SwapKind::RelationSwap) {
      ++r.relation_count;
      if (correct) r.relation_accuracy += 1.0;
    } else {
      ++r.attribute_count;
      if (correct) r.attribute_accuracy += 1.0;
    }
  }
  if (r.evaluated > 0) {
    r.overall_accuracy =
        static_cast<double>(r.correct) / static_cast<double>(r.evaluated);
    r.mean_margin = margin_sum / static_cast<double>(r.evaluated);
  }
  if (r.relation_count > 0)
    r.relation_accuracy /= static_cast<double>(r.relation_count);
  if (r.attribute_count > 0)
    r.attribute_accuracy /= static_cast<double>(r.attribute_count);
  return r;
}

// recall[K] = fraction of queries whose true partner ranks in the top K.
// Ties break toward the lower index, so identical scores cannot inflate it.
struct RetrievalReport {
  std::map<std::size_t, double> image_to_text;  // rank texts per image
  std::map<std::size_t, double> text_to_image;  // rank images per caption
};

// Rank of the true partner under strict-score ordering with index
// tie-break: 1 + #{better} + #{equal with lower index}.
inline std::size_t rank_of_true(const std::vector<double>& scores,
                                std::size_t true_idx) {
  std::size_t rank = 1;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (j == true_idx) continue;
    if (scores[j] > scores[true_idx] ||
        (scores[j] == scores[true_idx] && j < true_idx))
      ++rank;
  }
  return rank;
}

template <typename T>
RetrievalReport eval_retrieval(const Model<T>& model,
                               const std::vector<Sample>& dataset,
                               const std::vector<std::size_t>& k_values) {
  const std::size_t n = dataset.size();
  if (n == 0) throw ConfigError("eval_retrieval: empty dataset");
  std::vector<Tensor<T>> v(n), e(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Sample& s = dataset[i];
    v[i] = model.embed_image(s.image_features);
    e[i] = model.embed_fused_text(s.caption, s.triples);
  }
  Tensor<double> s({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < v[i].size(); ++c)
        acc += static_cast<double>(v[i][c]) * static_cast<double>(e[j][c]);
      s.at(i, j) = acc;
    }

  RetrievalReport out;
  std::vector<std::size_t> i2t_rank(n), t2i_rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(n), col(n);
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = s.at(i, j);
      col[j] = s.at(j, i);
    }
    i2t_rank[i] = rank_of_true(row, i);
    t2i_rank[i] = rank_of_true(col, i);
  }
  for (std::size_t k : k_values) {
    std::size_t hit_i2t = 0, hit_t2i = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i2t_rank[i] <= k) ++hit_i2t;
      if (t2i_rank[i] <= k) ++hit_t2i;
    }
    out.image_to_text[k] = static_cast<double>(hit_i2t) / static_cast<double>(n);
    out.text_to_image[k] = static_cast<double>(hit_t2i) / static_cast<double>(n);
  }
  return out;
}

}  // namespace sgmatch
