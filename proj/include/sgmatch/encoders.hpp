#pragma once

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sgmatch/ops.hpp"
#include "sgmatch/tensor.hpp"
#include "sgmatch/textgraph.hpp"

namespace sgmatch {

// Word -> row map with a reserved unknown entry at row 0.
class Vocab {
 public:
  static constexpr const char* kUnk = "<unk>";

  Vocab() { add_word(kUnk); }

  static Vocab from_lexicon(const Lexicon& lexicon) {
    Vocab v;
    for (const auto& [word, tag] : lexicon.entries()) v.add_word(word);
    return v;
  }

  static Vocab from_words(const std::vector<std::string>& words) {
    Vocab v;
    for (const auto& w : words) v.add_word(w);
    return v;
  }

  void add_word(const std::string& word) {
    std::string key = to_lower(word);
    if (index_.count(key)) return;
    index_[key] = words_.size();
    words_.push_back(key);
  }

  std::size_t row(const std::string& word) const {
    auto it = index_.find(to_lower(word));
    return it == index_.end() ? 0 : it->second;
  }

  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, std::size_t> index_;
};

// Embedding lookup over the vocabulary. Multi-word phrases ("sit in") embed
// as the arithmetic mean of their word vectors.
template <typename T>
struct EmbeddingTable {
  const Vocab* vocab = nullptr;
  Param<T>* weights = nullptr;  // [V x d]

  std::size_t dim() const { return weights->value.dim(1); }

  std::vector<std::size_t> phrase_rows(const std::string& phrase) const {
    std::vector<std::size_t> rows;
    std::string word;
    for (char c : phrase) {
      if (c == ' ') {
        if (!word.empty()) rows.push_back(vocab->row(word));
        word.clear();
      } else {
        word.push_back(c);
      }
    }
    if (!word.empty()) rows.push_back(vocab->row(word));
    if (rows.empty()) rows.push_back(vocab->row(phrase));
    return rows;
  }

  Tensor<T> embed(const std::string& phrase) const {
    auto rows = phrase_rows(phrase);
    const std::size_t d = dim();
    Tensor<T> out({d});
    for (std::size_t r : rows)
      for (std::size_t c = 0; c < d; ++c) out[c] += weights->value.at(r, c);
    const T inv = static_cast<T>(1.0 / static_cast<double>(rows.size()));
    for (std::size_t c = 0; c < d; ++c) out[c] *= inv;
    return out;
  }

  void embed_backward(const std::string& phrase, const Tensor<T>& dvec) {
    auto rows = phrase_rows(phrase);
    const std::size_t d = dim();
    const T inv = static_cast<T>(1.0 / static_cast<double>(rows.size()));
    for (std::size_t r : rows)
      for (std::size_t c = 0; c < d; ++c)
        weights->grad.at(r, c) += dvec[c] * inv;
  }
};

// word_embed: row lookup with UNK fallback and the phrase-mean rule.
template <typename T>
Tensor<T> word_embed(const std::string& word, const EmbeddingTable<T>& table) {
  return table.embed(word);
}

enum class TripleFusion { Sub, Add, Concat };

inline std::string to_string(TripleFusion f) {
  switch (f) {
    case TripleFusion::Sub: return "sub";
    case TripleFusion::Add: return "add";
    case TripleFusion::Concat: return "concat";
  }
  return "sub";
}

inline TripleFusion triple_fusion_from_string(const std::string& s) {
  if (s == "sub") return TripleFusion::Sub;
  if (s == "add") return TripleFusion::Add;
  if (s == "concat") return TripleFusion::Concat;
  throw ConfigError("unknown triple fusion mode: " + s +
                    " (expected sub|add|concat)");
}

// Order-sensitive triple embedding: head + relation - tail. The add and
// concat variants exist for the embedding ablation.
template <typename T>
Tensor<T> encode_triple(const std::string& head, const std::string& relation,
                        const std::string& tail,
                        const EmbeddingTable<T>& table) {
  Tensor<T> h = table.embed(head);
  Tensor<T> r = table.embed(relation);
  Tensor<T> t = table.embed(tail);
  Tensor<T> out({table.dim()});
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = h[c] + r[c] - t[c];
  return out;
}

template <typename T>
struct TripleEncoder {
  EmbeddingTable<T>* table = nullptr;
  TripleFusion mode = TripleFusion::Sub;

  std::size_t out_dim() const {
    return mode == TripleFusion::Concat ? 3 * table->dim() : table->dim();
  }

  Tensor<T> encode(const Triple& t) const {
    const std::size_t d = table->dim();
    Tensor<T> h = table->embed(t.head);
    Tensor<T> r = table->embed(t.relation);
    Tensor<T> tl = table->embed(t.tail);
    if (mode == TripleFusion::Concat) {
      Tensor<T> out({3 * d});
      for (std::size_t c = 0; c < d; ++c) {
        out[c] = h[c];
        out[d + c] = r[c];
        out[2 * d + c] = tl[c];
      }
      return out;
    }
    const T sign = mode == TripleFusion::Sub ? T(-1) : T(1);
    Tensor<T> out({d});
    for (std::size_t c = 0; c < d; ++c) out[c] = h[c] + r[c] + sign * tl[c];
    return out;
  }

  void backward(const Triple& t, const Tensor<T>& dvec) const {
    const std::size_t d = table->dim();
    if (mode == TripleFusion::Concat) {
      Tensor<T> dh({d}), dr({d}), dt({d});
      for (std::size_t c = 0; c < d; ++c) {
        dh[c] = dvec[c];
        dr[c] = dvec[d + c];
        dt[c] = dvec[2 * d + c];
      }
      table->embed_backward(t.head, dh);
      table->embed_backward(t.relation, dr);
      table->embed_backward(t.tail, dt);
      return;
    }
    table->embed_backward(t.head, dvec);
    table->embed_backward(t.relation, dvec);
    if (mode == TripleFusion::Sub) {
      Tensor<T> neg({d});
      for (std::size_t c = 0; c < d; ++c) neg[c] = -dvec[c];
      table->embed_backward(t.tail, neg);
    } else {
      table->embed_backward(t.tail, dvec);
    }
  }
};

template <typename T>
struct KnowledgeCache {
  std::vector<Triple> used;  // after truncation to kmax
  Tensor<T> raw;             // [K x d_in] triple embeddings
  Tensor<T> stack;           // [K x d] encoder input
  std::vector<TransformerLayerCache<T>> layers;
  Tensor<T> top;             // [K x d] after the last layer
  Tensor<T> pooled;          // [1 x d]
  bool empty = true;
};

// Transformer over the triple set. No positional encodings: triples form a
// set, and mean pooling keeps the output permutation-invariant.
template <typename T>
struct KnowledgeEncoder {
  TripleEncoder<T> triples;
  std::optional<Linear<T>> in_proj;  // present when triple dim != model dim
  std::vector<TransformerLayer<T>> layers;
  Linear<T> out_proj;  // d -> d_joint
  std::size_t kmax = 8;

  std::size_t joint_dim() const { return out_proj.w->value.dim(0); }

  Tensor<T> forward(const std::vector<Triple>& input,
                    KnowledgeCache<T>* cache) const {
    KnowledgeCache<T> local;
    KnowledgeCache<T>& c = cache ? *cache : local;
    if (input.empty()) {
      c.empty = true;
      return Tensor<T>({joint_dim()});
    }
    c.empty = false;
    c.used = input;
    if (c.used.size() > kmax) {
      std::cerr << "warning: truncating triple list from " << c.used.size()
                << " to " << kmax << "\n";
      c.used.resize(kmax);
    }
    const std::size_t k = c.used.size();
    const std::size_t d_in = triples.out_dim();
    c.raw = Tensor<T>({k, d_in});
    for (std::size_t i = 0; i < k; ++i) {
      Tensor<T> e = triples.encode(c.used[i]);
      for (std::size_t j = 0; j < d_in; ++j) c.raw.at(i, j) = e[j];
    }
    c.stack = in_proj ? in_proj->forward(c.raw) : c.raw;
    Tensor<T> x = c.stack;
    c.layers.resize(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l)
      x = layers[l].forward(x, &c.layers[l]);
    c.top = std::move(x);
    const std::size_t d = c.top.cols();
    c.pooled = Tensor<T>({1, d});
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i)
        acc += static_cast<double>(c.top.at(i, j));
      c.pooled.at(0, j) = static_cast<T>(acc / static_cast<double>(k));
    }
    return out_proj.forward(c.pooled).reshaped({joint_dim()});
  }

  void backward(const KnowledgeCache<T>& c, const Tensor<T>& d_out) const {
    if (c.empty) return;
    const std::size_t k = c.top.rows(), d = c.top.cols();
    Tensor<T> dpooled({1, d});
    out_proj.backward(c.pooled, d_out.reshaped({1, joint_dim()}), dpooled);
    Tensor<T> dtop({k, d});
    const T inv_k = static_cast<T>(1.0 / static_cast<double>(k));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < d; ++j)
        dtop.at(i, j) = dpooled.at(0, j) * inv_k;
    Tensor<T> dx = std::move(dtop);
    for (std::size_t l = layers.size(); l-- > 0;) {
      Tensor<T> dprev(c.layers[l].x.shape());
      layers[l].backward(c.layers[l], dx, dprev);
      dx = std::move(dprev);
    }
    Tensor<T> draw({k, triples.out_dim()});
    if (in_proj)
      in_proj->backward(c.raw, dx, draw);
    else
      draw = dx;
    const std::size_t d_in = triples.out_dim();
    for (std::size_t i = 0; i < k; ++i) {
      Tensor<T> row({d_in});
      for (std::size_t j = 0; j < d_in; ++j) row[j] = draw.at(i, j);
      triples.backward(c.used[i], row);
    }
  }
};

template <typename T>
struct TextCache {
  std::vector<std::string> words;  // lowercased tokens after truncation
  Tensor<T> x;                     // [n x d] token + positional embeddings
  std::vector<TransformerLayerCache<T>> layers;
  Tensor<T> top;
  Tensor<T> pooled;  // [1 x d]
};

// Small stand-in for a pretrained sentence encoder: learned token and
// position embeddings, a short transformer stack, mean pooling, projection.
template <typename T>
struct TextEncoder {
  const Vocab* vocab = nullptr;
  Param<T>* tok_emb = nullptr;  // [V x d]
  Param<T>* pos_emb = nullptr;  // [max_tokens x d]
  std::vector<TransformerLayer<T>> layers;
  Linear<T> out_proj;  // d -> d_joint
  std::size_t max_tokens = 32;

  std::size_t joint_dim() const { return out_proj.w->value.dim(0); }

  Tensor<T> forward(const std::string& caption, TextCache<T>* cache) const {
    TextCache<T> local;
    TextCache<T>& c = cache ? *cache : local;
    c.words.clear();
    for (const Token& t : tokenize(caption)) c.words.push_back(to_lower(t.text));
    if (c.words.size() > max_tokens) {
      std::cerr << "warning: truncating caption from " << c.words.size()
                << " to " << max_tokens << " tokens\n";
      c.words.resize(max_tokens);
    }
    const std::size_t n = c.words.size();
    const std::size_t d = tok_emb->value.dim(1);
    c.x = Tensor<T>({n, d});
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t row = vocab->row(c.words[i]);
      for (std::size_t j = 0; j < d; ++j)
        c.x.at(i, j) = tok_emb->value.at(row, j) + pos_emb->value.at(i, j);
    }
    Tensor<T> x = c.x;
    c.layers.resize(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l)
      x = layers[l].forward(x, &c.layers[l]);
    c.top = std::move(x);
    c.pooled = Tensor<T>({1, d});
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        acc += static_cast<double>(c.top.at(i, j));
      c.pooled.at(0, j) = static_cast<T>(acc / static_cast<double>(n));
    }
    return out_proj.forward(c.pooled).reshaped({joint_dim()});
  }

  void backward(const TextCache<T>& c, const Tensor<T>& d_out) const {
    const std::size_t n = c.top.rows(), d = c.top.cols();
    Tensor<T> dpooled({1, d});
    out_proj.backward(c.pooled, d_out.reshaped({1, joint_dim()}), dpooled);
    Tensor<T> dtop({n, d});
    const T inv_n = static_cast<T>(1.0 / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j)
        dtop.at(i, j) = dpooled.at(0, j) * inv_n;
    Tensor<T> dx = std::move(dtop);
    for (std::size_t l = layers.size(); l-- > 0;) {
      Tensor<T> dprev(c.layers[l].x.shape());
      layers[l].backward(c.layers[l], dx, dprev);
      dx = std::move(dprev);
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t row = vocab->row(c.words[i]);
      for (std::size_t j = 0; j < d; ++j) {
        tok_emb->grad.at(row, j) += dx.at(i, j);
        pos_emb->grad.at(i, j) += dx.at(i, j);
      }
    }
  }
};

template <typename T>
struct ImageCache {
  Tensor<T> x;       // [1 x d_img]
  Tensor<T> h_pre;   // before GELU
  Tensor<T> h;       // after GELU
};

// Linear -> GELU -> Linear over precomputed image feature vectors.
template <typename T>
struct ImageEncoder {
  Linear<T> fc1, fc2;

  std::size_t input_dim() const { return fc1.w->value.dim(1); }
  std::size_t joint_dim() const { return fc2.w->value.dim(0); }

  Tensor<T> forward(const Tensor<T>& features, ImageCache<T>* cache) const {
    if (features.size() != input_dim())
      throw ShapeMismatch("image features length " +
                          std::to_string(features.size()) + ", expected " +
                          std::to_string(input_dim()));
    ImageCache<T> local;
    ImageCache<T>& c = cache ? *cache : local;
    c.x = features.reshaped({1, input_dim()});
    c.h_pre = fc1.forward(c.x);
    c.h = gelu(c.h_pre);
    return fc2.forward(c.h).reshaped({joint_dim()});
  }

  void backward(const ImageCache<T>& c, const Tensor<T>& d_out) const {
    Tensor<T> dh(c.h.shape());
    fc2.backward(c.h, d_out.reshaped({1, joint_dim()}), dh);
    Tensor<T> dh_pre(c.h_pre.shape());
    gelu_backward(c.h_pre, dh, dh_pre);
    Tensor<T> dx(c.x.shape());  // feature gradient unused
    fc1.backward(c.x, dh_pre, dx);
  }
};

template <typename T>
struct FuseCache {
  Tensor<T> y;
  double norm = 0.0;
};

// e_text = z + lambda * e_ke, L2-normalized to unit length. lambda = 0
// reduces to the normalized sentence embedding alone.
template <typename T>
Tensor<T> fuse(const Tensor<T>& z, const Tensor<T>& e_ke, double lambda,
               FuseCache<T>* cache = nullptr) {
  if (z.size() != e_ke.size())
    throw ShapeMismatch("fuse: " + z.shape_str() + " vs " + e_ke.shape_str());
  Tensor<T> sum(z.shape());
  for (std::size_t i = 0; i < z.size(); ++i)
    sum[i] = static_cast<T>(static_cast<double>(z[i]) +
                            lambda * static_cast<double>(e_ke[i]));
  double norm = 0.0;
  Tensor<T> y = l2_normalize(sum, &norm);
  if (cache) {
    cache->y = y;
    cache->norm = norm;
  }
  return y;
}

template <typename T>
void fuse_backward(const FuseCache<T>& cache, double lambda,
                   const Tensor<T>& dy, Tensor<T>& dz, Tensor<T>& dke) {
  Tensor<T> dsum(cache.y.shape());
  l2_normalize_backward(cache.y, cache.norm, dy, dsum);
  for (std::size_t i = 0; i < dsum.size(); ++i) {
    dz[i] += dsum[i];
    dke[i] += static_cast<T>(lambda * static_cast<double>(dsum[i]));
  }
}

}  // namespace sgmatch
