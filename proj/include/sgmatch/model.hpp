#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sgmatch/dataset.hpp"
#include "sgmatch/encoders.hpp"
#include "sgmatch/objectives.hpp"
#include "sgmatch/rng.hpp"

namespace sgmatch {

struct ModelConfig {
  std::size_t dim = 64;         // knowledge transformer width
  std::size_t word_dim = 64;    // knowledge word-embedding width
  std::size_t joint_dim = 64;   // shared image/text/knowledge space
  std::size_t heads = 4;
  std::size_t text_layers = 2;
  std::size_t kee_layers = 6;
  std::size_t kmax = 8;         // triples kept per caption
  std::size_t max_tokens = 32;
  double lambda = 0.2;          // knowledge fusion weight
  TripleFusion triple_fusion = TripleFusion::Sub;
  std::size_t image_hidden = 128;
  std::size_t image_dim = 0;    // set from the dataset
  uint64_t seed = 1;

  void validate() const {
    if (kee_layers < 1) throw ConfigError("model.kee_layers must be >= 1");
    if (dim % heads != 0)
      throw ConfigError("model.dim must be divisible by model.heads");
    if (lambda < 0) throw ConfigError("model.lambda must be >= 0");
    if (kmax < 1) throw ConfigError("model.kmax must be >= 1");
    if (image_dim == 0) throw ConfigError("model.image_dim is unset");
  }
};

// All trainable state plus the encoder wiring. Non-movable: the encoders
// hold stable pointers into the parameter store and the vocabulary.
template <typename T>
class Model {
 public:
  Model(ModelConfig cfg, Vocab vocab)
      : cfg_(std::move(cfg)), vocab_(std::move(vocab)) {
    cfg_.validate();
    build();
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  // Weight matrices and embeddings draw from N(0, std^2) in sorted
  // parameter-name order; biases start at zero and layer-norm gains at one.
  // Training runs use the 0.02 default; gradient probes pass a larger std so
  // the embedding norms sit far from the normalization singularity.
  void init_params(uint64_t seed, double init_std = 0.02) {
    SeededRng rng(seed);
    for (auto& [name, p] : params_) {
      if (ends_with(name, ".gain"))
        p.value.fill(T(1));
      else if (ends_with(name, ".bias") || ends_with(name, ".b"))
        p.value.fill(T(0));
      else
        p.value.fill_gaussian(rng, init_std);
    }
  }

  Tensor<T> encode_text(const std::string& caption,
                        TextCache<T>* cache = nullptr) const {
    return text_.forward(caption, cache);
  }

  Tensor<T> encode_knowledge(const std::vector<Triple>& triples,
                             KnowledgeCache<T>* cache = nullptr) const {
    return kee_.forward(triples, cache);
  }

  Tensor<T> encode_image(const Tensor<T>& features,
                         ImageCache<T>* cache = nullptr) const {
    return image_.forward(features, cache);
  }

  Tensor<T> image_features_tensor(const std::vector<float>& features) const {
    Tensor<T> x({features.size()});
    for (std::size_t i = 0; i < features.size(); ++i)
      x[i] = static_cast<T>(features[i]);
    return x;
  }

  // Unit-norm image embedding, no gradients.
  Tensor<T> embed_image(const std::vector<float>& features) const {
    return l2_normalize(image_.forward(image_features_tensor(features), nullptr));
  }

  // Unit-norm fused text embedding with the model's lambda, no gradients.
  Tensor<T> embed_fused_text(const std::string& caption,
                             const std::vector<Triple>& triples) const {
    Tensor<T> z = text_.forward(caption, nullptr);
    Tensor<T> ke = kee_.forward(triples, nullptr);
    return fuse(z, ke, cfg_.lambda);
  }

  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  const ModelConfig& config() const { return cfg_; }
  const Vocab& vocab() const { return vocab_; }

  TextEncoder<T>& text_encoder() { return text_; }
  KnowledgeEncoder<T>& knowledge_encoder() { return kee_; }
  ImageEncoder<T>& image_encoder() { return image_; }
  EmbeddingTable<T>& word_table() { return word_table_; }

 private:
  static bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  }

  Linear<T> make_linear(const std::string& name, std::size_t out,
                        std::size_t in, bool with_bias = true) {
    Linear<T> lin;
    lin.w = &params_.add(name + ".w", Tensor<T>({out, in}));
    if (with_bias) lin.b = &params_.add(name + ".b", Tensor<T>({out}));
    return lin;
  }

  TransformerLayer<T> make_layer(const std::string& prefix, std::size_t d,
                                 std::size_t heads) {
    TransformerLayer<T> layer;
    layer.ln1_g = &params_.add(prefix + ".ln1.gain", Tensor<T>({d}));
    layer.ln1_b = &params_.add(prefix + ".ln1.bias", Tensor<T>({d}));
    layer.ln2_g = &params_.add(prefix + ".ln2.gain", Tensor<T>({d}));
    layer.ln2_b = &params_.add(prefix + ".ln2.bias", Tensor<T>({d}));
    layer.attn.heads = heads;
    layer.attn.wq = make_linear(prefix + ".attn.q", d, d, false);
    layer.attn.wk = make_linear(prefix + ".attn.k", d, d, false);
    layer.attn.wv = make_linear(prefix + ".attn.v", d, d, false);
    layer.attn.wo = make_linear(prefix + ".attn.o", d, d, false);
    layer.ff1 = make_linear(prefix + ".ff1", 4 * d, d);
    layer.ff2 = make_linear(prefix + ".ff2", d, 4 * d);
    return layer;
  }

  void build() {
    const std::size_t v = vocab_.size();

    word_table_.vocab = &vocab_;
    word_table_.weights =
        &params_.add("word_emb", Tensor<T>({v, cfg_.word_dim}));

    kee_.triples.table = &word_table_;
    kee_.triples.mode = cfg_.triple_fusion;
    kee_.kmax = cfg_.kmax;
    const std::size_t d_in = kee_.triples.out_dim();
    if (d_in != cfg_.dim)
      kee_.in_proj = make_linear("kee.in", cfg_.dim, d_in);
    for (std::size_t l = 0; l < cfg_.kee_layers; ++l)
      kee_.layers.push_back(
          make_layer("kee.layer" + std::to_string(l), cfg_.dim, cfg_.heads));
    kee_.out_proj = make_linear("kee.out", cfg_.joint_dim, cfg_.dim);

    text_.vocab = &vocab_;
    text_.max_tokens = cfg_.max_tokens;
    text_.tok_emb = &params_.add("text.tok_emb", Tensor<T>({v, cfg_.dim}));
    text_.pos_emb =
        &params_.add("text.pos_emb", Tensor<T>({cfg_.max_tokens, cfg_.dim}));
    for (std::size_t l = 0; l < cfg_.text_layers; ++l)
      text_.layers.push_back(
          make_layer("text.layer" + std::to_string(l), cfg_.dim, cfg_.heads));
    text_.out_proj = make_linear("text.out", cfg_.joint_dim, cfg_.dim);

    image_.fc1 = make_linear("img.fc1", cfg_.image_hidden, cfg_.image_dim);
    image_.fc2 = make_linear("img.fc2", cfg_.joint_dim, cfg_.image_hidden);
  }

  ModelConfig cfg_;
  Vocab vocab_;
  ParamStore<T> params_;
  EmbeddingTable<T> word_table_;
  KnowledgeEncoder<T> kee_;
  TextEncoder<T> text_;
  ImageEncoder<T> image_;
};

struct TextInput {
  std::string caption;
  std::vector<Triple> triples;
};

// One training batch: borrowed samples plus an optional semantic negative
// per sample.
struct BatchInput {
  std::vector<const Sample*> samples;
  std::vector<std::optional<TextInput>> negatives;  // same length as samples
};

struct LossConfig {
  double margin = 0.2;       // hinge margin
  double temperature = 0.07; // contrastive temperature, fixed (not learned)
  bool neg_in_denominator = false;  // ablation: negatives extend the i2t softmax
};

struct StepMetrics {
  double final_loss = 0.0;
  double hinge = 0.0;  // mean over samples that had a negative
  double itcl = 0.0;
  double i2t = 0.0;
  double t2i = 0.0;
  std::size_t hinge_count = 0;
};

// Full objective over a batch: forward all images and fused texts (negatives
// included), assemble the similarity matrix, and optionally backpropagate
// into the parameter store.
template <typename T>
StepMetrics model_loss(Model<T>& model, const BatchInput& batch,
                       const LossConfig& loss_cfg, bool with_grad) {
  const std::size_t n = batch.samples.size();
  if (n == 0) throw ConfigError("model_loss: empty batch");
  if (batch.negatives.size() != n)
    throw ConfigError("model_loss: negatives length mismatch");
  const double lambda = model.config().lambda;

  std::vector<ImageCache<T>> img_cache(n);
  std::vector<TextCache<T>> text_cache(n);
  std::vector<KnowledgeCache<T>> kee_cache(n);
  std::vector<FuseCache<T>> fuse_cache(n);
  std::vector<Tensor<T>> v(n), e(n);
  std::vector<double> v_norm(n);

  for (std::size_t i = 0; i < n; ++i) {
    const Sample& s = *batch.samples[i];
    Tensor<T> u =
        model.encode_image(model.image_features_tensor(s.image_features),
                           &img_cache[i]);
    v[i] = l2_normalize(u, &v_norm[i]);
    Tensor<T> z = model.encode_text(s.caption, &text_cache[i]);
    Tensor<T> ke = model.encode_knowledge(s.triples, &kee_cache[i]);
    e[i] = fuse(z, ke, lambda, &fuse_cache[i]);
  }

  // negative texts
  std::vector<std::size_t> neg_owner;  // sample index per negative column
  std::vector<TextCache<T>> neg_text_cache;
  std::vector<KnowledgeCache<T>> neg_kee_cache;
  std::vector<FuseCache<T>> neg_fuse_cache;
  std::vector<Tensor<T>> e_neg;
  for (std::size_t i = 0; i < n; ++i) {
    if (!batch.negatives[i]) continue;
    neg_owner.push_back(i);
    neg_text_cache.emplace_back();
    neg_kee_cache.emplace_back();
    neg_fuse_cache.emplace_back();
    const TextInput& neg = *batch.negatives[i];
    Tensor<T> z = model.encode_text(neg.caption, &neg_text_cache.back());
    Tensor<T> ke = model.encode_knowledge(neg.triples, &neg_kee_cache.back());
    e_neg.push_back(fuse(z, ke, lambda, &neg_fuse_cache.back()));
  }
  const std::size_t n_neg = neg_owner.size();

  const std::size_t cols = loss_cfg.neg_in_denominator ? n + n_neg : n;
  auto dot = [](const Tensor<T>& a, const Tensor<T>& b) {
    double acc = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c)
      acc += static_cast<double>(a[c]) * static_cast<double>(b[c]);
    return acc;
  };

  SimilarityMatrix<T> sim;
  sim.temperature = loss_cfg.temperature;
  sim.values = Tensor<T>({n, cols});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      sim.values.at(i, j) = static_cast<T>(dot(v[i], e[j]));
    for (std::size_t j = n; j < cols; ++j)
      sim.values.at(i, j) = static_cast<T>(dot(v[i], e_neg[j - n]));
  }

  InfoNceLosses nce = info_nce(sim);

  std::vector<double> hinges(n_neg);
  std::vector<double> d_neg_scores(n_neg);
  for (std::size_t k = 0; k < n_neg; ++k) {
    const std::size_t i = neg_owner[k];
    d_neg_scores[k] = loss_cfg.neg_in_denominator
                          ? static_cast<double>(sim.values.at(i, n + k))
                          : dot(v[i], e_neg[k]);
    hinges[k] = hinge_loss(static_cast<double>(sim.values.at(i, i)),
                           d_neg_scores[k], loss_cfg.margin);
  }

  StepMetrics out;
  out.itcl = nce.itcl;
  out.i2t = nce.i2t;
  out.t2i = nce.t2i;
  out.hinge_count = n_neg;
  out.hinge = 0.0;
  for (double h : hinges) out.hinge += h;
  if (n_neg > 0) out.hinge /= static_cast<double>(n_neg);
  out.final_loss = final_loss(hinges, nce.itcl);

  if (!with_grad) return out;

  Tensor<T> ds({n, cols});
  info_nce_backward(sim, 1.0, ds);
  std::vector<double> d_hinge_neg(n_neg, 0.0);  // d final / d d_neg_scores[k]
  for (std::size_t k = 0; k < n_neg; ++k) {
    if (hinges[k] <= 0.0) continue;
    const double g = 1.0 / static_cast<double>(n_neg);
    const std::size_t i = neg_owner[k];
    ds.at(i, i) += static_cast<T>(-g);
    if (loss_cfg.neg_in_denominator)
      ds.at(i, n + k) += static_cast<T>(g);
    else
      d_hinge_neg[k] += g;
  }

  const std::size_t dj = model.config().joint_dim;
  std::vector<Tensor<T>> dv(n, Tensor<T>({dj}));
  std::vector<Tensor<T>> de(n, Tensor<T>({dj}));
  std::vector<Tensor<T>> de_neg(n_neg, Tensor<T>({dj}));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const double g = static_cast<double>(ds.at(i, j));
      if (g == 0.0) continue;
      Tensor<T>& ecol = j < n ? e[j] : e_neg[j - n];
      Tensor<T>& decol = j < n ? de[j] : de_neg[j - n];
      for (std::size_t c = 0; c < dj; ++c) {
        dv[i][c] += static_cast<T>(g * static_cast<double>(ecol[c]));
        decol[c] += static_cast<T>(g * static_cast<double>(v[i][c]));
      }
    }
  for (std::size_t k = 0; k < n_neg; ++k) {
    if (d_hinge_neg[k] == 0.0) continue;
    const std::size_t i = neg_owner[k];
    for (std::size_t c = 0; c < dj; ++c) {
      dv[i][c] += static_cast<T>(d_hinge_neg[k] *
                                 static_cast<double>(e_neg[k][c]));
      de_neg[k][c] +=
          static_cast<T>(d_hinge_neg[k] * static_cast<double>(v[i][c]));
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    Tensor<T> du({dj});
    l2_normalize_backward(v[i], v_norm[i], dv[i], du);
    model.image_encoder().backward(img_cache[i], du);

    Tensor<T> dz({dj}), dke({dj});
    fuse_backward(fuse_cache[i], lambda, de[i], dz, dke);
    model.text_encoder().backward(text_cache[i], dz);
    model.knowledge_encoder().backward(kee_cache[i], dke);
  }
  for (std::size_t k = 0; k < n_neg; ++k) {
    Tensor<T> dz({dj}), dke({dj});
    fuse_backward(neg_fuse_cache[k], lambda, de_neg[k], dz, dke);
    model.text_encoder().backward(neg_text_cache[k], dz);
    model.knowledge_encoder().backward(neg_kee_cache[k], dke);
  }

  return out;
}

}  // namespace sgmatch
