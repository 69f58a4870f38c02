#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sgmatch/encoders.hpp"
#include "sgmatch/model.hpp"
#include "sgmatch/training.hpp"

using namespace sgmatch;

namespace {

struct TableFixture {
  Vocab vocab;
  ParamStore<float> store;
  EmbeddingTable<float> table;

  explicit TableFixture(std::size_t dim = 8, uint64_t seed = 3) {
    vocab = Vocab::from_words(
        {"cow", "white", "is", "sit", "in", "hay", "black", "dress", "book"});
    table.vocab = &vocab;
    Tensor<float> w({vocab.size(), dim});
    SeededRng rng(seed);
    w.fill_gaussian(rng, 0.5);
    table.weights = &store.add("emb", std::move(w));
  }
};

std::unique_ptr<Model<float>> small_model(std::size_t image_dim,
                                          const Lexicon& lexicon,
                                          double lambda = 0.2,
                                          uint64_t seed = 5) {
  ModelConfig mc;
  mc.dim = 16;
  mc.word_dim = 16;
  mc.joint_dim = 16;
  mc.heads = 2;
  mc.text_layers = 2;
  mc.kee_layers = 2;
  mc.kmax = 4;
  mc.max_tokens = 16;
  mc.lambda = lambda;
  mc.image_hidden = 12;
  mc.image_dim = image_dim;
  auto m = std::make_unique<Model<float>>(mc, Vocab::from_lexicon(lexicon));
  m->init_params(seed, 0.2);
  return m;
}

Lexicon tiny_lexicon() {
  return Lexicon::from_string(
      "cow\tNOUN\nhay\tNOUN\ndress\tNOUN\nbook\tNOUN\n"
      "white\tADJ\nblack\tADJ\nred\tADJ\nblue\tADJ\n"
      "is\tVERB\nsit\tVERB\nin\tADP\nthe\tDET\na\tDET\nand\tCONJ\n");
}

double vec_rel_diff(const Tensor<float>& a, const Tensor<float>& b) {
  double num = 0.0, den = 1e-12;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (double(a[i]) - double(b[i])) * (double(a[i]) - double(b[i]));
    den += double(b[i]) * double(b[i]);
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("word_embed: row lookup, UNK fallback, phrase mean") {
  TableFixture fx;
  const std::size_t d = fx.table.dim();

  Tensor<float> cow = word_embed("cow", fx.table);
  std::size_t row = fx.vocab.row("cow");
  for (std::size_t c = 0; c < d; ++c)
    CHECK(cow[c] == fx.table.weights->value.at(row, c));

  Tensor<float> unk = word_embed("xyzzy", fx.table);
  for (std::size_t c = 0; c < d; ++c)
    CHECK(unk[c] == fx.table.weights->value.at(0, c));

  Tensor<float> phrase = word_embed("sit in", fx.table);
  std::size_t r1 = fx.vocab.row("sit"), r2 = fx.vocab.row("in");
  for (std::size_t c = 0; c < d; ++c)
    CHECK(phrase[c] == doctest::Approx((fx.table.weights->value.at(r1, c) +
                                        fx.table.weights->value.at(r2, c)) /
                                       2.0f));
}

TEST_CASE("encode_triple identities") {
  TableFixture fx;
  const std::size_t d = fx.table.dim();

  // h == t cancels to the relation vector
  Tensor<float> same = encode_triple("cow", "is", "cow", fx.table);
  Tensor<float> w_is = word_embed("is", fx.table);
  for (std::size_t c = 0; c < d; ++c)
    CHECK(same[c] == doctest::Approx(w_is[c]).epsilon(1e-6));

  // forward plus reversed equals twice the relation vector
  Tensor<float> fwd = encode_triple("cow", "is", "white", fx.table);
  Tensor<float> rev = encode_triple("white", "is", "cow", fx.table);
  for (std::size_t c = 0; c < d; ++c)
    CHECK(fwd[c] + rev[c] == doctest::Approx(2.0f * w_is[c]).epsilon(1e-5));

  // order sensitivity: reversing head and tail changes the embedding
  double diff = 0.0;
  for (std::size_t c = 0; c < d; ++c)
    diff += std::fabs(double(fwd[c]) - double(rev[c]));
  CHECK(diff > 1e-3);
}

TEST_CASE("triple fusion ablations: add is order-insensitive, concat is not") {
  TableFixture fx;
  TripleEncoder<float> add_enc{&fx.table, TripleFusion::Add};
  Tensor<float> a1 = add_enc.encode({"cow", "is", "white"});
  Tensor<float> a2 = add_enc.encode({"white", "is", "cow"});
  for (std::size_t c = 0; c < a1.size(); ++c)
    CHECK(a1[c] == doctest::Approx(a2[c]).epsilon(1e-6));

  TripleEncoder<float> cat_enc{&fx.table, TripleFusion::Concat};
  CHECK(cat_enc.out_dim() == 3 * fx.table.dim());
  Tensor<float> c1 = cat_enc.encode({"cow", "is", "white"});
  Tensor<float> c2 = cat_enc.encode({"white", "is", "cow"});
  double diff = 0.0;
  for (std::size_t c = 0; c < c1.size(); ++c)
    diff += std::fabs(double(c1[c]) - double(c2[c]));
  CHECK(diff > 1e-3);
}

TEST_CASE("knowledge encoder: empty list gives zeros, K=1 pooling identity") {
  Lexicon lex = tiny_lexicon();
  auto model = small_model(10, lex);
  auto& kee = model->knowledge_encoder();

  Tensor<float> empty = model->encode_knowledge({});
  REQUIRE(empty.size() == model->config().joint_dim);
  for (std::size_t c = 0; c < empty.size(); ++c) CHECK(empty[c] == 0.0f);

  // single triple: mean pooling over one row is that row
  std::vector<Triple> one = {{"cow", "is", "white"}};
  KnowledgeCache<float> cache;
  Tensor<float> out = kee.forward(one, &cache);
  CHECK(cache.top.rows() == 1);
  for (std::size_t c = 0; c < cache.top.cols(); ++c)
    CHECK(cache.pooled.at(0, c) == cache.top.at(0, c));
  CHECK(out.size() == model->config().joint_dim);
}

TEST_CASE("knowledge encoder truncates beyond kmax") {
  Lexicon lex = tiny_lexicon();
  auto model = small_model(10, lex);  // kmax = 4
  std::vector<Triple> many = {{"cow", "is", "white"}, {"hay", "is", "black"},
                              {"cow", "sit in", "hay"}, {"dress", "is", "red"},
                              {"book", "is", "blue"},  {"cow", "is", "red"}};
  std::vector<Triple> first_four(many.begin(), many.begin() + 4);
  Tensor<float> full = model->encode_knowledge(many);
  Tensor<float> trunc = model->encode_knowledge(first_four);
  for (std::size_t c = 0; c < full.size(); ++c) CHECK(full[c] == trunc[c]);
}

TEST_CASE("property: knowledge encoder is permutation-invariant") {
  Lexicon lex = tiny_lexicon();
  auto model = small_model(10, lex);
  std::vector<Triple> base = {{"cow", "is", "white"},
                              {"hay", "is", "black"},
                              {"cow", "sit in", "hay"},
                              {"dress", "is", "red"}};
  SeededRng rng(17);
  Tensor<float> reference = model->encode_knowledge(base);
  for (int iter = 0; iter < 1000; ++iter) {
    std::vector<Triple> perm = base;
    for (std::size_t i = perm.size(); i > 1; --i)
      std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
    Tensor<float> out = model->encode_knowledge(perm);
    CHECK(vec_rel_diff(out, reference) <= 1e-5);
  }
}

TEST_CASE("text encoder: determinism, single word, empty caption") {
  Lexicon lex = tiny_lexicon();
  auto model = small_model(10, lex);
  Tensor<float> a = model->encode_text("the white cow");
  Tensor<float> b = model->encode_text("the white cow");
  for (std::size_t c = 0; c < a.size(); ++c) CHECK(a[c] == b[c]);

  Tensor<float> single = model->encode_text("cow");
  CHECK(single.size() == model->config().joint_dim);

  CHECK_THROWS_AS(model->encode_text("  !!"), EmptyCaption);
}

TEST_CASE("image encoder: zero input with zero biases, shape errors") {
  Lexicon lex = tiny_lexicon();
  auto model = small_model(10, lex);
  model->params().get("img.fc1.b").value.fill(0.0f);
  model->params().get("img.fc2.b").value.fill(0.0f);
  Tensor<float> zero_feat({10});
  Tensor<float> out = model->encode_image(zero_feat);
  for (std::size_t c = 0; c < out.size(); ++c)
    CHECK(out[c] == doctest::Approx(0.0f));

  Tensor<float> wrong({7});
  CHECK_THROWS_AS(model->encode_image(wrong), ShapeMismatch);

  // determinism
  Tensor<float> f({10});
  SeededRng rng(9);
  f.fill_gaussian(rng, 1.0);
  Tensor<float> o1 = model->encode_image(f);
  Tensor<float> o2 = model->encode_image(f);
  for (std::size_t c = 0; c < o1.size(); ++c) CHECK(o1[c] == o2[c]);
}

TEST_CASE("fuse: lambda zero, zero knowledge, collinear, unit norm") {
  SeededRng rng(23);
  Tensor<float> z({8});
  z.fill_gaussian(rng, 1.0);
  Tensor<float> ke({8});
  ke.fill_gaussian(rng, 1.0);

  Tensor<float> z_unit = l2_normalize(z);
  Tensor<float> f0 = fuse(z, ke, 0.0);
  for (std::size_t c = 0; c < 8; ++c)
    CHECK(f0[c] == doctest::Approx(z_unit[c]).epsilon(1e-6));

  Tensor<float> zero({8});
  Tensor<float> fz = fuse(z, zero, 0.7);
  for (std::size_t c = 0; c < 8; ++c)
    CHECK(fz[c] == doctest::Approx(z_unit[c]).epsilon(1e-6));

  Tensor<float> fc = fuse(z, z, 1.0);
  for (std::size_t c = 0; c < 8; ++c)
    CHECK(fc[c] == doctest::Approx(z_unit[c]).epsilon(1e-6));

  CHECK_THROWS_AS(fuse(zero, zero, 0.2), ZeroVector);

  for (int iter = 0; iter < 1000; ++iter) {
    Tensor<float> a({8}), b({8});
    a.fill_gaussian(rng, 2.0);
    b.fill_gaussian(rng, 2.0);
    Tensor<float> y = fuse(a, b, 0.2);
    double norm = 0.0;
    for (std::size_t c = 0; c < 8; ++c) norm += double(y[c]) * double(y[c]);
    CHECK(std::fabs(std::sqrt(norm) - 1.0) < 1e-6);
  }
}

TEST_CASE("untrained text embeddings need not separate swapped captions") {
  // contract statement: identical word multisets map through positional
  // encodings, so separation is possible but not guaranteed at init
  Lexicon lex = tiny_lexicon();
  auto model = small_model(10, lex);
  Tensor<float> a = model->encode_text("the red dress and the blue book");
  Tensor<float> b = model->encode_text("the blue dress and the red book");
  CHECK(a.size() == b.size());  // both well-formed; nothing more is promised
}

TEST_CASE("model parameter budget matches the layer plan") {
  Lexicon lex = tiny_lexicon();
  auto model = small_model(10, lex);
  const auto& ps = model->params();
  CHECK(ps.has("word_emb"));
  CHECK(ps.has("text.tok_emb"));
  CHECK(ps.has("text.pos_emb"));
  CHECK(ps.has("kee.layer0.attn.q.w"));
  CHECK(ps.has("kee.layer1.ff2.b"));
  CHECK(ps.has("text.layer1.ln2.gain"));
  CHECK(ps.has("img.fc1.w"));
  CHECK(!ps.has("kee.layer0.attn.q.b"));  // attention runs bias-free
  CHECK(!ps.has("kee.in.w"));             // word_dim == dim, no projection
}

TEST_CASE("concat fusion inserts the input projection") {
  Lexicon lex = tiny_lexicon();
  ModelConfig mc;
  mc.dim = 16;
  mc.word_dim = 16;
  mc.joint_dim = 16;
  mc.heads = 2;
  mc.text_layers = 1;
  mc.kee_layers = 1;
  mc.kmax = 4;
  mc.max_tokens = 16;
  mc.image_hidden = 8;
  mc.image_dim = 10;
  mc.triple_fusion = TripleFusion::Concat;
  Model<float> model(mc, Vocab::from_lexicon(lex));
  model.init_params(1);
  CHECK(model.params().has("kee.in.w"));
  Tensor<float> out = model.encode_knowledge({{"cow", "is", "white"}});
  CHECK(out.size() == 16);
}
