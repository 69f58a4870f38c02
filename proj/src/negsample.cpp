#include "sgmatch/negsample.hpp"

#include <algorithm>
#include <cctype>

namespace sgmatch {

namespace {

bool starts_with_vowel(const std::string& word) {
  if (word.empty()) return false;
  char c = static_cast<char>(std::tolower(static_cast<unsigned char>(word[0])));
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

bool is_upper_initial(const std::string& word) {
  return !word.empty() && std::isupper(static_cast<unsigned char>(word[0]));
}

std::string with_upper_initial(std::string word) {
  if (!word.empty())
    word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
  return word;
}

std::string with_lower_initial(std::string word) {
  if (!word.empty())
    word[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(word[0])));
  return word;
}

// Token position of attribute `idx`. Parsed graphs carry it directly;
// deserialized ones recover it by matching the lemma against the tokens,
// skipping positions already claimed by the other half of the swap.
std::size_t attribute_token_position(const SceneGraph& sg,
                                     const std::vector<Token>& tokens,
                                     std::size_t idx,
                                     int claimed = -1) {
  const SgAttribute& attr = sg.attributes.at(idx);
  if (attr.token_index >= 0) return static_cast<std::size_t>(attr.token_index);
  for (const Token& t : tokens)
    if (to_lower(t.text) == attr.lemma &&
        static_cast<int>(t.index) != claimed)
      return t.index;
  throw IndexOutOfRange("attribute lemma '" + attr.lemma +
                        "' not found among caption tokens");
}

void repair_article_before(std::vector<std::string>& words, std::size_t pos) {
  if (pos == 0) return;
  std::string& article = words[pos - 1];
  std::string low = to_lower(article);
  if (low != "a" && low != "an") return;
  bool cap = is_upper_initial(article);
  std::string repaired = starts_with_vowel(words[pos]) ? "an" : "a";
  article = cap ? with_upper_initial(repaired) : repaired;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

std::string render_token_swap(const std::vector<Token>& tokens,
                              std::size_t p, std::size_t q) {
  if (p >= tokens.size() || q >= tokens.size())
    throw IndexOutOfRange("swap position outside the token range");
  std::vector<std::string> words;
  words.reserve(tokens.size());
  for (const Token& t : tokens) words.push_back(t.text);

  bool initial_cap = is_upper_initial(words[0]);
  std::swap(words[p], words[q]);

  // Sentence-initial capitalization follows the caption, not the word.
  if (p == 0 || q == 0) {
    std::size_t moved_out = (p == 0) ? q : p;
    words[moved_out] = with_lower_initial(words[moved_out]);
    if (initial_cap) words[0] = with_upper_initial(words[0]);
  }
  repair_article_before(words, p);
  repair_article_before(words, q);
  return join_words(words);
}

std::string join_tokens(const std::vector<Token>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i].text;
  }
  return out;
}

}  // namespace

std::string swap_kind_name(SwapKind kind) {
  return kind == SwapKind::RelationSwap ? "relation" : "attribute";
}

std::vector<SwapCandidate> enumerate_swaps(const SceneGraph& sg) {
  std::vector<SwapCandidate> out;
  for (std::size_t r = 0; r < sg.relations.size(); ++r) {
    SwapCandidate c;
    c.kind = SwapKind::RelationSwap;
    c.relation_index = r;
    out.push_back(c);
  }
  for (std::size_t i = 0; i < sg.attributes.size(); ++i)
    for (std::size_t j = i + 1; j < sg.attributes.size(); ++j) {
      if (sg.attributes[i].object_id == sg.attributes[j].object_id)
        continue;  // same-object pairs keep their meaning: pass
      if (sg.attributes[i].lemma == sg.attributes[j].lemma)
        continue;  // identical lemmas would reproduce the source
      SwapCandidate c;
      c.kind = SwapKind::AttributeSwap;
      c.attr_i = i;
      c.attr_j = j;
      out.push_back(c);
    }
  return out;
}

SceneGraph apply_swap(const SceneGraph& sg, const SwapCandidate& swap) {
  SceneGraph out = sg;
  if (swap.kind == SwapKind::RelationSwap) {
    if (swap.relation_index >= out.relations.size())
      throw IndexOutOfRange("relation index " +
                            std::to_string(swap.relation_index) +
                            " out of range");
    auto& rel = out.relations[swap.relation_index];
    std::swap(rel.subject_id, rel.object_id);
  } else {
    if (swap.attr_i >= out.attributes.size() ||
        swap.attr_j >= out.attributes.size())
      throw IndexOutOfRange("attribute index out of range");
    std::swap(out.attributes[swap.attr_i].lemma,
              out.attributes[swap.attr_j].lemma);
  }
  return out;
}

std::string render_negative(const std::string& caption,
                            const std::vector<Token>& tokens,
                            const SceneGraph& sg, const SwapCandidate& swap) {
  (void)caption;
  if (swap.kind == SwapKind::RelationSwap) {
    const SgRelation& rel = sg.relations.at(swap.relation_index);
    std::size_t p = sg.objects.at(rel.subject_id).token_index;
    std::size_t q = sg.objects.at(rel.object_id).token_index;
    return render_token_swap(tokens, p, q);
  }
  std::size_t p = attribute_token_position(sg, tokens, swap.attr_i);
  std::size_t q = attribute_token_position(sg, tokens, swap.attr_j,
                                           static_cast<int>(p));
  return render_token_swap(tokens, p, q);
}

std::optional<NegativeSample> try_sample_negative(const std::string& caption,
                                                  const SceneGraph& sg,
                                                  SeededRng& rng) {
  std::vector<Token> tokens = tokenize(caption);
  std::string canonical = join_tokens(tokens);
  std::vector<SwapCandidate> candidates;
  std::vector<std::string> rendered;
  for (const SwapCandidate& c : enumerate_swaps(sg)) {
    std::string neg = render_negative(caption, tokens, sg, c);
    if (neg == caption || neg == canonical) continue;
    candidates.push_back(c);
    rendered.push_back(std::move(neg));
  }
  if (candidates.empty()) return std::nullopt;
  std::size_t pick = rng.uniform_index(candidates.size());
  return NegativeSample{rendered[pick], candidates[pick], caption};
}

NegativeSample sample_negative(const std::string& caption,
                               const SceneGraph& sg, SeededRng& rng) {
  auto neg = try_sample_negative(caption, sg, rng);
  if (!neg)
    throw NoSwapAvailable("no swap changes the caption: " + caption);
  return *neg;
}

std::vector<NegativeSample> all_negatives(const std::string& caption,
                                          const SceneGraph& sg) {
  std::vector<Token> tokens = tokenize(caption);
  std::string canonical = join_tokens(tokens);
  std::vector<NegativeSample> out;
  for (const SwapCandidate& c : enumerate_swaps(sg)) {
    std::string neg = render_negative(caption, tokens, sg, c);
    if (neg == caption || neg == canonical) continue;
    out.push_back(NegativeSample{std::move(neg), c, caption});
  }
  return out;
}

std::optional<NegativeSample> random_word_swap(const std::string& caption,
                                               SeededRng& rng) {
  std::vector<Token> tokens = tokenize(caption);
  if (tokens.size() < 2) return std::nullopt;
  std::string canonical = join_tokens(tokens);
  for (int attempt = 0; attempt < 20; ++attempt) {
    std::size_t p = rng.uniform_index(tokens.size());
    std::size_t q = rng.uniform_index(tokens.size() - 1);
    if (q >= p) ++q;
    std::vector<std::string> words;
    for (const Token& t : tokens) words.push_back(t.text);
    std::swap(words[p], words[q]);
    std::string neg = join_words(words);
    if (neg == caption || neg == canonical) continue;
    NegativeSample out;
    out.negative_caption = std::move(neg);
    out.source_caption = caption;
    out.swap.kind = SwapKind::AttributeSwap;  // descriptor unused in this mode
    out.swap.attr_i = p;
    out.swap.attr_j = q;
    return out;
  }
  return std::nullopt;
}

std::vector<std::string> canonical_word_multiset(const std::string& caption) {
  std::vector<std::string> words;
  for (const Token& t : tokenize(caption)) {
    std::string w = to_lower(t.text);
    if (w == "an") w = "a";
    words.push_back(std::move(w));
  }
  std::sort(words.begin(), words.end());
  return words;
}

}  // namespace sgmatch
