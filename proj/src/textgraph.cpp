#include "sgmatch/textgraph.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace sgmatch {

namespace {

bool is_word_char(unsigned char c) {
  // Letters, digits, apostrophes; any non-ASCII byte counts as part of a
  // word so UTF-8 sequences survive intact.
  return std::isalnum(c) || c == '\'' || c >= 0x80;
}

}  // namespace

std::string to_lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::string to_string(PosTag tag) {
  switch (tag) {
    case PosTag::Noun: return "NOUN";
    case PosTag::Adj: return "ADJ";
    case PosTag::Verb: return "VERB";
    case PosTag::Adp: return "ADP";
    case PosTag::Det: return "DET";
    case PosTag::Conj: return "CONJ";
    case PosTag::Measure: return "MEASURE";
    case PosTag::Other: return "OTHER";
  }
  return "OTHER";
}

PosTag pos_tag_from_string(const std::string& name) {
  if (name == "NOUN") return PosTag::Noun;
  if (name == "ADJ") return PosTag::Adj;
  if (name == "VERB") return PosTag::Verb;
  if (name == "ADP") return PosTag::Adp;
  if (name == "DET") return PosTag::Det;
  if (name == "CONJ") return PosTag::Conj;
  if (name == "MEASURE") return PosTag::Measure;
  if (name == "OTHER") return PosTag::Other;
  throw ConfigError("unknown POS tag: " + name);
}

void Lexicon::add(const std::string& word, PosTag tag) {
  std::string key = to_lower(word);
  entries_[key] = tag;
  if (tag == PosTag::Measure)
    measure_nouns_.insert(key);
  else
    measure_nouns_.erase(key);
}

bool Lexicon::contains(const std::string& word) const {
  return entries_.count(to_lower(word)) > 0;
}

PosTag Lexicon::lookup(const std::string& word) const {
  std::string key = to_lower(word);
  if (measure_nouns_.count(key)) return PosTag::Measure;
  auto it = entries_.find(key);
  return it == entries_.end() ? PosTag::Other : it->second;
}

bool Lexicon::is_measure(const std::string& word) const {
  return measure_nouns_.count(to_lower(word)) > 0;
}

Lexicon Lexicon::from_string(const std::string& text) {
  Lexicon lex;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ConfigError("lexicon line " + std::to_string(line_no) +
                        ": expected `word<TAB>TAG`");
    std::string word = line.substr(0, tab);
    std::string tag_name = line.substr(tab + 1);
    if (word.empty())
      throw ConfigError("lexicon line " + std::to_string(line_no) +
                        ": empty word");
    lex.add(word, pos_tag_from_string(tag_name));
  }
  return lex;
}

Lexicon Lexicon::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

std::vector<Token> tokenize(const std::string& caption) {
  std::vector<Token> tokens;
  std::string current;
  auto flush = [&]() {
    if (current.empty()) return;
    tokens.push_back(Token{current, PosTag::Other, tokens.size()});
    current.clear();
  };
  for (unsigned char c : caption) {
    if (is_word_char(c))
      current.push_back(static_cast<char>(c));
    else
      flush();
  }
  flush();
  if (tokens.empty())
    throw EmptyCaption("caption contains no word characters");
  return tokens;
}

std::vector<Token> tag(std::vector<Token> tokens, const Lexicon& lexicon) {
  for (auto& t : tokens) t.pos = lexicon.lookup(t.text);
  return tokens;
}

bool SceneGraph::operator==(const SceneGraph& other) const {
  if (objects.size() != other.objects.size() ||
      attributes.size() != other.attributes.size() ||
      relations.size() != other.relations.size())
    return false;
  for (std::size_t i = 0; i < objects.size(); ++i)
    if (objects[i].lemma != other.objects[i].lemma ||
        objects[i].token_index != other.objects[i].token_index)
      return false;
  for (std::size_t i = 0; i < attributes.size(); ++i)
    if (attributes[i].lemma != other.attributes[i].lemma ||
        attributes[i].object_id != other.attributes[i].object_id)
      return false;
  for (std::size_t i = 0; i < relations.size(); ++i)
    if (relations[i].subject_id != other.relations[i].subject_id ||
        relations[i].phrase != other.relations[i].phrase ||
        relations[i].object_id != other.relations[i].object_id)
      return false;
  return true;
}

namespace {

// Walks left from the noun at `noun_pos` and collects its attributive
// adjectives. Det is skipped; Conj is crossed only when it joins two
// adjectives. Returns adjectives in left-to-right order and reports the
// leftmost token consumed by the run in `prefix_start`.
std::vector<std::size_t> collect_attribute_run(const std::vector<Token>& toks,
                                               std::size_t noun_pos,
                                               std::size_t* prefix_start) {
  std::vector<std::size_t> adjs;
  std::size_t start = noun_pos;
  std::size_t i = noun_pos;
  while (i > 0) {
    const Token& t = toks[i - 1];
    if (t.pos == PosTag::Det) {
      start = --i;
      continue;
    }
    if (t.pos == PosTag::Adj) {
      adjs.push_back(i - 1);
      start = --i;
      continue;
    }
    if (t.pos == PosTag::Conj && !adjs.empty()) {
      // Peek past the conjunction (and any determiners) for another
      // adjective; otherwise the conjunction belongs to something else.
      std::size_t j = i - 1;
      while (j > 0 && toks[j - 1].pos == PosTag::Det) --j;
      if (j > 0 && toks[j - 1].pos == PosTag::Adj) {
        start = --i;
        continue;
      }
    }
    break;
  }
  std::reverse(adjs.begin(), adjs.end());
  if (prefix_start) *prefix_start = start;
  return adjs;
}

}  // namespace

SceneGraph parse_scene_graph(const std::vector<Token>& toks) {
  SceneGraph sg;

  // R1: objects
  std::vector<std::size_t> noun_positions;
  for (const Token& t : toks)
    if (t.pos == PosTag::Noun) {
      sg.objects.push_back(SgObject{to_lower(t.text), t.index});
      noun_positions.push_back(t.index);
    }

  // R2: attribute runs; also record where each object's noun phrase starts
  // so relation spans stop before it.
  std::vector<std::size_t> prefix_start(sg.objects.size());
  for (std::size_t oid = 0; oid < sg.objects.size(); ++oid) {
    auto adjs =
        collect_attribute_run(toks, noun_positions[oid], &prefix_start[oid]);
    for (std::size_t pos : adjs) {
      std::string lemma = to_lower(toks[pos].text);
      bool dup = false;
      for (const auto& a : sg.attributes)
        if (a.lemma == lemma && a.object_id == oid) dup = true;
      if (!dup)
        sg.attributes.push_back(
            SgAttribute{lemma, oid, static_cast<int>(pos)});
    }
  }

  // R3: relations between consecutive objects.
  for (std::size_t oid = 0; oid + 1 < sg.objects.size(); ++oid) {
    std::size_t lo = noun_positions[oid] + 1;
    std::size_t hi = prefix_start[oid + 1];  // exclusive
    if (lo >= hi) continue;

    // Absorb `Det? Measure of` spans.
    std::vector<std::size_t> region;
    for (std::size_t i = lo; i < hi; ++i) region.push_back(i);
    std::vector<bool> absorbed(region.size(), false);
    for (std::size_t r = 0; r < region.size(); ++r) {
      if (toks[region[r]].pos != PosTag::Measure) continue;
      std::size_t next = r + 1;
      if (next < region.size() && toks[region[next]].pos == PosTag::Adp &&
          to_lower(toks[region[next]].text) == "of") {
        absorbed[r] = true;
        absorbed[next] = true;
        if (r > 0 && toks[region[r - 1]].pos == PosTag::Det)
          absorbed[r - 1] = true;
      }
    }

    // Remaining tokens: verbs/adpositions form the phrase, Det/Measure/Other
    // are permitted filler, anything else breaks the pattern.
    std::vector<std::string> phrase_words;
    bool pattern_ok = true;
    bool seen_adp = false;
    for (std::size_t r = 0; r < region.size() && pattern_ok; ++r) {
      if (absorbed[r]) continue;
      const Token& t = toks[region[r]];
      switch (t.pos) {
        case PosTag::Verb:
          if (seen_adp) pattern_ok = false;  // verb after adposition
          phrase_words.push_back(to_lower(t.text));
          break;
        case PosTag::Adp:
          seen_adp = true;
          phrase_words.push_back(to_lower(t.text));
          break;
        case PosTag::Det:
        case PosTag::Measure:
        case PosTag::Other:
          break;
        default:
          pattern_ok = false;
      }
    }
    if (!pattern_ok || phrase_words.empty()) continue;

    std::string phrase;
    for (std::size_t i = 0; i < phrase_words.size(); ++i) {
      if (i) phrase += ' ';
      phrase += phrase_words[i];
    }
    bool dup = false;
    for (const auto& rel : sg.relations)
      if (rel.subject_id == oid && rel.object_id == oid + 1 &&
          rel.phrase == phrase)
        dup = true;
    if (!dup) sg.relations.push_back(SgRelation{oid, phrase, oid + 1});
  }

  return sg;
}

SceneGraph parse_scene_graph(const std::string& caption,
                             const Lexicon& lexicon) {
  return parse_scene_graph(tag(tokenize(caption), lexicon));
}

std::vector<Triple> scene_graph_to_triples(const SceneGraph& sg) {
  std::vector<Triple> triples;
  triples.reserve(sg.relations.size() + sg.attributes.size());
  for (const auto& r : sg.relations)
    triples.push_back(Triple{sg.objects[r.subject_id].lemma, r.phrase,
                             sg.objects[r.object_id].lemma});
  for (const auto& a : sg.attributes)
    triples.push_back(Triple{sg.objects[a.object_id].lemma, "is", a.lemma});
  return triples;
}

std::string scene_graph_to_json(const SceneGraph& sg) {
  nlohmann::json j;
  j["objects"] = nlohmann::json::array();
  for (const auto& o : sg.objects)
    j["objects"].push_back({{"lemma", o.lemma}, {"token_index", o.token_index}});
  j["attributes"] = nlohmann::json::array();
  for (const auto& a : sg.attributes)
    j["attributes"].push_back(nlohmann::json::array({a.lemma, a.object_id}));
  j["relations"] = nlohmann::json::array();
  for (const auto& r : sg.relations)
    j["relations"].push_back(
        nlohmann::json::array({r.subject_id, r.phrase, r.object_id}));
  return j.dump();
}

SceneGraph scene_graph_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  SceneGraph sg;
  for (const auto& o : j.at("objects"))
    sg.objects.push_back(SgObject{o.at("lemma").get<std::string>(),
                                  o.at("token_index").get<std::size_t>()});
  for (const auto& a : j.at("attributes")) {
    SgAttribute attr;
    attr.lemma = a.at(0).get<std::string>();
    attr.object_id = a.at(1).get<std::size_t>();
    if (attr.object_id >= sg.objects.size())
      throw IndexOutOfRange("attribute object_id out of range");
    sg.attributes.push_back(attr);
  }
  for (const auto& r : j.at("relations")) {
    SgRelation rel;
    rel.subject_id = r.at(0).get<std::size_t>();
    rel.phrase = r.at(1).get<std::string>();
    rel.object_id = r.at(2).get<std::size_t>();
    if (rel.subject_id >= sg.objects.size() ||
        rel.object_id >= sg.objects.size())
      throw IndexOutOfRange("relation endpoint out of range");
    sg.relations.push_back(rel);
  }
  return sg;
}

}  // namespace sgmatch
