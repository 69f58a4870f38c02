#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "sgmatch/errors.hpp"

namespace sgmatch {

enum class PosTag { Noun, Adj, Verb, Adp, Det, Conj, Measure, Other };

std::string to_string(PosTag tag);
PosTag pos_tag_from_string(const std::string& name);

struct Token {
  std::string text;  // original surface form
  PosTag pos = PosTag::Other;
  std::size_t index = 0;  // 0-based caption position
};

// Case-insensitive word -> tag map. Measure/container nouns ("pile", "group")
// carry their own tag so the parser can absorb them out of relation spans.
class Lexicon {
 public:
  void add(const std::string& word, PosTag tag);
  bool contains(const std::string& word) const;
  PosTag lookup(const std::string& word) const;  // Other when absent
  bool is_measure(const std::string& word) const;
  const std::map<std::string, PosTag>& entries() const { return entries_; }
  const std::set<std::string>& measure_nouns() const { return measure_nouns_; }

  // One entry per line, `word<TAB>TAG`; '#' starts a comment line.
  static Lexicon from_file(const std::string& path);
  static Lexicon from_string(const std::string& text);

 private:
  std::map<std::string, PosTag> entries_;
  std::set<std::string> measure_nouns_;
};

struct SgObject {
  std::string lemma;
  std::size_t token_index = 0;
};

struct SgAttribute {
  std::string lemma;
  std::size_t object_id = 0;
  // Position of the adjective token in the source caption. Not part of the
  // serialized schema; recovered by lemma match after deserialization.
  int token_index = -1;
};

struct SgRelation {
  std::size_t subject_id = 0;
  std::string phrase;
  std::size_t object_id = 0;
};

struct SceneGraph {
  std::vector<SgObject> objects;
  std::vector<SgAttribute> attributes;
  std::vector<SgRelation> relations;

  bool operator==(const SceneGraph& other) const;
};

struct Triple {
  std::string head;
  std::string relation;
  std::string tail;

  bool operator==(const Triple& other) const = default;
};

// Whitespace/punctuation segmentation; punctuation dropped, casing kept.
// Throws EmptyCaption when no word characters remain.
std::vector<Token> tokenize(const std::string& caption);

// Assigns tags from the lexicon (case-insensitive); unknown words get Other,
// measure nouns get Measure.
std::vector<Token> tag(std::vector<Token> tokens, const Lexicon& lexicon);

// Rule-based extraction over the tagged token stream:
//   R1  every Noun that is not a Measure becomes an object
//   R2  the run of Adj tokens before a noun head (Conj-coordinated, Det
//       skipped) attaches each adjective to that noun
//   R3  consecutive nouns joined by verb/adposition tokens (with only
//       Det/Measure/Adp/Other between) yield a relation; "Det? Measure of"
//       spans are absorbed and excluded from the phrase
//   R4  attributes and relations come out in left-to-right token order
SceneGraph parse_scene_graph(const std::string& caption,
                             const Lexicon& lexicon);
SceneGraph parse_scene_graph(const std::vector<Token>& tagged_tokens);

// Relations map to (subject, phrase, object); attribute pairs normalize to
// (object, "is", attribute). Relations first, then attributes.
std::vector<Triple> scene_graph_to_triples(const SceneGraph& sg);

std::string scene_graph_to_json(const SceneGraph& sg);
SceneGraph scene_graph_from_json(const std::string& json_text);

std::string to_lower(const std::string& s);

}  // namespace sgmatch
