#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sgmatch/rng.hpp"
#include "sgmatch/textgraph.hpp"

namespace sgmatch {

enum class SwapKind { RelationSwap, AttributeSwap };

// One legal swap: either a relation whose endpoints exchange, or a pair of
// attributes on distinct objects whose adjectives exchange. Attribute pairs
// on the same object are never candidates.
struct SwapCandidate {
  SwapKind kind = SwapKind::RelationSwap;
  std::size_t relation_index = 0;          // RelationSwap
  std::size_t attr_i = 0, attr_j = 0;      // AttributeSwap

  bool operator==(const SwapCandidate& other) const = default;
};

struct NegativeSample {
  std::string negative_caption;
  SwapCandidate swap;
  std::string source_caption;
};

// One RelationSwap per relation, then one AttributeSwap per unordered pair
// of attributes with distinct object ids and distinct lemmas, in index order.
std::vector<SwapCandidate> enumerate_swaps(const SceneGraph& sg);

// RelationSwap: (O1,R,O2) -> (O2,R,O1). AttributeSwap: (A1,O1),(A2,O2) ->
// (A2,O1),(A1,O2). Applying the same candidate twice restores the graph.
SceneGraph apply_swap(const SceneGraph& sg, const SwapCandidate& swap);

// Exchanges the two surface tokens named by the swap, then repairs a/an
// agreement on articles immediately before the swapped positions and keeps
// the caption's sentence-initial capitalization.
std::string render_negative(const std::string& caption,
                            const std::vector<Token>& tokens,
                            const SceneGraph& sg, const SwapCandidate& swap);

// Uniform draw over candidates whose rendering differs from the source.
// Returns nullopt when nothing qualifies.
std::optional<NegativeSample> try_sample_negative(const std::string& caption,
                                                  const SceneGraph& sg,
                                                  SeededRng& rng);

// Throwing wrapper: NoSwapAvailable signals the sample trains on the
// contrastive term alone.
NegativeSample sample_negative(const std::string& caption,
                               const SceneGraph& sg, SeededRng& rng);

// All candidates that render to a caption different from the source.
std::vector<NegativeSample> all_negatives(const std::string& caption,
                                          const SceneGraph& sg);

// Ablation baseline: swap two uniformly chosen distinct word positions,
// ignoring the scene graph. Retries a few times if the result equals the
// source (identical words picked).
std::optional<NegativeSample> random_word_swap(const std::string& caption,
                                               SeededRng& rng);

// Lowercased word multiset with "an" canonicalized to "a"; equality of these
// multisets is the preservation invariant for every produced negative.
std::vector<std::string> canonical_word_multiset(const std::string& caption);

std::string swap_kind_name(SwapKind kind);

}  // namespace sgmatch
