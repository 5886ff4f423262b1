#pragma once

// Corpus ingestion and the masking strategies that turn plain sentences into
// supervised infilling examples.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "infill/params.hpp"
#include "infill/template.hpp"

namespace infill {

using Sentence = std::vector<std::string>;

struct IngestStats {
  std::size_t lines = 0;
  std::size_t clauses = 0;
  std::size_t kept = 0;
  std::size_t dropped = 0;
};

/// Sentences within [min_len, max_len] pass through. Longer ones are cut
/// after sentence-internal punctuation and the pieces greedily re-joined while
/// they fit under max_len; pieces outside the bounds are dropped.
std::vector<Sentence> split_clauses(std::span<const std::string> tokens, std::size_t min_len, std::size_t max_len);

/// One sentence per non-empty line.
std::vector<Sentence> ingest_corpus(const std::filesystem::path& path, std::size_t min_len, std::size_t max_len,
                                    bool lowercase = false, IngestStats* stats = nullptr);
std::vector<Sentence> ingest_lines(std::span<const std::string> lines, std::size_t min_len, std::size_t max_len,
                                   bool lowercase = false, IngestStats* stats = nullptr);

/// Uniform integer in [0, n).
std::uint64_t uniform_below(Rng& rng, std::uint64_t n);

/// Uniformly random composition of `total` into `parts` positive integers.
std::vector<std::size_t> random_composition(std::size_t total, std::size_t parts, Rng& rng);

/// Number of tokens to hide: round(rate * len), at least one per blank.
std::size_t mask_budget(std::size_t len, double rate, std::size_t num_blanks);

/// Hides mask_budget() tokens in `num_blanks` contiguous, non-adjacent spans.
/// nullopt when the sentence is too short to hold them.
std::optional<TextExample> mask_random(std::span<const std::string> tokens, double rate, std::size_t num_blanks,
                                       Rng& rng);

struct AnchorRules {
  /// Keep tokens that are all digits, plus a "-" between two such tokens.
  bool numbers = true;
  /// Keep the first underscore-joined capitalised entity (e.g. Toronto_Raptors).
  bool entity = true;
};

/// Token positions kept by the built-in anchor heuristics.
std::vector<std::size_t> select_anchors(std::span<const std::string> tokens, const AnchorRules& rules);

/// Masks every token except `keep`; each masked run becomes one blank.
/// nullopt when nothing is kept or nothing is masked.
std::optional<TextExample> mask_anchor(std::span<const std::string> tokens, std::span<const std::size_t> keep);

/// Built-in preposition and article list.
const std::set<std::string>& default_closed_class_words();

/// Up to `num_blanks` single-token blanks on closed-class words (random
/// choice among candidates); missing blanks are made up with empty masks at
/// random boundaries between two unmasked tokens. nullopt only when even the
/// empty masks do not fit.
std::optional<TextExample> mask_closed_class(std::span<const std::string> tokens, const std::set<std::string>& words,
                                             std::size_t num_blanks, Rng& rng);

enum class MaskStrategy { random, anchor, closed_class };

MaskStrategy parse_mask_strategy(std::string_view s);
std::string_view mask_strategy_name(MaskStrategy s);

struct MaskSpec {
  MaskStrategy strategy = MaskStrategy::random;
  double mask_rate = 0.3;
  std::size_t num_blanks = 1;
  AnchorRules anchors;
  std::set<std::string> word_list = default_closed_class_words();
  std::uint64_t seed = 0;

  void validate() const;
};

struct CorpusStats {
  std::size_t sentences = 0;
  std::size_t examples = 0;
  std::size_t skipped = 0;
  std::size_t vocab_size = 0;
  std::size_t total_tokens = 0;
  std::size_t masked_tokens = 0;
  std::size_t blanks = 0;

  double mask_rate() const { return total_tokens ? double(masked_tokens) / double(total_tokens) : 0.0; }
  double blanks_per_sentence() const { return examples ? double(blanks) / double(examples) : 0.0; }
  std::string to_json() const;
};

struct MaskResult {
  std::vector<TextExample> examples;
  CorpusStats stats;
};

/// Masks every sentence with a seed derived from (spec.seed, sentence index).
/// `annotations`, when given, supplies the anchor positions per sentence.
MaskResult mask_corpus(std::span<const Sentence> sentences, const MaskSpec& spec,
                       const std::vector<std::vector<std::size_t>>* annotations = nullptr);

/// One line per sentence: space-separated 0-based indices of kept tokens.
std::vector<std::vector<std::size_t>> read_annotations(const std::filesystem::path& path);

/// Right-padded rows of token ids with a loss mask over the real tokens.
struct Batch {
  std::vector<std::size_t> indices;
  std::size_t width = 0;
  std::vector<TokenId> ids;          // indices.size() x width
  std::vector<std::uint8_t> mask;    // 1 on real tokens
};

/// Groups sequences into batches of at most `batch_size`. With `shuffle`
/// the order is permuted first.
std::vector<Batch> batchify(std::span<const std::vector<TokenId>> sequences, std::size_t batch_size, TokenId pad_id,
                            Rng* shuffle = nullptr);

}  // namespace infill
