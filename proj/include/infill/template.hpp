#pragma once

// Templates: a sentence cut into alternating known snippets and blanks.
//
// Segments are numbered 1..n left to right. A blank becomes a Filled segment
// once text is written into it; seg_ids never change, so a token's
// (seg_id, offset) position is stable while other blanks are filled.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "infill/vocab.hpp"

namespace infill {

using SegId = int;

enum class SegmentKind { known, blank, filled };

template <class Tok>
struct BasicSegment {
  SegId id = 0;
  SegmentKind kind = SegmentKind::known;
  std::vector<Tok> tokens;

  friend bool operator==(const BasicSegment&, const BasicSegment&) = default;
};

template <class Tok>
class BasicTemplate {
 public:
  using Segment = BasicSegment<Tok>;

  BasicTemplate() = default;

  /// Validates ids (1..n in order), empty blanks, non-empty known segments
  /// and the absence of adjacent known segments.
  explicit BasicTemplate(std::vector<Segment> segments);

  /// Builds a template from (kind, tokens) runs, assigning ids 1..n.
  static BasicTemplate from_runs(std::vector<std::pair<SegmentKind, std::vector<Tok>>> runs);

  const std::vector<Segment>& segments() const { return segments_; }
  std::size_t size() const { return segments_.size(); }
  const Segment& segment(SegId id) const;

  /// The blank set M, ascending.
  std::vector<SegId> blank_ids() const;
  bool complete() const;

  /// Copy of this template with blank `id` replaced by `fill`.
  BasicTemplate update(SegId id, std::vector<Tok> fill) const;

  /// All tokens in order. Requires a complete template.
  std::vector<Tok> reconstruct() const;

  /// Tokens of known and filled segments; blanks are dropped.
  std::vector<Tok> visible_tokens() const;

  friend bool operator==(const BasicTemplate&, const BasicTemplate&) = default;

 private:
  std::vector<Segment> segments_;
};

using TextTemplate = BasicTemplate<std::string>;
using Template = BasicTemplate<TokenId>;

/// Parses whitespace-separated text where `__m__` marks a blank.
TextTemplate parse_template(std::string_view line);
Template parse_template(std::string_view line, const Vocab& vocab);

/// Inverse of parse_template for templates that have not been filled.
std::string render(const TextTemplate& t);

Template encode(const TextTemplate& t, const Vocab& vocab);
TextTemplate decode(const Template& t, const Vocab& vocab);

/// A template together with the golden text of each blank.
template <class Tok>
struct BasicInfillExample {
  BasicTemplate<Tok> templ;
  std::map<SegId, std::vector<Tok>> golden;
  std::vector<Tok> original;

  /// Checks that `golden` covers exactly the blanks and derives `original`.
  static BasicInfillExample make(BasicTemplate<Tok> templ, std::map<SegId, std::vector<Tok>> golden);

  /// The template with golden text written into every blank before `id`.
  BasicTemplate<Tok> golden_prefix_template(SegId id) const;

  friend bool operator==(const BasicInfillExample&, const BasicInfillExample&) = default;
};

using TextExample = BasicInfillExample<std::string>;
using InfillExample = BasicInfillExample<TokenId>;

InfillExample encode(const TextExample& ex, const Vocab& vocab);

/// Recovers golden fills by matching the template's known text against the
/// original sentence. Blanks take the shortest span that still lets the
/// remaining known segments match. nullopt when no alignment exists.
std::optional<std::map<SegId, std::vector<std::string>>> align_golden(const TextTemplate& t,
                                                                     std::span<const std::string> original);

/// Supervised pair line: `template<TAB>original`, followed by one column per
/// blank with its golden fill. Two-column lines recover the fills with
/// align_golden, which may split an ambiguous sentence differently.
std::string pair_line(const TextExample& ex);
TextExample parse_pair_line(std::string_view line);

std::vector<TextExample> read_pairs(const std::filesystem::path& path);
void write_pairs(const std::filesystem::path& path, std::span<const TextExample> examples);

}  // namespace infill
