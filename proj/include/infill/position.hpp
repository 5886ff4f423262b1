#pragma once

// Segment-aware positions. A token is addressed by (seg_id, offset_id) and
// the pair is flattened to pos = seg_id * base + offset_id before the usual
// sinusoidal encoding. With 1 <= offset_id <= base the flattening is
// injective.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "infill/template.hpp"
#include "infill/tensor.hpp"

namespace infill {

struct PositionIndex {
  int seg_id = 0;
  int offset_id = 1;

  friend bool operator==(const PositionIndex&, const PositionIndex&) = default;
};

enum class PositionKind { sinusoidal, learned };

PositionKind parse_position_kind(std::string_view s);
std::string_view position_kind_name(PositionKind k);

/// seg_id * base + offset_id. Throws PositionOverflow when offset_id falls
/// outside [1, base].
std::int64_t position_index(int seg_id, int offset_id, int base);

/// Sinusoidal encoding of one flattened position (d_model must be even).
std::vector<double> positional_encoding(std::int64_t pos, std::size_t d_model);

/// Rows of sinusoidal encodings for a list of positions.
template <class T>
Tensor<T> positional_encodings(std::span<const PositionIndex> positions, int base, std::size_t d_model);

/// A token with its segment-aware position.
struct PositionedToken {
  TokenId token = 0;
  PositionIndex pos;
};

/// Template tokens laid out for attention memory: <bos> at (0, 1), each
/// known/filled segment i at (i, 1..o_i), each blank as one <mask> at (i, 1),
/// then <eos> at (n + 1, 1).
std::vector<PositionedToken> template_layout(const Template& t);

/// Decoder inputs for blank `seg_id`: token j (0-based, <bob> first) sits at
/// (seg_id, j + 1), independent of how other blanks are filled.
std::vector<PositionedToken> blank_layout(SegId seg_id, std::span<const TokenId> decoder_input);

/// Word embedding rows plus sinusoidal position encodings.
template <class T>
Tensor<T> encode_sequence(std::span<const PositionedToken> tokens, int base, const Tensor<T>& embeddings);

}  // namespace infill
