#include "infill/position.hpp"

#include <cmath>
#include <string>

#include "infill/error.hpp"

namespace infill {

PositionKind parse_position_kind(std::string_view s) {
  if (s == "sinusoidal") return PositionKind::sinusoidal;
  if (s == "learned") return PositionKind::learned;
  throw ConfigError("position.kind must be sinusoidal or learned, got '" + std::string(s) + "'");
}

std::string_view position_kind_name(PositionKind k) {
  return k == PositionKind::learned ? "learned" : "sinusoidal";
}

std::int64_t position_index(int seg_id, int offset_id, int base) {
  if (base < 1) throw ConfigError("position base must be positive");
  if (seg_id < 0) throw IndexError("negative seg_id " + std::to_string(seg_id));
  if (offset_id < 1 || offset_id > base) {
    throw PositionOverflow("offset " + std::to_string(offset_id) + " in segment " + std::to_string(seg_id) +
                           " exceeds position base " + std::to_string(base));
  }
  return static_cast<std::int64_t>(seg_id) * base + offset_id;
}

std::vector<double> positional_encoding(std::int64_t pos, std::size_t d_model) {
  if (d_model == 0 || d_model % 2 != 0) {
    throw ConfigError("d_model must be even for sinusoidal encodings, got " + std::to_string(d_model));
  }
  std::vector<double> pe(d_model);
  for (std::size_t i = 0; i < d_model; i += 2) {
    const double angle = static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d_model));
    pe[i] = std::sin(angle);
    pe[i + 1] = std::cos(angle);
  }
  return pe;
}

template <class T>
Tensor<T> positional_encodings(std::span<const PositionIndex> positions, int base, std::size_t d_model) {
  Tensor<T> out({positions.size(), d_model});
  for (std::size_t r = 0; r < positions.size(); ++r) {
    const auto pe = positional_encoding(position_index(positions[r].seg_id, positions[r].offset_id, base), d_model);
    for (std::size_t c = 0; c < d_model; ++c) out(r, c) = static_cast<T>(pe[c]);
  }
  return out;
}

std::vector<PositionedToken> template_layout(const Template& t) {
  std::vector<PositionedToken> out;
  out.push_back({special::bos, {0, 1}});
  for (const auto& s : t.segments()) {
    if (s.kind == SegmentKind::blank) {
      out.push_back({special::mask, {s.id, 1}});
      continue;
    }
    for (std::size_t j = 0; j < s.tokens.size(); ++j) {
      out.push_back({s.tokens[j], {s.id, static_cast<int>(j + 1)}});
    }
  }
  out.push_back({special::eos, {static_cast<int>(t.size()) + 1, 1}});
  return out;
}

std::vector<PositionedToken> blank_layout(SegId seg_id, std::span<const TokenId> decoder_input) {
  std::vector<PositionedToken> out;
  out.reserve(decoder_input.size());
  for (std::size_t j = 0; j < decoder_input.size(); ++j) {
    out.push_back({decoder_input[j], {seg_id, static_cast<int>(j + 1)}});
  }
  return out;
}

template <class T>
Tensor<T> encode_sequence(std::span<const PositionedToken> tokens, int base, const Tensor<T>& embeddings) {
  if (embeddings.rank() != 2) throw DimensionError("embedding table must be a matrix");
  const std::size_t d = embeddings.cols();
  Tensor<T> out({tokens.size(), d});
  for (std::size_t r = 0; r < tokens.size(); ++r) {
    const TokenId id = tokens[r].token;
    if (id < 0 || static_cast<std::size_t>(id) >= embeddings.rows()) {
      throw IndexError("token id " + std::to_string(id) + " outside embedding table");
    }
    const auto pe = positional_encoding(position_index(tokens[r].pos.seg_id, tokens[r].pos.offset_id, base), d);
    for (std::size_t c = 0; c < d; ++c) out(r, c) = embeddings(static_cast<std::size_t>(id), c) + static_cast<T>(pe[c]);
  }
  return out;
}

template Tensor<float> positional_encodings(std::span<const PositionIndex>, int, std::size_t);
template Tensor<double> positional_encodings(std::span<const PositionIndex>, int, std::size_t);
template Tensor<float> encode_sequence(std::span<const PositionedToken>, int, const Tensor<float>&);
template Tensor<double> encode_sequence(std::span<const PositionedToken>, int, const Tensor<double>&);

}  // namespace infill
