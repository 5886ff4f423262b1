#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace infill {

using TokenId = int;

/// Reserved ids, pinned so checkpoints stay portable across vocab rebuilds.
namespace special {
inline constexpr TokenId pad = 0;
inline constexpr TokenId unk = 1;
inline constexpr TokenId bos = 2;
inline constexpr TokenId eos = 3;
inline constexpr TokenId bob = 4;
inline constexpr TokenId eob = 5;
inline constexpr TokenId mask = 6;
inline constexpr std::size_t count = 7;
}  // namespace special

inline constexpr std::array<std::string_view, special::count> kReservedTokens{
    "<pad>", "<unk>", "<bos>", "<eos>", "<bob>", "<eob>", "<mask>"};

/// Blank placeholder as written in template text.
inline constexpr std::string_view kBlankMarker = "__m__";

/// Whitespace tokenizer; optionally lowercases ASCII.
std::vector<std::string> tokenize(std::string_view line, bool lowercase = false);

std::string join_tokens(std::span<const std::string> tokens);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

class Vocab {
 public:
  /// Reserved tokens only.
  Vocab();

  /// `tokens[i]` gets id i. The first seven entries must be the reserved
  /// tokens in order and no token may repeat.
  static Vocab from_tokens(std::vector<std::string> tokens);

  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool contains(std::string_view token) const;

  /// Unknown tokens map to <unk>; the blank marker maps to <mask>.
  TokenId encode(std::string_view token) const;
  std::vector<TokenId> encode(std::span<const std::string> tokens) const;

  const std::string& decode(TokenId id) const;
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

  /// File form: one token per line, line number = id.
  std::string serialize() const;
  /// Hash of serialize(); recorded in checkpoint manifests.
  std::uint64_t content_hash() const { return fnv1a(serialize()); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Keeps the most frequent tokens (ties broken lexicographically) up to
/// `max_size` entries including the reserved ones; `max_size == 0` means no
/// cap. Tokens seen fewer than `min_freq` times are dropped.
Vocab build_vocab(std::span<const std::vector<std::string>> corpus, std::size_t max_size,
                  std::size_t min_freq = 1);

}  // namespace infill
