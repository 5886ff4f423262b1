#include "infill/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "infill/error.hpp"

namespace infill {

std::vector<std::string> tokenize(std::string_view line, bool lowercase) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) {
      std::string tok(line.substr(i, j - i));
      if (lowercase) {
        for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
      out.push_back(std::move(tok));
    }
    i = j;
  }
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    s += tokens[i];
  }
  return s;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Vocab::Vocab() {
  for (auto t : kReservedTokens) {
    index_.emplace(std::string(t), static_cast<TokenId>(tokens_.size()));
    tokens_.emplace_back(t);
  }
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < special::count) throw FormatError("vocab has fewer entries than the reserved tokens");
  for (std::size_t i = 0; i < special::count; ++i) {
    if (tokens[i] != kReservedTokens[i]) {
      throw FormatError("vocab entry " + std::to_string(i) + " must be " + std::string(kReservedTokens[i]) +
                        ", found '" + tokens[i] + "'");
    }
  }
  Vocab v;
  for (std::size_t i = special::count; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (t.empty() || t == kBlankMarker) throw FormatError("invalid vocab token on line " + std::to_string(i + 1));
    if (!v.index_.emplace(t, static_cast<TokenId>(i)).second) {
      throw FormatError("duplicate vocab token '" + t + "'");
    }
    v.tokens_.push_back(t);
  }
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read vocab file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return from_tokens(std::move(tokens));
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocab file " + path.string());
  out << serialize();
}

bool Vocab::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

TokenId Vocab::encode(std::string_view token) const {
  if (token == kBlankMarker) return special::mask;
  auto it = index_.find(std::string(token));
  return it == index_.end() ? special::unk : it->second;
}

std::vector<TokenId> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(encode(t));
  return ids;
}

const std::string& Vocab::decode(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocab of size " + std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<std::string> Vocab::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId id : ids) out.push_back(decode(id));
  return out;
}

std::string Vocab::serialize() const {
  std::string s;
  for (const auto& t : tokens_) {
    s += t;
    s += '\n';
  }
  return s;
}

Vocab build_vocab(std::span<const std::vector<std::string>> corpus, std::size_t max_size, std::size_t min_freq) {
  if (corpus.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  if (max_size != 0 && max_size < special::count) {
    throw ConfigError("vocab max size " + std::to_string(max_size) + " is below the " +
                      std::to_string(special::count) + " reserved tokens");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) {
      if (tok == kBlankMarker) continue;
      if (std::find(kReservedTokens.begin(), kReservedTokens.end(), tok) != kReservedTokens.end()) continue;
      ++counts[tok];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // std::map iteration is lexicographic, so a stable sort on count keeps the tie-break.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens(kReservedTokens.begin(), kReservedTokens.end());
  for (const auto& [tok, n] : ranked) {
    if (n < min_freq) break;
    if (max_size != 0 && tokens.size() >= max_size) break;
    tokens.push_back(tok);
  }
  return Vocab::from_tokens(std::move(tokens));
}

}  // namespace infill
