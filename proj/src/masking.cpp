#include "infill/masking.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "infill/error.hpp"

namespace infill {
namespace {

bool is_clause_break(const std::string& tok) {
  return tok == "," || tok == ";" || tok == ":" || tok == "." || tok == "!" || tok == "?";
}

bool is_number(const std::string& tok) {
  static const std::regex re("[0-9]+");
  return std::regex_match(tok, re);
}

bool is_entity(const std::string& tok) {
  static const std::regex re("[A-Z][A-Za-z0-9]*(_[A-Za-z0-9]+)+");
  return std::regex_match(tok, re);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Builds the example from a per-token mask plus empty masks before given
// token positions.
TextExample build_example(std::span<const std::string> tokens, const std::vector<bool>& masked,
                          const std::set<std::size_t>& empty_before) {
  std::vector<std::pair<SegmentKind, std::vector<std::string>>> runs;
  std::vector<std::vector<std::string>> fills;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (empty_before.count(i)) {
      runs.emplace_back(SegmentKind::blank, std::vector<std::string>{});
      fills.emplace_back();
    }
    if (masked[i]) {
      if (runs.empty() || runs.back().first != SegmentKind::blank || (i > 0 && !masked[i - 1])) {
        runs.emplace_back(SegmentKind::blank, std::vector<std::string>{});
        fills.emplace_back();
      }
      fills.back().push_back(tokens[i]);
    } else {
      if (runs.empty() || runs.back().first != SegmentKind::known) runs.emplace_back(SegmentKind::known, std::vector<std::string>{});
      runs.back().second.push_back(tokens[i]);
    }
  }
  auto templ = TextTemplate::from_runs(std::move(runs));
  std::map<SegId, std::vector<std::string>> golden;
  std::size_t k = 0;
  for (SegId id : templ.blank_ids()) golden.emplace(id, std::move(fills[k++]));
  return TextExample::make(std::move(templ), std::move(golden));
}

}  // namespace

std::vector<Sentence> split_clauses(std::span<const std::string> tokens, std::size_t min_len, std::size_t max_len) {
  std::vector<Sentence> out;
  auto emit = [&](Sentence s) {
    if (s.size() >= min_len && s.size() <= max_len) out.push_back(std::move(s));
  };
  if (tokens.size() <= max_len) {
    emit(Sentence(tokens.begin(), tokens.end()));
    return out;
  }
  std::vector<Sentence> pieces(1);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    pieces.back().push_back(tokens[i]);
    if (is_clause_break(tokens[i]) && i + 1 < tokens.size()) pieces.emplace_back();
  }
  Sentence cur;
  for (auto& piece : pieces) {
    if (!cur.empty() && cur.size() + piece.size() > max_len) {
      emit(std::move(cur));
      cur.clear();
    }
    cur.insert(cur.end(), piece.begin(), piece.end());
  }
  if (!cur.empty()) emit(std::move(cur));
  return out;
}

std::vector<Sentence> ingest_lines(std::span<const std::string> lines, std::size_t min_len, std::size_t max_len,
                                   bool lowercase, IngestStats* stats) {
  if (min_len > max_len) throw ConfigError("data.min_len exceeds data.max_len");
  IngestStats st;
  std::vector<Sentence> out;
  for (const auto& line : lines) {
    const auto toks = tokenize(line, lowercase);
    if (toks.empty()) continue;
    ++st.lines;
    auto clauses = split_clauses(toks, min_len, max_len);
    st.kept += clauses.size();
    for (auto& c : clauses) out.push_back(std::move(c));
  }
  st.clauses = st.kept;
  st.dropped = st.lines > st.kept ? st.lines - st.kept : 0;
  if (stats) *stats = st;
  return out;
}

std::vector<Sentence> ingest_corpus(const std::filesystem::path& path, std::size_t min_len, std::size_t max_len,
                                    bool lowercase, IngestStats* stats) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read corpus " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return ingest_lines(lines, min_len, max_len, lowercase, stats);
}

std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  if (n == 0) throw ContractError("uniform_below(0)");
  const std::uint64_t limit = Rng::max() - (Rng::max() % n);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

std::vector<std::size_t> random_composition(std::size_t total, std::size_t parts, Rng& rng) {
  if (parts == 0 || total < parts) throw ContractError("composition needs total >= parts >= 1");
  // Choose parts-1 distinct cut points in 1..total-1.
  std::vector<std::size_t> points(total - 1);
  std::iota(points.begin(), points.end(), std::size_t{1});
  for (std::size_t i = 0; i + 1 < parts; ++i) {
    const std::size_t j = i + uniform_below(rng, points.size() - i);
    std::swap(points[i], points[j]);
  }
  std::vector<std::size_t> cuts(points.begin(), points.begin() + static_cast<std::ptrdiff_t>(parts - 1));
  std::sort(cuts.begin(), cuts.end());
  std::vector<std::size_t> sizes;
  std::size_t prev = 0;
  for (std::size_t c : cuts) {
    sizes.push_back(c - prev);
    prev = c;
  }
  sizes.push_back(total - prev);
  return sizes;
}

std::size_t mask_budget(std::size_t len, double rate, std::size_t num_blanks) {
  const auto rounded = static_cast<std::size_t>(std::llround(rate * static_cast<double>(len)));
  return std::max(rounded, num_blanks);
}

std::optional<TextExample> mask_random(std::span<const std::string> tokens, double rate, std::size_t num_blanks,
                                       Rng& rng) {
  const std::size_t n = tokens.size();
  if (num_blanks == 0) throw ConfigError("mask.blanks must be at least 1");
  const std::size_t budget = mask_budget(n, rate, num_blanks);
  if (budget > n || n - budget < num_blanks - 1) return std::nullopt;

  const auto spans = random_composition(budget, num_blanks, rng);
  // Known tokens go into num_blanks + 1 gaps; inner gaps need at least one.
  const std::size_t free_known = n - budget - (num_blanks - 1);
  auto gaps = random_composition(free_known + num_blanks + 1, num_blanks + 1, rng);
  for (auto& g : gaps) g -= 1;
  for (std::size_t i = 1; i < num_blanks; ++i) gaps[i] += 1;

  std::vector<bool> masked(n, false);
  std::size_t pos = 0;
  for (std::size_t b = 0; b < num_blanks; ++b) {
    pos += gaps[b];
    for (std::size_t j = 0; j < spans[b]; ++j) masked[pos + j] = true;
    pos += spans[b];
  }
  return build_example(tokens, masked, {});
}

std::vector<std::size_t> select_anchors(std::span<const std::string> tokens, const AnchorRules& rules) {
  std::set<std::size_t> keep;
  if (rules.numbers) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (is_number(tokens[i])) keep.insert(i);
    }
    for (std::size_t i = 1; i + 1 < tokens.size(); ++i) {
      if (tokens[i] == "-" && is_number(tokens[i - 1]) && is_number(tokens[i + 1])) keep.insert(i);
    }
  }
  if (rules.entity) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (is_entity(tokens[i])) {
        keep.insert(i);
        break;
      }
    }
  }
  return {keep.begin(), keep.end()};
}

std::optional<TextExample> mask_anchor(std::span<const std::string> tokens, std::span<const std::size_t> keep) {
  if (keep.empty()) return std::nullopt;
  std::vector<bool> masked(tokens.size(), true);
  for (std::size_t i : keep) {
    if (i >= tokens.size()) throw IndexError("anchor index " + std::to_string(i) + " past sentence end");
    masked[i] = false;
  }
  if (std::none_of(masked.begin(), masked.end(), [](bool b) { return b; })) return std::nullopt;
  return build_example(tokens, masked, {});
}

const std::set<std::string>& default_closed_class_words() {
  static const std::set<std::string> words{
      "a",     "an",   "the",  "in",     "at",      "on",    "of",    "to",      "for",  "with",
      "by",    "from", "into", "onto",   "upon",    "about", "over",  "under",   "after", "before",
      "above", "below", "off", "out",    "through", "across", "among", "between", "behind", "beside",
      "near",  "since", "till", "until", "toward",  "towards", "within", "without", "against", "along",
      "around", "beyond", "during", "inside", "outside", "up", "down"};
  return words;
}

std::optional<TextExample> mask_closed_class(std::span<const std::string> tokens, const std::set<std::string>& words,
                                             std::size_t num_blanks, Rng& rng) {
  const std::size_t n = tokens.size();
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    if (words.count(lower(tokens[i]))) candidates.push_back(i);
  }
  for (std::size_t i = 0; i + 1 < candidates.size(); ++i) {
    std::swap(candidates[i], candidates[i + uniform_below(rng, candidates.size() - i)]);
  }
  std::vector<bool> masked(n, false);
  std::size_t chosen = 0;
  for (std::size_t c : candidates) {
    if (chosen == num_blanks) break;
    if ((c > 0 && masked[c - 1]) || (c + 1 < n && masked[c + 1])) continue;
    masked[c] = true;
    ++chosen;
  }

  std::set<std::size_t> empty_before;
  while (chosen < num_blanks) {
    std::vector<std::size_t> open;
    for (std::size_t b = 1; b < n; ++b) {
      if (!masked[b - 1] && !masked[b] && !empty_before.count(b)) open.push_back(b);
    }
    if (open.empty()) return std::nullopt;
    empty_before.insert(open[uniform_below(rng, open.size())]);
    ++chosen;
  }
  return build_example(tokens, masked, empty_before);
}

MaskStrategy parse_mask_strategy(std::string_view s) {
  if (s == "random") return MaskStrategy::random;
  if (s == "anchor") return MaskStrategy::anchor;
  if (s == "closed_class") return MaskStrategy::closed_class;
  throw ConfigError("mask.strategy must be random, anchor or closed_class, got '" + std::string(s) + "'");
}

std::string_view mask_strategy_name(MaskStrategy s) {
  switch (s) {
    case MaskStrategy::anchor: return "anchor";
    case MaskStrategy::closed_class: return "closed_class";
    default: return "random";
  }
}

void MaskSpec::validate() const {
  if (num_blanks < 1) throw ConfigError("mask.blanks must be at least 1");
  if (strategy == MaskStrategy::random && !(mask_rate > 0.0 && mask_rate < 1.0)) {
    throw ConfigError("mask.rate must lie strictly between 0 and 1");
  }
  if (strategy == MaskStrategy::closed_class && word_list.empty()) throw ConfigError("closed-class word list is empty");
}

std::string CorpusStats::to_json() const {
  nlohmann::ordered_json j;
  j["sentences"] = sentences;
  j["examples"] = examples;
  j["skipped"] = skipped;
  j["vocab_size"] = vocab_size;
  j["total_tokens"] = total_tokens;
  j["masked_tokens"] = masked_tokens;
  j["mask_rate"] = mask_rate();
  j["blanks"] = blanks;
  j["blanks_per_sentence"] = blanks_per_sentence();
  return j.dump(2) + "\n";
}

MaskResult mask_corpus(std::span<const Sentence> sentences, const MaskSpec& spec,
                       const std::vector<std::vector<std::size_t>>* annotations) {
  spec.validate();
  if (annotations && annotations->size() != sentences.size()) {
    throw DataError("annotation file has " + std::to_string(annotations->size()) + " lines for " +
                    std::to_string(sentences.size()) + " sentences");
  }
  MaskResult res;
  std::unordered_set<std::string> types;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const Sentence& s = sentences[i];
    Rng rng(mix_seed(spec.seed, i));
    std::optional<TextExample> ex;
    switch (spec.strategy) {
      case MaskStrategy::random:
        ex = mask_random(s, spec.mask_rate, spec.num_blanks, rng);
        break;
      case MaskStrategy::anchor: {
        const auto keep = annotations ? (*annotations)[i] : select_anchors(s, spec.anchors);
        ex = mask_anchor(s, keep);
        break;
      }
      case MaskStrategy::closed_class:
        ex = mask_closed_class(s, spec.word_list, spec.num_blanks, rng);
        break;
    }
    ++res.stats.sentences;
    if (!ex) {
      ++res.stats.skipped;
      continue;
    }
    for (const auto& t : s) types.insert(t);
    res.stats.total_tokens += s.size();
    for (const auto& [id, fill] : ex->golden) res.stats.masked_tokens += fill.size();
    res.stats.blanks += ex->golden.size();
    res.examples.push_back(std::move(*ex));
  }
  res.stats.examples = res.examples.size();
  res.stats.vocab_size = types.size();
  return res;
}

std::vector<std::vector<std::size_t>> read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read annotation file " + path.string());
  std::vector<std::vector<std::size_t>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::vector<std::size_t> idx;
    for (const auto& tok : tokenize(line)) {
      if (tok.find_first_not_of("0123456789") != std::string::npos) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad index '" + tok + "'");
      }
      idx.push_back(static_cast<std::size_t>(std::stoull(tok)));
    }
    out.push_back(std::move(idx));
  }
  return out;
}

std::vector<Batch> batchify(std::span<const std::vector<TokenId>> sequences, std::size_t batch_size, TokenId pad_id,
                            Rng* shuffle) {
  if (sequences.empty()) throw ContractError("batchify needs at least one sequence");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<std::size_t> order(sequences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      std::swap(order[i], order[i + uniform_below(*shuffle, order.size() - i)]);
    }
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    Batch b;
    const std::size_t end = std::min(order.size(), start + batch_size);
    b.indices.assign(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
    for (std::size_t i : b.indices) b.width = std::max(b.width, sequences[i].size());
    b.ids.assign(b.indices.size() * b.width, pad_id);
    b.mask.assign(b.indices.size() * b.width, 0);
    for (std::size_t r = 0; r < b.indices.size(); ++r) {
      const auto& seq = sequences[b.indices[r]];
      for (std::size_t c = 0; c < seq.size(); ++c) {
        b.ids[r * b.width + c] = seq[c];
        b.mask[r * b.width + c] = 1;
      }
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace infill
