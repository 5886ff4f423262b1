#include "infill/template.hpp"

#include <algorithm>
#include <fstream>

#include "infill/error.hpp"

namespace infill {
namespace {

bool forbidden_fill_token(TokenId id) {
  return id != special::unk && id >= 0 && static_cast<std::size_t>(id) < special::count;
}

bool forbidden_fill_token(const std::string& tok) {
  if (tok == kBlankMarker) return true;
  return std::find(kReservedTokens.begin(), kReservedTokens.end(), tok) != kReservedTokens.end() &&
         tok != kReservedTokens[special::unk];
}

}  // namespace

template <class Tok>
BasicTemplate<Tok>::BasicTemplate(std::vector<Segment> segments) : segments_(std::move(segments)) {
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const Segment& s = segments_[i];
    if (s.id != static_cast<SegId>(i + 1)) {
      throw ContractError("segment ids must run 1..n, found " + std::to_string(s.id) + " at position " +
                          std::to_string(i + 1));
    }
    if (s.kind == SegmentKind::blank && !s.tokens.empty()) throw ContractError("blank segment holds tokens");
    if (s.kind == SegmentKind::known && s.tokens.empty()) throw ContractError("known segment is empty");
    if (i > 0 && s.kind == SegmentKind::known && segments_[i - 1].kind == SegmentKind::known) {
      throw ContractError("adjacent known segments must be merged");
    }
  }
}

template <class Tok>
BasicTemplate<Tok> BasicTemplate<Tok>::from_runs(std::vector<std::pair<SegmentKind, std::vector<Tok>>> runs) {
  std::vector<Segment> segs;
  segs.reserve(runs.size());
  for (auto& [kind, toks] : runs) {
    segs.push_back(Segment{static_cast<SegId>(segs.size() + 1), kind, std::move(toks)});
  }
  return BasicTemplate(std::move(segs));
}

template <class Tok>
const typename BasicTemplate<Tok>::Segment& BasicTemplate<Tok>::segment(SegId id) const {
  if (id < 1 || static_cast<std::size_t>(id) > segments_.size()) {
    throw IndexError("segment " + std::to_string(id) + " outside 1.." + std::to_string(segments_.size()));
  }
  return segments_[static_cast<std::size_t>(id - 1)];
}

template <class Tok>
std::vector<SegId> BasicTemplate<Tok>::blank_ids() const {
  std::vector<SegId> ids;
  for (const auto& s : segments_) {
    if (s.kind == SegmentKind::blank) ids.push_back(s.id);
  }
  return ids;
}

template <class Tok>
bool BasicTemplate<Tok>::complete() const {
  return std::none_of(segments_.begin(), segments_.end(),
                      [](const Segment& s) { return s.kind == SegmentKind::blank; });
}

template <class Tok>
BasicTemplate<Tok> BasicTemplate<Tok>::update(SegId id, std::vector<Tok> fill) const {
  if (segment(id).kind != SegmentKind::blank) {
    throw ContractError("segment " + std::to_string(id) + " is not a blank");
  }
  for (const auto& tok : fill) {
    if (forbidden_fill_token(tok)) throw ContractError("fill for segment " + std::to_string(id) + " holds a control token");
  }
  BasicTemplate next = *this;
  Segment& s = next.segments_[static_cast<std::size_t>(id - 1)];
  s.kind = SegmentKind::filled;
  s.tokens = std::move(fill);
  return next;
}

template <class Tok>
std::vector<Tok> BasicTemplate<Tok>::reconstruct() const {
  if (!complete()) throw ContractError("cannot reconstruct a template that still has blanks");
  return visible_tokens();
}

template <class Tok>
std::vector<Tok> BasicTemplate<Tok>::visible_tokens() const {
  std::vector<Tok> out;
  for (const auto& s : segments_) out.insert(out.end(), s.tokens.begin(), s.tokens.end());
  return out;
}

template <class Tok>
BasicInfillExample<Tok> BasicInfillExample<Tok>::make(BasicTemplate<Tok> templ,
                                                      std::map<SegId, std::vector<Tok>> golden) {
  const auto blanks = templ.blank_ids();
  if (golden.size() != blanks.size()) throw ContractError("golden fills do not match the template's blanks");
  BasicTemplate<Tok> full = templ;
  for (SegId id : blanks) {
    auto it = golden.find(id);
    if (it == golden.end()) throw ContractError("no golden fill for blank " + std::to_string(id));
    full = full.update(id, it->second);
  }
  BasicInfillExample ex;
  ex.original = full.reconstruct();
  ex.templ = std::move(templ);
  ex.golden = std::move(golden);
  return ex;
}

template <class Tok>
BasicTemplate<Tok> BasicInfillExample<Tok>::golden_prefix_template(SegId id) const {
  BasicTemplate<Tok> t = templ;
  for (const auto& [seg, fill] : golden) {
    if (seg >= id) break;
    t = t.update(seg, fill);
  }
  return t;
}

template class BasicTemplate<std::string>;
template class BasicTemplate<TokenId>;
template struct BasicInfillExample<std::string>;
template struct BasicInfillExample<TokenId>;

TextTemplate parse_template(std::string_view line) {
  const auto tokens = tokenize(line);
  std::vector<std::pair<SegmentKind, std::vector<std::string>>> runs;
  for (const auto& tok : tokens) {
    if (tok == kBlankMarker) {
      if (!runs.empty() && runs.back().first == SegmentKind::blank) {
        throw FormatError("adjacent blanks in template: '" + std::string(line) + "'");
      }
      runs.emplace_back(SegmentKind::blank, std::vector<std::string>{});
    } else {
      if (runs.empty() || runs.back().first != SegmentKind::known) runs.emplace_back(SegmentKind::known, std::vector<std::string>{});
      runs.back().second.push_back(tok);
    }
  }
  return TextTemplate::from_runs(std::move(runs));
}

Template parse_template(std::string_view line, const Vocab& vocab) {
  return encode(parse_template(line), vocab);
}

std::string render(const TextTemplate& t) {
  std::vector<std::string> toks;
  for (const auto& s : t.segments()) {
    if (s.kind == SegmentKind::blank) {
      toks.emplace_back(kBlankMarker);
    } else {
      toks.insert(toks.end(), s.tokens.begin(), s.tokens.end());
    }
  }
  return join_tokens(toks);
}

Template encode(const TextTemplate& t, const Vocab& vocab) {
  std::vector<Template::Segment> segs;
  for (const auto& s : t.segments()) segs.push_back({s.id, s.kind, vocab.encode(s.tokens)});
  return Template(std::move(segs));
}

TextTemplate decode(const Template& t, const Vocab& vocab) {
  std::vector<TextTemplate::Segment> segs;
  for (const auto& s : t.segments()) segs.push_back({s.id, s.kind, vocab.decode(s.tokens)});
  return TextTemplate(std::move(segs));
}

InfillExample encode(const TextExample& ex, const Vocab& vocab) {
  std::map<SegId, std::vector<TokenId>> golden;
  for (const auto& [id, fill] : ex.golden) golden.emplace(id, vocab.encode(fill));
  return InfillExample::make(encode(ex.templ, vocab), std::move(golden));
}

namespace {

bool align_from(const std::vector<TextTemplate::Segment>& segs, std::size_t si, std::span<const std::string> orig,
                std::size_t pos, std::map<SegId, std::vector<std::string>>& out) {
  if (si == segs.size()) return pos == orig.size();
  const auto& s = segs[si];
  if (s.kind != SegmentKind::blank) {
    if (pos + s.tokens.size() > orig.size()) return false;
    if (!std::equal(s.tokens.begin(), s.tokens.end(), orig.begin() + static_cast<std::ptrdiff_t>(pos))) return false;
    return align_from(segs, si + 1, orig, pos + s.tokens.size(), out);
  }
  for (std::size_t len = 0; pos + len <= orig.size(); ++len) {
    out[s.id] = std::vector<std::string>(orig.begin() + static_cast<std::ptrdiff_t>(pos),
                                         orig.begin() + static_cast<std::ptrdiff_t>(pos + len));
    if (align_from(segs, si + 1, orig, pos + len, out)) return true;
  }
  out.erase(s.id);
  return false;
}

}  // namespace

std::optional<std::map<SegId, std::vector<std::string>>> align_golden(const TextTemplate& t,
                                                                     std::span<const std::string> original) {
  std::map<SegId, std::vector<std::string>> golden;
  if (!align_from(t.segments(), 0, original, 0, golden)) return std::nullopt;
  return golden;
}

std::string pair_line(const TextExample& ex) {
  std::string line = render(ex.templ) + '\t' + join_tokens(ex.original);
  for (const auto& [seg, fill] : ex.golden) line += '\t' + join_tokens(fill);
  return line;
}

TextExample parse_pair_line(std::string_view line) {
  std::vector<std::string_view> cols;
  for (std::size_t start = 0;;) {
    const auto tab = line.find('\t', start);
    cols.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  if (cols.size() < 2) throw FormatError("pair line lacks a tab separator");
  auto templ = parse_template(cols[0]);
  const auto original = tokenize(cols[1]);
  const auto blanks = templ.blank_ids();
  if (cols.size() == 2) {
    auto golden = align_golden(templ, original);
    if (!golden) throw FormatError("template does not match its original sentence: '" + std::string(line) + "'");
    return TextExample::make(std::move(templ), std::move(*golden));
  }
  if (cols.size() != 2 + blanks.size()) {
    throw FormatError("pair line has " + std::to_string(cols.size() - 2) + " fill columns for " +
                      std::to_string(blanks.size()) + " blanks");
  }
  std::map<SegId, std::vector<std::string>> golden;
  for (std::size_t i = 0; i < blanks.size(); ++i) golden.emplace(blanks[i], tokenize(cols[2 + i]));
  auto ex = TextExample::make(std::move(templ), std::move(golden));
  if (ex.original != original) {
    throw FormatError("fills do not reproduce the original sentence: '" + std::string(line) + "'");
  }
  return ex;
}

std::vector<TextExample> read_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read pair file " + path.string());
  std::vector<TextExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      out.push_back(parse_pair_line(line));
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_pairs(const std::filesystem::path& path, std::span<const TextExample> examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write pair file " + path.string());
  for (const auto& ex : examples) out << pair_line(ex) << '\n';
}

}  // namespace infill
