#include "infill/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "infill/error.hpp"
#include "infill/masking.hpp"
#include "infill/parallel.hpp"

namespace infill {
namespace {

// log-softmax of one logits row, in double.
std::vector<double> log_softmax_row(const Tensor<double>& logits, std::size_t r) {
  const std::size_t v = logits.cols();
  std::vector<double> out(v);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < v; ++c) mx = std::max(mx, logits(r, c));
  double z = 0.0;
  for (std::size_t c = 0; c < v; ++c) z += std::exp(logits(r, c) - mx);
  const double lz = mx + std::log(z);
  for (std::size_t c = 0; c < v; ++c) out[c] = logits(r, c) - lz;
  return out;
}

template <class T>
Tensor<double> eval_logits(const InfillModel<T>& model, const Template& t, SegId seg, std::span<const TokenId> input) {
  Tape<T> tape;
  ParamBinding<T> binding(tape, model.params(), false);
  ForwardContext<T> ctx{tape, binding, false, nullptr};
  return model.blank_logits(ctx, t, seg, input).value().template cast<double>();
}

TokenId choose(const std::vector<double>& logp, const DecodeOptions& opt, Rng& rng) {
  if (opt.mode == DecodeMode::greedy) {
    TokenId best = -1;
    for (std::size_t c = 0; c < logp.size(); ++c) {
      const auto id = static_cast<TokenId>(c);
      if (is_forbidden_output(id)) continue;
      if (best < 0 || logp[c] > logp[static_cast<std::size_t>(best)]) best = id;
    }
    return best;
  }
  std::vector<double> w(logp.size(), 0.0);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < logp.size(); ++c) {
    if (!is_forbidden_output(static_cast<TokenId>(c))) mx = std::max(mx, logp[c] / opt.temperature);
  }
  double z = 0.0;
  for (std::size_t c = 0; c < logp.size(); ++c) {
    if (is_forbidden_output(static_cast<TokenId>(c))) continue;
    w[c] = std::exp(logp[c] / opt.temperature - mx);
    z += w[c];
  }
  double u = uniform01(rng) * z;
  TokenId last = -1;
  for (std::size_t c = 0; c < w.size(); ++c) {
    if (w[c] <= 0.0) continue;
    last = static_cast<TokenId>(c);
    if (u < w[c]) return last;
    u -= w[c];
  }
  return last;
}

std::map<std::vector<std::string>, std::size_t> ngram_counts(const std::vector<std::string>& toks, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    ++counts[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                      toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

DecodeMode parse_decode_mode(std::string_view s) {
  if (s == "greedy") return DecodeMode::greedy;
  if (s == "sample") return DecodeMode::sample;
  throw ConfigError("decode.mode must be greedy or sample, got '" + std::string(s) + "'");
}

std::string_view decode_mode_name(DecodeMode m) { return m == DecodeMode::sample ? "sample" : "greedy"; }

void DecodeOptions::validate() const {
  if (max_blank_len < 1) throw ConfigError("decode.max_blank_len must be at least 1");
  if (!(temperature > 0.0)) throw ConfigError("decode.temperature must be positive");
}

bool is_forbidden_output(TokenId id) {
  return id == special::pad || id == special::bos || id == special::eos || id == special::bob || id == special::mask;
}

template <class T>
FillResult fill_template(const InfillModel<T>& model, const Template& t, const DecodeOptions& options,
                         std::uint64_t stream) {
  options.validate();
  if (options.max_blank_len + 1 > static_cast<std::size_t>(model.spec().base)) {
    throw PositionOverflow("decode.max_blank_len " + std::to_string(options.max_blank_len) +
                           " does not fit position.base " + std::to_string(model.spec().base));
  }
  Rng rng(mix_seed(options.seed, stream));
  FillResult res{t, {}};
  for (SegId seg : t.blank_ids()) {
    BlankFill fill{seg, {}, {}, false};
    std::vector<TokenId> input{special::bob};
    while (true) {
      const auto logits = eval_logits(model, res.filled, seg, input);
      const auto logp = log_softmax_row(logits, logits.rows() - 1);
      const TokenId next = choose(logp, options, rng);
      fill.logprobs.push_back(logp[static_cast<std::size_t>(next)]);
      if (next == special::eob) break;
      fill.tokens.push_back(next);
      input.push_back(next);
      if (fill.tokens.size() == options.max_blank_len) {
        fill.truncated = true;
        break;
      }
    }
    res.filled = res.filled.update(seg, fill.tokens);
    res.blanks.push_back(std::move(fill));
  }
  return res;
}

template <class T>
std::vector<double> score_golden(const InfillModel<T>& model, const InfillExample& ex) {
  std::vector<double> out;
  Template t = ex.templ;
  for (const auto& [seg, fill] : ex.golden) {
    const auto input = decoder_input_for(fill);
    const auto targets = decoder_targets_for(fill);
    const auto logits = eval_logits(model, t, seg, input);
    for (std::size_t r = 0; r < targets.size(); ++r) {
      out.push_back(log_softmax_row(logits, r)[static_cast<std::size_t>(targets[r])]);
    }
    t = t.update(seg, fill);
  }
  return out;
}

double perplexity_from_logprobs(std::span<const std::vector<double>> per_example) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& v : per_example) {
    for (double lp : v) sum += lp;
    count += v.size();
  }
  if (count == 0) throw DataError("perplexity over zero tokens");
  return std::exp(-sum / static_cast<double>(count));
}

template <class T>
double perplexity(const InfillModel<T>& model, std::span<const InfillExample> examples,
                  std::vector<std::vector<double>>* dump, std::size_t threads) {
  std::vector<std::vector<double>> lp(examples.size());
  parallel_for(examples.size(), threads, [&](std::size_t i) { lp[i] = score_golden(model, examples[i]); });
  const double ppl = perplexity_from_logprobs(lp);
  if (dump) *dump = std::move(lp);
  return ppl;
}

double bleu(std::span<const std::vector<std::string>> candidates, std::span<const std::vector<std::string>> references,
            int max_n) {
  if (candidates.size() != references.size()) throw ContractError("bleu: candidate and reference counts differ");
  if (candidates.empty()) throw DataError("bleu over an empty corpus");
  if (max_n < 1) throw ConfigError("bleu: max_n must be positive");
  std::size_t cand_len = 0, ref_len = 0;
  double log_p = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    std::size_t matched = 0, total = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto c = ngram_counts(candidates[i], static_cast<std::size_t>(n));
      const auto r = ngram_counts(references[i], static_cast<std::size_t>(n));
      for (const auto& [g, k] : c) {
        total += k;
        if (auto it = r.find(g); it != r.end()) matched += std::min(k, it->second);
      }
    }
    if (matched == 0) return 0.0;
    log_p += std::log(static_cast<double>(matched) / static_cast<double>(total));
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    cand_len += candidates[i].size();
    ref_len += references[i].size();
  }
  const double bp =
      cand_len > ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
  return 100.0 * bp * std::exp(log_p / max_n);
}

double unigram_perplexity(std::span<const InfillExample> train, std::span<const InfillExample> test,
                          std::size_t vocab_size) {
  std::vector<double> counts(vocab_size, 0.0);
  double total = 0.0;
  auto bump = [&](TokenId id) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) throw IndexError("token id outside vocabulary");
    counts[static_cast<std::size_t>(id)] += 1.0;
    total += 1.0;
  };
  for (const auto& ex : train) {
    for (const auto& [seg, fill] : ex.golden) {
      for (TokenId id : fill) bump(id);
      bump(special::eob);
    }
  }
  double sum = 0.0;
  std::size_t n = 0;
  const double denom = total + static_cast<double>(vocab_size);
  for (const auto& ex : test) {
    for (const auto& [seg, fill] : ex.golden) {
      for (TokenId id : decoder_targets_for(fill)) {
        sum += std::log((counts.at(static_cast<std::size_t>(id)) + 1.0) / denom);
        ++n;
      }
    }
  }
  if (n == 0) throw DataError("unigram perplexity over zero tokens");
  return std::exp(-sum / static_cast<double>(n));
}

std::string EvalReport::to_kv() const {
  std::ostringstream os;
  os << "bleu=" << exact(bleu) << "\n"
     << "template_bleu=" << exact(template_bleu) << "\n"
     << "ppl=" << exact(ppl) << "\n"
     << "sentences=" << sentences << "\n"
     << "skipped=" << skipped << "\n"
     << "scored_tokens=" << scored_tokens << "\n"
     << "truncated_blanks=" << truncated_blanks << "\n";
  return os.str();
}

std::string EvalReport::to_table() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "metric            value\n"
                "BLEU              %.3f\n"
                "Template BLEU     %.3f\n"
                "Perplexity        %.3f\n"
                "Sentences         %zu\n"
                "Skipped           %zu\n",
                bleu, template_bleu, ppl, sentences, skipped);
  return buf;
}

template <class T>
EvalReport evaluate(const InfillModel<T>& model, const Vocab& vocab, std::span<const TextExample> test,
                    const DecodeOptions& options, EvalArtifacts* artifacts, std::size_t threads) {
  options.validate();
  if (test.empty()) throw DataError("evaluation set is empty");
  struct Row {
    bool ok = false;
    std::vector<std::string> candidate;
    std::vector<double> logprobs;
    std::size_t truncated = 0;
  };
  std::vector<Row> rows(test.size());
  parallel_for(test.size(), threads, [&](std::size_t i) {
    try {
      const InfillExample ex = encode(test[i], vocab);
      const auto fill = fill_template(model, ex.templ, options, i);
      Row r;
      r.candidate = vocab.decode(fill.filled.reconstruct());
      for (const auto& b : fill.blanks) r.truncated += b.truncated ? 1 : 0;
      r.logprobs = score_golden(model, ex);
      r.ok = true;
      rows[i] = std::move(r);
    } catch (const PositionOverflow&) {
      rows[i].ok = false;
    }
  });

  EvalArtifacts art;
  EvalReport rep;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (!rows[i].ok) {
      ++rep.skipped;
      continue;
    }
    art.candidates.push_back(std::move(rows[i].candidate));
    art.templates_only.push_back(test[i].templ.visible_tokens());
    art.references.push_back(test[i].original);
    rep.scored_tokens += rows[i].logprobs.size();
    rep.truncated_blanks += rows[i].truncated;
    art.logprobs.push_back(std::move(rows[i].logprobs));
  }
  rep.sentences = art.candidates.size();
  if (rep.sentences == 0) throw DataError("every evaluation example was skipped");
  rep.bleu = bleu(art.candidates, art.references);
  rep.template_bleu = bleu(art.templates_only, art.references);
  rep.ppl = perplexity_from_logprobs(art.logprobs);
  if (artifacts) *artifacts = std::move(art);
  return rep;
}

#define INFILL_EVAL_INSTANTIATE(T)                                                                              \
  template FillResult fill_template(const InfillModel<T>&, const Template&, const DecodeOptions&, std::uint64_t); \
  template std::vector<double> score_golden(const InfillModel<T>&, const InfillExample&);                      \
  template double perplexity(const InfillModel<T>&, std::span<const InfillExample>,                            \
                             std::vector<std::vector<double>>*, std::size_t);                                  \
  template EvalReport evaluate(const InfillModel<T>&, const Vocab&, std::span<const TextExample>,              \
                               const DecodeOptions&, EvalArtifacts*, std::size_t);

INFILL_EVAL_INSTANTIATE(float)
INFILL_EVAL_INSTANTIATE(double)

}  // namespace infill
