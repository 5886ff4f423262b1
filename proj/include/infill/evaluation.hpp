#pragma once

// Blank filling at inference time and the BLEU / perplexity metrics.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "infill/model.hpp"
#include "infill/vocab.hpp"

namespace infill {

enum class DecodeMode { greedy, sample };

DecodeMode parse_decode_mode(std::string_view s);
std::string_view decode_mode_name(DecodeMode m);

struct DecodeOptions {
  DecodeMode mode = DecodeMode::greedy;
  double temperature = 1.0;
  std::size_t max_blank_len = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BlankFill {
  SegId seg = 0;
  std::vector<TokenId> tokens;
  /// Natural-log probability of each emitted token, the closing <eob> included.
  std::vector<double> logprobs;
  /// Stopped at max_blank_len without emitting <eob>.
  bool truncated = false;
};

struct FillResult {
  Template filled;
  std::vector<BlankFill> blanks;
};

/// True for ids decoding may never emit: <pad>, <bos>, <eos>, <bob>, <mask>.
bool is_forbidden_output(TokenId id);

/// Fills blanks in ascending order, writing each fill back before the next.
/// `stream` selects the sampling stream under options.seed.
template <class T>
FillResult fill_template(const InfillModel<T>& model, const Template& t, const DecodeOptions& options,
                         std::uint64_t stream = 0);

/// Teacher-forced log-probabilities of every golden token plus <eob>, blanks
/// ascending with earlier blanks holding golden text.
template <class T>
std::vector<double> score_golden(const InfillModel<T>& model, const InfillExample& ex);

/// exp(-mean log-probability) over all scored tokens.
double perplexity_from_logprobs(std::span<const std::vector<double>> per_example);

/// Per-token perplexity of the golden fills. `dump` receives the per-example
/// log-probabilities.
template <class T>
double perplexity(const InfillModel<T>& model, std::span<const InfillExample> examples,
                  std::vector<std::vector<double>>* dump = nullptr, std::size_t threads = 1);

/// Corpus BLEU in [0, 100]: geometric mean of clipped n-gram precisions for
/// n = 1..max_n times the brevity penalty, no smoothing.
double bleu(std::span<const std::vector<std::string>> candidates, std::span<const std::vector<std::string>> references,
            int max_n = 4);

/// Add-one smoothed unigram model over training fill tokens and <eob>,
/// evaluated on the test fills.
double unigram_perplexity(std::span<const InfillExample> train, std::span<const InfillExample> test,
                          std::size_t vocab_size);

struct EvalReport {
  double bleu = 0.0;
  double template_bleu = 0.0;
  double ppl = 0.0;
  std::size_t sentences = 0;
  std::size_t skipped = 0;
  std::size_t scored_tokens = 0;
  std::size_t truncated_blanks = 0;

  /// `key=value` lines, values printed round-trip exact.
  std::string to_kv() const;
  std::string to_table() const;
};

struct EvalArtifacts {
  std::vector<std::vector<std::string>> candidates;
  std::vector<std::vector<std::string>> templates_only;
  std::vector<std::vector<std::string>> references;
  std::vector<std::vector<double>> logprobs;
};

/// Fills every template, scores reconstructions against the originals and
/// computes golden-fill perplexity. Examples that overflow the position
/// range are counted as skipped.
template <class T>
EvalReport evaluate(const InfillModel<T>& model, const Vocab& vocab, std::span<const TextExample> test,
                    const DecodeOptions& options, EvalArtifacts* artifacts = nullptr, std::size_t threads = 1);

}  // namespace infill
