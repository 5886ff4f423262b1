#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "infill/params.hpp"
#include "infill/position.hpp"
#include "infill/template.hpp"

namespace infill {

enum class ModelKind { self_attn, seq2seq };

ModelKind parse_model_kind(std::string_view s);
std::string_view model_kind_name(ModelKind k);

using ConfigMap = std::map<std::string, std::string>;

/// Architecture hyper-parameters for either model kind. Defaults are the
/// full-size configuration; tests use much smaller values.
struct ModelSpec {
  ModelKind kind = ModelKind::self_attn;
  std::size_t vocab_size = 0;

  int base = 64;
  PositionKind position = PositionKind::sinusoidal;
  int max_segments = 64;

  std::size_t d_model = 400;
  std::size_t num_blocks = 6;
  std::size_t num_heads = 8;
  std::size_t ffn_dim = 1600;

  std::size_t embedding_size = 400;
  std::size_t num_units = 1600;
  std::size_t layers = 1;

  double dropout = 0.1;

  void validate() const;

  /// Keys as they appear in config files and checkpoint manifests.
  ConfigMap to_map() const;
  static ModelSpec from_map(const ConfigMap& m);
};

/// Common interface of the self-attention infiller and the seq2seq baseline.
template <class T>
class InfillModel {
 public:
  virtual ~InfillModel() = default;

  virtual ModelKind kind() const = 0;
  const ModelSpec& spec() const { return spec_; }

  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  /// Logits [decoder_input.size() x V] for blank `seg` of `t`. Row j
  /// predicts the token following decoder_input[j]; decoder_input starts with
  /// <bob>. Rows depend only on the template and decoder_input[0..j].
  virtual Var<T> blank_logits(ForwardContext<T>& ctx, const Template& t, SegId seg,
                              std::span<const TokenId> decoder_input) const = 0;

 protected:
  explicit InfillModel(ModelSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

  ModelSpec spec_;
  ParamStore<T> params_;
};

template <class T>
std::unique_ptr<InfillModel<T>> make_model(const ModelSpec& spec, std::uint64_t init_seed);

/// Adds word embeddings and position embeddings for positioned tokens.
/// Sinusoidal mode adds fixed encodings; learned mode sums a segment-id
/// table row and an offset table row.
template <class T>
class PositionalEmbedder {
 public:
  PositionalEmbedder() = default;
  PositionalEmbedder(ParamStore<T>& params, const ModelSpec& spec, std::size_t width, Rng& rng);

  Var<T> embed(ForwardContext<T>& ctx, Var<T> word_table, std::span<const PositionedToken> tokens) const;

 private:
  PositionKind kind_ = PositionKind::sinusoidal;
  int base_ = 64;
  int max_segments_ = 64;
  std::size_t width_ = 0;
  std::size_t seg_table_ = 0;
  std::size_t offset_table_ = 0;
};

/// Cross-entropy of the golden fill of blank `seg` (plus <eob>) given template `t`.
template <class T>
Var<T> blank_loss(const InfillModel<T>& model, ForwardContext<T>& ctx, const Template& t, SegId seg,
                  std::span<const TokenId> golden);

/// Sum over blanks, ascending, of each blank's loss with earlier blanks
/// holding their golden text.
template <class T>
Var<T> infill_loss(const InfillModel<T>& model, ForwardContext<T>& ctx, const InfillExample& ex);

/// <bob> followed by the fill.
std::vector<TokenId> decoder_input_for(std::span<const TokenId> fill);
/// The fill followed by <eob>.
std::vector<TokenId> decoder_targets_for(std::span<const TokenId> fill);

}  // namespace infill
