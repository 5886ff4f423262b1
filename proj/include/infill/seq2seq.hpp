#pragma once

// Attentional LSTM encoder-decoder baseline that fills one blank at a time.
//
// The encoder reads the template's word + position embeddings left to right.
// The decoder starts from the encoder's final state, reads <bob> and the fill
// so far (also position-embedded with the blank's seg_id), and at every step
// attends over the encoder states with Luong's multiplicative score
// h_dec . (W_a h_enc). The context and decoder state are combined through a
// tanh layer before the vocabulary projection.

#include <vector>

#include "infill/model.hpp"

namespace infill {

template <class T>
struct LstmWeights {
  Var<T> wx;  // [in x 4U]
  Var<T> wh;  // [U x 4U]
  Var<T> b;   // [4U]
};

template <class T>
struct LstmState {
  Var<T> h;  // [1 x U]
  Var<T> c;  // [1 x U]
};

/// One gated step. Gate order within the 4U pre-activation is
/// input, forget, candidate, output. Returns the new state; h is the output.
template <class T>
LstmState<T> lstm_step(Var<T> x, const LstmState<T>& state, const LstmWeights<T>& w);

/// Same step when x * wx has already been computed ([1 x 4U]).
template <class T>
LstmState<T> lstm_step_projected(Var<T> x_proj, const LstmState<T>& state, const LstmWeights<T>& w);

template <class T>
struct EncoderOutput {
  Var<T> memory;                     // [n x U], top-layer states
  std::vector<LstmState<T>> final;  // per layer
};

template <class T>
class Seq2SeqModel final : public InfillModel<T> {
 public:
  Seq2SeqModel(const ModelSpec& spec, std::uint64_t init_seed);

  ModelKind kind() const override { return ModelKind::seq2seq; }

  Var<T> blank_logits(ForwardContext<T>& ctx, const Template& t, SegId seg,
                      std::span<const TokenId> decoder_input) const override;

  EncoderOutput<T> encode_template(ForwardContext<T>& ctx, const Template& t) const;

  /// Teacher-forced decoding of blank `seg` against an encoded template.
  /// Per-step attention weights over memory are appended to `attention_out`
  /// when it is non-null.
  Var<T> decode_fill(ForwardContext<T>& ctx, const EncoderOutput<T>& enc, SegId seg,
                     std::span<const TokenId> decoder_input,
                     std::vector<Tensor<T>>* attention_out = nullptr) const;

 private:
  struct LstmIndex {
    std::size_t wx, wh, b;
  };

  LstmWeights<T> bind(ForwardContext<T>& ctx, const LstmIndex& l) const;
  std::vector<Var<T>> run_layer(ForwardContext<T>& ctx, Var<T> inputs, const LstmIndex& l,
                                LstmState<T> state) const;
  LstmState<T> zero_state(ForwardContext<T>& ctx) const;

  std::size_t embedding_ = 0;
  PositionalEmbedder<T> positions_;
  std::vector<LstmIndex> encoder_, decoder_;
  std::size_t attn_w_ = 0;
  std::size_t combine_w_ = 0, combine_b_ = 0;
  std::size_t out_w_ = 0, out_b_ = 0;
};

}  // namespace infill
