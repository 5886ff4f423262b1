#pragma once

// Self-attention infilling decoder.
//
// For one blank the decoder reads the tokens generated so far (starting at
// <bob>) through causal self-attention, and the whole current template
// through template-decoder attention whose keys and values are the template's
// word + position embeddings. Blocks are pre-norm residual:
//
//   x += SelfAttn(LN(x), causal)
//   x += CrossAttn(LN(x), template)
//   x += FFN(LN(x))
//
// followed by a final LayerNorm and a projection to vocabulary logits.

#include <vector>

#include "infill/model.hpp"

namespace infill {

template <class T>
struct AttentionWeights {
  Var<T> wq, wk, wv, wo;
};

/// Multi-head scaled dot-product attention. `queries` is [Lq x d],
/// `keys_values` is [Lk x d]. `mask`, when given, is an additive [Lq x Lk]
/// score mask (-inf blocks a key). Per-head attention weights are appended to
/// `weights_out` when it is non-null.
template <class T>
Var<T> multi_head_attention(ForwardContext<T>& ctx, Var<T> queries, Var<T> keys_values,
                            const AttentionWeights<T>& w, std::size_t num_heads, const Tensor<T>* mask,
                            double attention_dropout = 0.0, std::vector<Tensor<T>>* weights_out = nullptr);

/// [n x n] additive mask hiding keys after each query position.
template <class T>
Tensor<T> causal_mask(std::size_t n);

template <class T>
class InfillTransformer final : public InfillModel<T> {
 public:
  InfillTransformer(const ModelSpec& spec, std::uint64_t init_seed);

  ModelKind kind() const override { return ModelKind::self_attn; }

  Var<T> blank_logits(ForwardContext<T>& ctx, const Template& t, SegId seg,
                      std::span<const TokenId> decoder_input) const override;

  /// Template memory: word + position embeddings of template_layout(t).
  Var<T> encode_template(ForwardContext<T>& ctx, const Template& t) const;

 private:
  struct AttentionIndex {
    std::size_t wq, wk, wv, wo;
  };
  struct Block {
    std::size_t ln1_g, ln1_b, ln2_g, ln2_b, ln3_g, ln3_b;
    AttentionIndex self_attn, cross_attn;
    std::size_t ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  };

  AttentionWeights<T> bind(ForwardContext<T>& ctx, const AttentionIndex& a) const;

  std::size_t embedding_ = 0;
  PositionalEmbedder<T> positions_;
  std::vector<Block> blocks_;
  std::size_t final_g_ = 0, final_b_ = 0;
  std::size_t out_w_ = 0, out_b_ = 0;
};

}  // namespace infill
