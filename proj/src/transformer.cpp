#include "infill/transformer.hpp"

#include <cmath>
#include <limits>

#include "infill/error.hpp"

namespace infill {

template <class T>
Tensor<T> causal_mask(std::size_t n) {
  Tensor<T> m({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) m(i, j) = -std::numeric_limits<T>::infinity();
  }
  return m;
}

template <class T>
Var<T> multi_head_attention(ForwardContext<T>& ctx, Var<T> queries, Var<T> keys_values,
                            const AttentionWeights<T>& w, std::size_t num_heads, const Tensor<T>* mask,
                            double attention_dropout, std::vector<Tensor<T>>* weights_out) {
  const std::size_t d = queries.value().cols();
  if (num_heads == 0 || d % num_heads != 0) {
    throw DimensionError("attention width " + std::to_string(d) + " is not divisible by " +
                         std::to_string(num_heads) + " heads");
  }
  if (keys_values.value().cols() != d) throw DimensionError("queries and keys differ in width");
  const std::size_t lq = queries.value().rows(), lk = keys_values.value().rows();
  if (mask && (mask->rank() != 2 || mask->rows() != lq || mask->cols() != lk)) {
    throw DimensionError("attention mask " + shape_string(mask->shape()) + " does not match scores [" +
                         std::to_string(lq) + "x" + std::to_string(lk) + "]");
  }
  const std::size_t dk = d / num_heads;
  const T inv_sqrt = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dk)));

  Var<T> q = ad::matmul(queries, w.wq);
  Var<T> k = ad::matmul(keys_values, w.wk);
  Var<T> v = ad::matmul(keys_values, w.wv);

  std::vector<Var<T>> heads;
  heads.reserve(num_heads);
  for (std::size_t h = 0; h < num_heads; ++h) {
    Var<T> qh = num_heads == 1 ? q : ad::slice_cols(q, h * dk, dk);
    Var<T> kh = num_heads == 1 ? k : ad::slice_cols(k, h * dk, dk);
    Var<T> vh = num_heads == 1 ? v : ad::slice_cols(v, h * dk, dk);
    Var<T> scores = ad::scale(ad::matmul_nt(qh, kh), inv_sqrt);
    Var<T> attn = ad::softmax(scores, 1, mask);
    if (weights_out) weights_out->push_back(attn.value());
    attn = ctx.dropout(attn, attention_dropout);
    heads.push_back(ad::matmul(attn, vh));
  }
  Var<T> joined = num_heads == 1 ? heads[0] : ad::concat_cols<T>(heads);
  return ad::matmul(joined, w.wo);
}

template <class T>
InfillTransformer<T>::InfillTransformer(const ModelSpec& spec, std::uint64_t init_seed) : InfillModel<T>(spec) {
  if (spec.kind != ModelKind::self_attn) throw ConfigError("InfillTransformer needs model.kind = self_attn");
  Rng rng(init_seed);
  auto& p = this->params_;
  const std::size_t d = spec.d_model, v = spec.vocab_size, f = spec.ffn_dim;
  auto ones = [d] { return Tensor<T>({d}, T(1)); };
  auto zeros = [](std::size_t n) { return Tensor<T>({n}); };

  embedding_ = p.add("embedding", normal_tensor<T>({v, d}, 1.0, rng));
  positions_ = PositionalEmbedder<T>(p, spec, d, rng);
  for (std::size_t b = 0; b < spec.num_blocks; ++b) {
    const std::string pre = "block" + std::to_string(b) + ".";
    Block blk{};
    auto attention = [&](const std::string& name) {
      AttentionIndex a{};
      a.wq = p.add(pre + name + ".wq", xavier_uniform<T>(d, d, rng));
      a.wk = p.add(pre + name + ".wk", xavier_uniform<T>(d, d, rng));
      a.wv = p.add(pre + name + ".wv", xavier_uniform<T>(d, d, rng));
      a.wo = p.add(pre + name + ".wo", xavier_uniform<T>(d, d, rng));
      return a;
    };
    blk.ln1_g = p.add(pre + "ln1.gamma", ones());
    blk.ln1_b = p.add(pre + "ln1.beta", zeros(d));
    blk.self_attn = attention("self");
    blk.ln2_g = p.add(pre + "ln2.gamma", ones());
    blk.ln2_b = p.add(pre + "ln2.beta", zeros(d));
    blk.cross_attn = attention("cross");
    blk.ln3_g = p.add(pre + "ln3.gamma", ones());
    blk.ln3_b = p.add(pre + "ln3.beta", zeros(d));
    blk.ffn_w1 = p.add(pre + "ffn.w1", xavier_uniform<T>(d, f, rng));
    blk.ffn_b1 = p.add(pre + "ffn.b1", zeros(f));
    blk.ffn_w2 = p.add(pre + "ffn.w2", xavier_uniform<T>(f, d, rng));
    blk.ffn_b2 = p.add(pre + "ffn.b2", zeros(d));
    blocks_.push_back(blk);
  }
  final_g_ = p.add("final_ln.gamma", ones());
  final_b_ = p.add("final_ln.beta", zeros(d));
  out_w_ = p.add("output.w", xavier_uniform<T>(d, v, rng));
  out_b_ = p.add("output.b", zeros(v));
}

template <class T>
AttentionWeights<T> InfillTransformer<T>::bind(ForwardContext<T>& ctx, const AttentionIndex& a) const {
  return {ctx.params(a.wq), ctx.params(a.wk), ctx.params(a.wv), ctx.params(a.wo)};
}

template <class T>
Var<T> InfillTransformer<T>::encode_template(ForwardContext<T>& ctx, const Template& t) const {
  const auto layout = template_layout(t);
  return ctx.dropout(positions_.embed(ctx, ctx.params(embedding_), layout), this->spec_.dropout);
}

template <class T>
Var<T> InfillTransformer<T>::blank_logits(ForwardContext<T>& ctx, const Template& t, SegId seg,
                                          std::span<const TokenId> decoder_input) const {
  if (t.segment(seg).kind != SegmentKind::blank) {
    throw ContractError("segment " + std::to_string(seg) + " is not a blank");
  }
  if (decoder_input.empty() || decoder_input.front() != special::bob) {
    throw ContractError("decoder input must start with <bob>");
  }
  const auto& spec = this->spec_;
  const double p = spec.dropout;

  Var<T> memory = encode_template(ctx, t);
  const auto layout = blank_layout(seg, decoder_input);
  Var<T> x = ctx.dropout(positions_.embed(ctx, ctx.params(embedding_), layout), p);
  const Tensor<T> mask = causal_mask<T>(decoder_input.size());

  for (const Block& b : blocks_) {
    Var<T> h = ad::layer_norm(x, ctx.params(b.ln1_g), ctx.params(b.ln1_b));
    h = multi_head_attention(ctx, h, h, bind(ctx, b.self_attn), spec.num_heads, &mask, p);
    x = ad::add(x, ctx.dropout(h, p));

    h = ad::layer_norm(x, ctx.params(b.ln2_g), ctx.params(b.ln2_b));
    h = multi_head_attention(ctx, h, memory, bind(ctx, b.cross_attn), spec.num_heads, static_cast<const Tensor<T>*>(nullptr), p);
    x = ad::add(x, ctx.dropout(h, p));

    h = ad::layer_norm(x, ctx.params(b.ln3_g), ctx.params(b.ln3_b));
    h = ad::relu(ad::add_row(ad::matmul(h, ctx.params(b.ffn_w1)), ctx.params(b.ffn_b1)));
    h = ad::add_row(ad::matmul(h, ctx.params(b.ffn_w2)), ctx.params(b.ffn_b2));
    x = ad::add(x, ctx.dropout(h, p));
  }
  x = ad::layer_norm(x, ctx.params(final_g_), ctx.params(final_b_));
  return ad::add_row(ad::matmul(x, ctx.params(out_w_)), ctx.params(out_b_));
}

template Tensor<float> causal_mask(std::size_t);
template Tensor<double> causal_mask(std::size_t);
template Var<float> multi_head_attention(ForwardContext<float>&, Var<float>, Var<float>, const AttentionWeights<float>&,
                                         std::size_t, const Tensor<float>*, double, std::vector<Tensor<float>>*);
template Var<double> multi_head_attention(ForwardContext<double>&, Var<double>, Var<double>,
                                          const AttentionWeights<double>&, std::size_t, const Tensor<double>*, double,
                                          std::vector<Tensor<double>>*);
template class InfillTransformer<float>;
template class InfillTransformer<double>;

}  // namespace infill
