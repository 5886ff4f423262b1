#include "infill/seq2seq.hpp"

#include "infill/error.hpp"

namespace infill {

template <class T>
LstmState<T> lstm_step_projected(Var<T> x_proj, const LstmState<T>& state, const LstmWeights<T>& w) {
  const std::size_t units = state.h.value().cols();
  if (x_proj.value().cols() != 4 * units || w.wh.value().rows() != units || w.wh.value().cols() != 4 * units) {
    throw DimensionError("lstm_step: weights do not match " + std::to_string(units) + " units");
  }
  Var<T> z = ad::add_row(ad::add(x_proj, ad::matmul(state.h, w.wh)), w.b);
  Var<T> in_gate = ad::sigmoid(ad::slice_cols(z, 0, units));
  Var<T> forget_gate = ad::sigmoid(ad::slice_cols(z, units, units));
  Var<T> candidate = ad::tanh(ad::slice_cols(z, 2 * units, units));
  Var<T> out_gate = ad::sigmoid(ad::slice_cols(z, 3 * units, units));
  Var<T> c = ad::add(ad::mul(forget_gate, state.c), ad::mul(in_gate, candidate));
  Var<T> h = ad::mul(out_gate, ad::tanh(c));
  return {h, c};
}

template <class T>
LstmState<T> lstm_step(Var<T> x, const LstmState<T>& state, const LstmWeights<T>& w) {
  if (x.value().cols() != w.wx.value().rows()) {
    throw DimensionError("lstm_step: input width " + std::to_string(x.value().cols()) + " vs weights " +
                         shape_string(w.wx.shape()));
  }
  return lstm_step_projected(ad::matmul(x, w.wx), state, w);
}

template <class T>
Seq2SeqModel<T>::Seq2SeqModel(const ModelSpec& spec, std::uint64_t init_seed) : InfillModel<T>(spec) {
  if (spec.kind != ModelKind::seq2seq) throw ConfigError("Seq2SeqModel needs model.kind = seq2seq");
  Rng rng(init_seed);
  auto& p = this->params_;
  const std::size_t e = spec.embedding_size, u = spec.num_units, v = spec.vocab_size;

  embedding_ = p.add("embedding", normal_tensor<T>({v, e}, 1.0, rng));
  positions_ = PositionalEmbedder<T>(p, spec, e, rng);
  auto lstm = [&](const std::string& pre, std::size_t in) {
    LstmIndex l{};
    l.wx = p.add(pre + ".wx", xavier_uniform<T>(in, 4 * u, rng));
    l.wh = p.add(pre + ".wh", xavier_uniform<T>(u, 4 * u, rng));
    Tensor<T> bias({4 * u});
    for (std::size_t i = u; i < 2 * u; ++i) bias[i] = T(1);  // forget-gate bias
    l.b = p.add(pre + ".b", std::move(bias));
    return l;
  };
  for (std::size_t k = 0; k < spec.layers; ++k) encoder_.push_back(lstm("encoder.l" + std::to_string(k), k ? u : e));
  for (std::size_t k = 0; k < spec.layers; ++k) decoder_.push_back(lstm("decoder.l" + std::to_string(k), k ? u : e));
  attn_w_ = p.add("attention.w", xavier_uniform<T>(u, u, rng));
  combine_w_ = p.add("combine.w", xavier_uniform<T>(2 * u, u, rng));
  combine_b_ = p.add("combine.b", Tensor<T>({u}));
  out_w_ = p.add("output.w", xavier_uniform<T>(u, v, rng));
  out_b_ = p.add("output.b", Tensor<T>({v}));
}

template <class T>
LstmWeights<T> Seq2SeqModel<T>::bind(ForwardContext<T>& ctx, const LstmIndex& l) const {
  return {ctx.params(l.wx), ctx.params(l.wh), ctx.params(l.b)};
}

template <class T>
LstmState<T> Seq2SeqModel<T>::zero_state(ForwardContext<T>& ctx) const {
  const std::size_t u = this->spec_.num_units;
  return {ctx.tape.constant(Tensor<T>({1, u})), ctx.tape.constant(Tensor<T>({1, u}))};
}

template <class T>
std::vector<Var<T>> Seq2SeqModel<T>::run_layer(ForwardContext<T>& ctx, Var<T> inputs, const LstmIndex& l,
                                               LstmState<T> state) const {
  const LstmWeights<T> w = bind(ctx, l);
  // Input projections for all steps in one product.
  Var<T> proj = ad::matmul(inputs, w.wx);
  std::vector<Var<T>> states;
  const std::size_t n = inputs.value().rows();
  states.reserve(2 * n);
  for (std::size_t t = 0; t < n; ++t) {
    state = lstm_step_projected(ad::slice_rows(proj, t, 1), state, w);
    states.push_back(state.h);
  }
  states.push_back(state.c);  // caller splits off the final cell
  return states;
}

template <class T>
EncoderOutput<T> Seq2SeqModel<T>::encode_template(ForwardContext<T>& ctx, const Template& t) const {
  const double p = this->spec_.dropout;
  const auto layout = template_layout(t);
  Var<T> x = ctx.dropout(positions_.embed(ctx, ctx.params(embedding_), layout), p);
  EncoderOutput<T> out;
  for (const auto& layer : encoder_) {
    auto states = run_layer(ctx, x, layer, zero_state(ctx));
    Var<T> c = states.back();
    states.pop_back();
    out.final.push_back({states.back(), c});
    x = ad::concat_rows<T>(states);
    if (&layer != &encoder_.back()) x = ctx.dropout(x, p);
  }
  out.memory = x;
  return out;
}

template <class T>
Var<T> Seq2SeqModel<T>::decode_fill(ForwardContext<T>& ctx, const EncoderOutput<T>& enc, SegId seg,
                                    std::span<const TokenId> decoder_input,
                                    std::vector<Tensor<T>>* attention_out) const {
  if (decoder_input.empty() || decoder_input.front() != special::bob) {
    throw ContractError("decoder input must start with <bob>");
  }
  const double p = this->spec_.dropout;
  const auto layout = blank_layout(seg, decoder_input);
  Var<T> x = ctx.dropout(positions_.embed(ctx, ctx.params(embedding_), layout), p);
  for (std::size_t k = 0; k < decoder_.size(); ++k) {
    auto states = run_layer(ctx, x, decoder_[k], enc.final[k]);
    states.pop_back();
    x = ad::concat_rows<T>(states);
    if (k + 1 < decoder_.size()) x = ctx.dropout(x, p);
  }
  // Luong attention over the encoder states, all decoder steps at once.
  Var<T> projected = ad::matmul(enc.memory, ctx.params(attn_w_));
  Var<T> weights = ad::softmax(ad::matmul_nt(x, projected), 1);
  if (attention_out) attention_out->push_back(weights.value());
  Var<T> context = ad::matmul(weights, enc.memory);
  const Var<T> parts[] = {context, x};
  Var<T> combined = ad::tanh(ad::add_row(ad::matmul(ad::concat_cols<T>(parts), ctx.params(combine_w_)),
                                         ctx.params(combine_b_)));
  combined = ctx.dropout(combined, p);
  return ad::add_row(ad::matmul(combined, ctx.params(out_w_)), ctx.params(out_b_));
}

template <class T>
Var<T> Seq2SeqModel<T>::blank_logits(ForwardContext<T>& ctx, const Template& t, SegId seg,
                                     std::span<const TokenId> decoder_input) const {
  if (t.segment(seg).kind != SegmentKind::blank) {
    throw ContractError("segment " + std::to_string(seg) + " is not a blank");
  }
  return decode_fill(ctx, encode_template(ctx, t), seg, decoder_input);
}

template LstmState<float> lstm_step(Var<float>, const LstmState<float>&, const LstmWeights<float>&);
template LstmState<double> lstm_step(Var<double>, const LstmState<double>&, const LstmWeights<double>&);
template LstmState<float> lstm_step_projected(Var<float>, const LstmState<float>&, const LstmWeights<float>&);
template LstmState<double> lstm_step_projected(Var<double>, const LstmState<double>&, const LstmWeights<double>&);
template class Seq2SeqModel<float>;
template class Seq2SeqModel<double>;

}  // namespace infill
