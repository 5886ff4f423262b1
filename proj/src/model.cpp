#include "infill/model.hpp"

#include <charconv>

#include "infill/error.hpp"
#include "infill/seq2seq.hpp"
#include "infill/transformer.hpp"

namespace infill {

ModelKind parse_model_kind(std::string_view s) {
  if (s == "self_attn") return ModelKind::self_attn;
  if (s == "seq2seq") return ModelKind::seq2seq;
  throw ConfigError("model.kind must be self_attn or seq2seq, got '" + std::string(s) + "'");
}

std::string_view model_kind_name(ModelKind k) {
  return k == ModelKind::seq2seq ? "seq2seq" : "self_attn";
}

void ModelSpec::validate() const {
  if (vocab_size <= special::count) throw ConfigError("vocab_size must exceed the reserved tokens");
  if (base < 1) throw ConfigError("position.base must be positive");
  if (max_segments < 1) throw ConfigError("position.max_segments must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model.dropout must lie in [0, 1)");
  if (kind == ModelKind::self_attn) {
    if (d_model == 0 || num_heads == 0 || d_model % num_heads != 0) {
      throw ConfigError("model.d_model must be a positive multiple of model.num_heads");
    }
    if (position == PositionKind::sinusoidal && d_model % 2 != 0) {
      throw ConfigError("model.d_model must be even for sinusoidal positions");
    }
    if (num_blocks == 0 || ffn_dim == 0) throw ConfigError("model.num_blocks and model.ffn_dim must be positive");
  } else {
    if (num_units == 0) throw ConfigError("model.num_units must be positive");
    if (layers == 0) throw ConfigError("model.layers must be positive");
    if (embedding_size == 0 || (position == PositionKind::sinusoidal && embedding_size % 2 != 0)) {
      throw ConfigError("model.embedding_size must be positive and even for sinusoidal positions");
    }
  }
}

ConfigMap ModelSpec::to_map() const {
  ConfigMap m;
  m["model.kind"] = std::string(model_kind_name(kind));
  m["model.vocab_size"] = std::to_string(vocab_size);
  m["position.base"] = std::to_string(base);
  m["position.kind"] = std::string(position_kind_name(position));
  m["position.max_segments"] = std::to_string(max_segments);
  m["model.d_model"] = std::to_string(d_model);
  m["model.num_blocks"] = std::to_string(num_blocks);
  m["model.num_heads"] = std::to_string(num_heads);
  m["model.ffn_dim"] = std::to_string(ffn_dim);
  m["model.embedding_size"] = std::to_string(embedding_size);
  m["model.num_units"] = std::to_string(num_units);
  m["model.layers"] = std::to_string(layers);
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, dropout);
  m["model.dropout"] = std::string(buf, r.ptr);
  return m;
}

namespace {

const std::string& require(const ConfigMap& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw DataError("model description lacks '" + key + "'");
  return it->second;
}

template <class N>
N parse_number(const ConfigMap& m, const std::string& key) {
  const std::string& s = require(m, key);
  N v{};
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw DataError("'" + key + "' is not a number: '" + s + "'");
  }
  return v;
}

}  // namespace

ModelSpec ModelSpec::from_map(const ConfigMap& m) {
  ModelSpec s;
  s.kind = parse_model_kind(require(m, "model.kind"));
  s.vocab_size = parse_number<std::size_t>(m, "model.vocab_size");
  s.base = parse_number<int>(m, "position.base");
  s.position = parse_position_kind(require(m, "position.kind"));
  s.max_segments = parse_number<int>(m, "position.max_segments");
  s.d_model = parse_number<std::size_t>(m, "model.d_model");
  s.num_blocks = parse_number<std::size_t>(m, "model.num_blocks");
  s.num_heads = parse_number<std::size_t>(m, "model.num_heads");
  s.ffn_dim = parse_number<std::size_t>(m, "model.ffn_dim");
  s.embedding_size = parse_number<std::size_t>(m, "model.embedding_size");
  s.num_units = parse_number<std::size_t>(m, "model.num_units");
  s.layers = parse_number<std::size_t>(m, "model.layers");
  s.dropout = parse_number<double>(m, "model.dropout");
  const ConfigMap known = s.to_map();
  for (const auto& [key, value] : m) {
    const bool ours = key.rfind("model.", 0) == 0 || key.rfind("position.", 0) == 0;
    if (ours && !known.count(key)) throw ConfigError("unknown model key '" + key + "'");
  }
  s.validate();
  return s;
}

template <class T>
std::unique_ptr<InfillModel<T>> make_model(const ModelSpec& spec, std::uint64_t init_seed) {
  if (spec.kind == ModelKind::seq2seq) return std::make_unique<Seq2SeqModel<T>>(spec, init_seed);
  return std::make_unique<InfillTransformer<T>>(spec, init_seed);
}

template <class T>
PositionalEmbedder<T>::PositionalEmbedder(ParamStore<T>& params, const ModelSpec& spec, std::size_t width, Rng& rng)
    : kind_(spec.position), base_(spec.base), max_segments_(spec.max_segments), width_(width) {
  if (kind_ == PositionKind::learned) {
    // Segment ids run 0 (<bos>) .. max_segments + 1 (<eos>); offsets 1..base.
    seg_table_ = params.add("position.segment", normal_tensor<T>({static_cast<std::size_t>(max_segments_) + 2, width}, 1.0, rng));
    offset_table_ = params.add("position.offset", normal_tensor<T>({static_cast<std::size_t>(base_) + 1, width}, 1.0, rng));
  }
}

template <class T>
Var<T> PositionalEmbedder<T>::embed(ForwardContext<T>& ctx, Var<T> word_table,
                                    std::span<const PositionedToken> tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(t.token);
  Var<T> words = ad::embedding_lookup(word_table, ids);

  if (kind_ == PositionKind::sinusoidal) {
    std::vector<PositionIndex> pos;
    pos.reserve(tokens.size());
    for (const auto& t : tokens) pos.push_back(t.pos);
    return ad::add(words, ctx.tape.constant(positional_encodings<T>(pos, base_, width_)));
  }

  std::vector<int> segs, offs;
  for (const auto& t : tokens) {
    position_index(t.pos.seg_id, t.pos.offset_id, base_);  // range check
    if (t.pos.seg_id > max_segments_ + 1) {
      throw PositionOverflow("segment " + std::to_string(t.pos.seg_id) + " exceeds position.max_segments " +
                             std::to_string(max_segments_));
    }
    segs.push_back(t.pos.seg_id);
    offs.push_back(t.pos.offset_id);
  }
  Var<T> seg_e = ad::embedding_lookup(ctx.params(seg_table_), segs);
  Var<T> off_e = ad::embedding_lookup(ctx.params(offset_table_), offs);
  return ad::add(words, ad::add(seg_e, off_e));
}

std::vector<TokenId> decoder_input_for(std::span<const TokenId> fill) {
  std::vector<TokenId> in;
  in.reserve(fill.size() + 1);
  in.push_back(special::bob);
  in.insert(in.end(), fill.begin(), fill.end());
  return in;
}

std::vector<TokenId> decoder_targets_for(std::span<const TokenId> fill) {
  std::vector<TokenId> out(fill.begin(), fill.end());
  out.push_back(special::eob);
  return out;
}

template <class T>
Var<T> blank_loss(const InfillModel<T>& model, ForwardContext<T>& ctx, const Template& t, SegId seg,
                  std::span<const TokenId> golden) {
  const auto input = decoder_input_for(golden);
  const auto targets = decoder_targets_for(golden);
  return ad::cross_entropy(model.blank_logits(ctx, t, seg, input), std::span<const int>(targets));
}

template <class T>
Var<T> infill_loss(const InfillModel<T>& model, ForwardContext<T>& ctx, const InfillExample& ex) {
  Template t = ex.templ;
  std::optional<Var<T>> total;
  for (const auto& [seg, fill] : ex.golden) {
    Var<T> l = blank_loss(model, ctx, t, seg, fill);
    total = total ? ad::add(*total, l) : l;
    t = t.update(seg, fill);
  }
  if (!total) return ctx.tape.constant(Tensor<T>::scalar(T(0)));
  return *total;
}

template class PositionalEmbedder<float>;
template class PositionalEmbedder<double>;
template std::unique_ptr<InfillModel<float>> make_model(const ModelSpec&, std::uint64_t);
template std::unique_ptr<InfillModel<double>> make_model(const ModelSpec&, std::uint64_t);
template Var<float> blank_loss(const InfillModel<float>&, ForwardContext<float>&, const Template&, SegId,
                               std::span<const TokenId>);
template Var<double> blank_loss(const InfillModel<double>&, ForwardContext<double>&, const Template&, SegId,
                                std::span<const TokenId>);
template Var<float> infill_loss(const InfillModel<float>&, ForwardContext<float>&, const InfillExample&);
template Var<double> infill_loss(const InfillModel<double>&, ForwardContext<double>&, const InfillExample&);

}  // namespace infill
