#include <doctest.h>

#include <cmath>
#include <limits>

#include "infill/error.hpp"
#include "infill/seq2seq.hpp"
#include "infill/transformer.hpp"
#include "support.hpp"

using namespace infill;

namespace {

struct Eval {
  Tape<double> tape;
  ParamBinding<double> binding;
  ForwardContext<double> ctx;
  explicit Eval(const ParamStore<double>& p) : binding(tape, p, false), ctx{tape, binding, false, nullptr} {}
};

Tensor<double> logits_of(const InfillModel<double>& m, const Template& t, SegId seg, const std::vector<TokenId>& in) {
  Eval e(m.params());
  return m.blank_logits(e.ctx, t, seg, in).value();
}

void zero_output(InfillModel<double>& m) {
  m.params().tensor(*m.params().find("output.w")).fill(0.0);
  m.params().tensor(*m.params().find("output.b")).fill(0.0);
}

Tensor<double> identity(std::size_t n) {
  Tensor<double> t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

const ModelKind kKinds[] = {ModelKind::self_attn, ModelKind::seq2seq};

}  // namespace

TEST_CASE("multi-head attention on a single key returns the projected value") {
  Rng rng(1);
  Tape<double> tape;
  ParamStore<double> none;
  ParamBinding<double> b(tape, none, false);
  ForwardContext<double> ctx{tape, b, false, nullptr};
  AttentionWeights<double> w{tape.constant(test::random_tensor({4, 4}, rng)), tape.constant(test::random_tensor({4, 4}, rng)),
                             tape.constant(test::random_tensor({4, 4}, rng)), tape.constant(test::random_tensor({4, 4}, rng))};
  auto q = tape.constant(test::random_tensor({1, 4}, rng));
  auto kv = tape.constant(test::random_tensor({1, 4}, rng));
  const auto out = multi_head_attention(ctx, q, kv, w, 2, static_cast<const Tensor<double>*>(nullptr)).value();
  const auto expect = ad::matmul(ad::matmul(kv, w.wv), w.wo).value();
  for (std::size_t i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-14));
}

TEST_CASE("multi-head attention matches a hand computation and normalises weights") {
  Tape<double> tape;
  ParamStore<double> none;
  ParamBinding<double> b(tape, none, false);
  ForwardContext<double> ctx{tape, b, false, nullptr};
  auto I = tape.constant(identity(2));
  AttentionWeights<double> w{I, I, I, I};
  auto q = tape.constant(Tensor<double>({1, 2}, std::vector<double>{1.0, 0.5}));
  auto kv = tape.constant(Tensor<double>({2, 2}, std::vector<double>{0.2, -0.4, 1.0, 0.3}));
  std::vector<Tensor<double>> weights;
  const auto out = multi_head_attention(ctx, q, kv, w, 1, static_cast<const Tensor<double>*>(nullptr), 0.0, &weights).value();
  const double s0 = (1.0 * 0.2 + 0.5 * -0.4) / std::sqrt(2.0);
  const double s1 = (1.0 * 1.0 + 0.5 * 0.3) / std::sqrt(2.0);
  const double a0 = std::exp(s0) / (std::exp(s0) + std::exp(s1));
  const double a1 = 1.0 - a0;
  CHECK(out[0] == doctest::Approx(a0 * 0.2 + a1 * 1.0).epsilon(1e-14));
  CHECK(out[1] == doctest::Approx(a0 * -0.4 + a1 * 0.3).epsilon(1e-14));
  REQUIRE(weights.size() == 1);
  CHECK(weights[0][0] + weights[0][1] == doctest::Approx(1.0));

  Tensor<double> bad_mask({2, 2});
  CHECK_THROWS_AS(multi_head_attention(ctx, q, kv, w, 1, &bad_mask), DimensionError);
  CHECK_THROWS_AS(multi_head_attention(ctx, q, kv, w, 3, static_cast<const Tensor<double>*>(nullptr)), DimensionError);
}

TEST_CASE("causal mask blocks later keys only") {
  const auto m = causal_mask<double>(3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK((j > i ? std::isinf(m(i, j)) && m(i, j) < 0 : m(i, j) == 0.0));
}

TEST_CASE("model spec validation") {
  auto s = test::tiny_spec(ModelKind::self_attn);
  s.num_heads = 3;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = test::tiny_spec(ModelKind::self_attn);
  s.dropout = 1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = test::tiny_spec(ModelKind::seq2seq);
  CHECK(ModelSpec::from_map(s.to_map()).to_map() == s.to_map());
  auto m = s.to_map();
  m["model.bogus"] = "1";
  CHECK_THROWS_AS(ModelSpec::from_map(m), ConfigError);
}

TEST_CASE("a lone <bob> yields one logit row") {
  for (auto kind : kKinds) {
    auto m = make_model<double>(test::tiny_spec(kind), 1);
    const auto t = Template::from_runs({{SegmentKind::known, {8}}, {SegmentKind::blank, {}}});
    const auto l = logits_of(*m, t, 2, {special::bob});
    CHECK(l.rows() == 1);
    CHECK(l.cols() == 11);
  }
}

TEST_CASE("logits are causal in the teacher tokens") {
  Rng rng(21);
  for (auto kind : kKinds) {
    auto m = make_model<double>(test::tiny_spec(kind), 2);
    for (int trial = 0; trial < 10; ++trial) {
      const auto ex = test::random_example(rng, 11, 2, 4);
      const SegId seg = ex.templ.blank_ids().front();
      auto in = decoder_input_for(ex.golden.at(seg));
      in.push_back(8);
      in.push_back(9);
      const auto base = logits_of(*m, ex.templ, seg, in);
      const std::size_t j = 1 + rng() % (in.size() - 1);
      auto changed = in;
      changed[j] = static_cast<TokenId>(changed[j] == 10 ? 9 : 10);
      const auto pert = logits_of(*m, ex.templ, seg, changed);
      for (std::size_t r = 0; r < j; ++r)
        for (std::size_t c = 0; c < base.cols(); ++c) CHECK(base(r, c) == pert(r, c));
      bool differs = false;
      for (std::size_t c = 0; c < base.cols(); ++c) differs |= base(j, c) != pert(j, c);
      CHECK(differs);
    }
  }
}

TEST_CASE("infill loss is the sum of per-blank losses") {
  Rng rng(22);
  for (auto kind : kKinds) {
    auto m = make_model<double>(test::tiny_spec(kind), 3);
    for (int trial = 0; trial < 20; ++trial) {
      const auto ex = test::random_example(rng, 11, 1 + trial % 3);
      const double total = test::example_loss(*m, ex);
      double sum = 0.0;
      Template t = ex.templ;
      bool first = true;
      for (const auto& [seg, fill] : ex.golden) {
        Eval e(m->params());
        const double l = blank_loss(*m, e.ctx, t, seg, fill).value().item();
        sum = first ? l : sum + l;
        first = false;
        t = t.update(seg, fill);
      }
      CHECK(total == sum);
    }
  }
}

TEST_CASE("uniform logits give (sum of fill lengths + 1) * ln V for both models") {
  const auto t = Template::from_runs(
      {{SegmentKind::blank, {}}, {SegmentKind::known, {7}}, {SegmentKind::blank, {}}, {SegmentKind::known, {8}}});
  const auto ex = InfillExample::make(t, {{1, {8, 9}}, {3, {7, 8, 9}}});
  for (auto kind : kKinds) {
    auto m = make_model<double>(test::tiny_spec(kind, 10), 4);
    zero_output(*m);
    CHECK(std::abs(test::example_loss(*m, ex) - 7.0 * std::log(10.0)) < 1e-9);
  }
}

TEST_CASE("a model certain of the golden tokens has zero loss") {
  const auto t = Template::from_runs({{SegmentKind::known, {7}}, {SegmentKind::blank, {}}, {SegmentKind::known, {8}}});
  const auto ex = InfillExample::make(t, {{2, {}}});
  for (auto kind : kKinds) {
    auto m = make_model<double>(test::tiny_spec(kind), 5);
    zero_output(*m);
    m->params().tensor(*m->params().find("output.b"))[special::eob] = 1e4;
    CHECK(test::example_loss(*m, ex) == 0.0);
  }
}

TEST_CASE("full-model gradients match finite differences") {
  Rng rng(23);
  for (auto kind : kKinds) {
    for (auto pos : {PositionKind::sinusoidal, PositionKind::learned}) {
      auto spec = test::tiny_spec(kind);
      spec.position = pos;
      auto m = make_model<double>(spec, 6);
      for (int trial = 0; trial < 3; ++trial) {
        const auto ex = test::random_example(rng, 11, 2);
        for (double e : test::model_grad_errors(*m, ex, rng)) CHECK(e < 1e-5);
      }
    }
  }
}

TEST_CASE("evaluation mode is deterministic and dropout only acts in training") {
  Rng rng(24);
  auto spec = test::tiny_spec(ModelKind::self_attn);
  spec.dropout = 0.3;
  auto m = make_model<double>(spec, 7);
  const auto ex = test::random_example(rng, 11, 2);
  CHECK(test::example_loss(*m, ex) == test::example_loss(*m, ex));
  auto train_loss = [&](std::uint64_t seed) {
    Tape<double> tape;
    ParamBinding<double> b(tape, m->params(), false);
    Rng r(seed);
    ForwardContext<double> ctx{tape, b, true, &r};
    return infill_loss(*m, ctx, ex).value().item();
  };
  CHECK(train_loss(1) == train_loss(1));
  CHECK(train_loss(1) != test::example_loss(*m, ex));
}

TEST_CASE("position overflow propagates from the decoder") {
  auto m = make_model<double>(test::tiny_spec(ModelKind::self_attn), 8);
  const auto t = Template::from_runs({{SegmentKind::known, {7}}, {SegmentKind::blank, {}}});
  std::vector<TokenId> in(17, 8);
  in[0] = special::bob;
  CHECK_THROWS_AS(logits_of(*m, t, 2, in), PositionOverflow);
}

TEST_CASE("lstm step limits and scalar oracle") {
  Rng rng(25);
  const std::size_t in = 3, u = 4;
  Tape<double> tape;
  auto x = tape.constant(test::random_tensor({1, in}, rng));
  LstmState<double> s0{tape.constant(Tensor<double>({1, u})), tape.constant(Tensor<double>({1, u}))};
  LstmWeights<double> zero{tape.constant(Tensor<double>({in, 4 * u})), tape.constant(Tensor<double>({u, 4 * u})),
                           tape.constant(Tensor<double>({4 * u}))};
  const auto z = lstm_step(x, s0, zero);
  for (double v : z.h.value().values()) CHECK(v == 0.0);
  for (double v : z.c.value().values()) CHECK(v == 0.0);

  auto c_prev = test::random_tensor({1, u}, rng);
  LstmState<double> s1{tape.constant(test::random_tensor({1, u}, rng)), tape.constant(c_prev)};
  Tensor<double> b({4 * u});
  for (std::size_t k = 0; k < u; ++k) {
    b[k] = -1e3;      // input gate closed
    b[u + k] = 1e3;   // forget gate open
  }
  LstmWeights<double> keep{tape.constant(Tensor<double>({in, 4 * u})), tape.constant(Tensor<double>({u, 4 * u})),
                           tape.constant(b)};
  const auto kept = lstm_step(x, s1, keep);
  for (std::size_t k = 0; k < u; ++k) CHECK(kept.c.value()[k] == c_prev[k]);

  const auto wx = test::random_tensor({in, 4 * u}, rng), wh = test::random_tensor({u, 4 * u}, rng),
             bb = test::random_tensor({4 * u}, rng), h = test::random_tensor({1, u}, rng),
             c = test::random_tensor({1, u}, rng);
  LstmWeights<double> w{tape.constant(wx), tape.constant(wh), tape.constant(bb)};
  const auto out = lstm_step(x, LstmState<double>{tape.constant(h), tape.constant(c)}, w);
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  for (std::size_t k = 0; k < u; ++k) {
    double pre[4];
    for (std::size_t g = 0; g < 4; ++g) {
      double s = bb[g * u + k];
      for (std::size_t i = 0; i < in; ++i) s += x.value()[i] * wx(i, g * u + k);
      for (std::size_t i = 0; i < u; ++i) s += h[i] * wh(i, g * u + k);
      pre[g] = s;
    }
    const double cn = sig(pre[1]) * c[k] + sig(pre[0]) * std::tanh(pre[2]);
    const double hn = sig(pre[3]) * std::tanh(cn);
    CHECK(out.c.value()[k] == doctest::Approx(cn).epsilon(1e-13));
    CHECK(out.h.value()[k] == doctest::Approx(hn).epsilon(1e-13));
  }
}

TEST_CASE("seq2seq encoder is unidirectional and attention weights normalise") {
  Seq2SeqModel<double> m(test::tiny_spec(ModelKind::seq2seq), 9);
  const auto a = Template::from_runs({{SegmentKind::known, {8, 9}}, {SegmentKind::blank, {}}});
  const auto b = Template::from_runs({{SegmentKind::known, {8, 9}}, {SegmentKind::blank, {}}, {SegmentKind::known, {10}}});
  Eval ea(m.params()), eb(m.params());
  const auto ma = m.encode_template(ea.ctx, a);
  const auto mb = m.encode_template(eb.ctx, b);
  CHECK(ma.memory.value().rows() == template_layout(a).size());
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < ma.memory.value().cols(); ++c) CHECK(ma.memory.value()(r, c) == mb.memory.value()(r, c));

  const auto single = Template::from_runs({{SegmentKind::blank, {}}});
  Eval es(m.params());
  CHECK(m.encode_template(es.ctx, single).memory.value().rows() == 3);

  std::vector<Tensor<double>> attn;
  const std::vector<TokenId> in{special::bob, 8, 9};
  m.decode_fill(ea.ctx, ma, 2, in, &attn);
  REQUIRE(!attn.empty());
  for (const auto& w : attn) {
    for (std::size_t r = 0; r < w.rows(); ++r) {
      double s = 0;
      for (double v : w.row(r)) s += v;
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("transformer memory is word plus position embedding") {
  InfillTransformer<double> m(test::tiny_spec(ModelKind::self_attn), 10);
  const auto t = Template::from_runs({{SegmentKind::known, {8, 9}}, {SegmentKind::blank, {}}});
  Eval e(m.params());
  const auto mem = m.encode_template(e.ctx, t).value();
  const auto expect = encode_sequence<double>(template_layout(t), m.spec().base, m.params().tensor(*m.params().find("embedding")));
  CHECK(mem == expect);
}
