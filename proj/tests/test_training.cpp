#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "infill/checkpoint.hpp"
#include "infill/error.hpp"
#include "infill/evaluation.hpp"
#include "infill/training.hpp"
#include "support.hpp"

using namespace infill;
namespace fs = std::filesystem;

namespace {

std::vector<InfillExample> toy_set(std::size_t n, std::uint64_t seed, std::size_t vocab = 11) {
  Rng rng(seed);
  std::vector<InfillExample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(test::random_example(rng, vocab, 1 + i % 2));
  return out;
}

fs::path temp_file(const char* name) { return fs::temp_directory_path() / name; }

}  // namespace

TEST_CASE("schedule closed form, continuity and monotonicity") {
  const ScheduleConfig cfg{0.3, 10000, 400};
  CHECK(std::abs(lr_schedule(10000, cfg) - 1.5e-4) <= 1e-12 * 1.5e-4);
  const double w = 10000.0;
  CHECK(std::abs(w / std::pow(w, 1.5) - 1.0 / std::sqrt(w)) < 1e-18);
  Rng rng(1);
  for (int i = 0; i < 10; ++i) {
    const std::size_t step = 1 + rng() % 50000;
    const double s = double(step);
    const double oracle = 0.3 / 20.0 * std::min(s / std::pow(w, 1.5), 1.0 / std::sqrt(s));
    CHECK(std::abs(lr_schedule(step, cfg) - oracle) <= 1e-12 * oracle);
  }
  for (std::size_t s = 1; s < 10000; s += 97) CHECK(lr_schedule(s, cfg) < lr_schedule(s + 1, cfg));
  for (std::size_t s = 10000; s < 30000; s += 97) CHECK(lr_schedule(s, cfg) > lr_schedule(s + 1, cfg));
  CHECK_THROWS_AS(lr_schedule(0, cfg), ContractError);
  CHECK_THROWS_AS(lr_schedule(1, ScheduleConfig{0.3, 0, 400}), ConfigError);
}

TEST_CASE("adam examples") {
  ParamStore<double> p;
  p.add("w", Tensor<double>({2, 3}, 0.5));
  const auto before = p.tensor(0);
  auto st = AdamState<double>::init(p);
  adam_step(p, zero_grads(p), st, 0.1);
  CHECK(p.tensor(0) == before);
  CHECK(st.t == 1);

  Grads<double> g{Tensor<double>({2, 3}, std::vector<double>{2, -3, 0.5, -0.1, 7, -7})};
  auto st2 = AdamState<double>::init(p);
  adam_step(p, g, st2, 0.01);
  for (std::size_t k = 0; k < 6; ++k) {
    const double expect = 0.5 - 0.01 * (g[0][k] > 0 ? 1.0 : -1.0);
    CHECK(std::abs(p.tensor(0)[k] - expect) < 1e-9);
  }

  // Two steps with gradient g/2 differ from one step with g.
  ParamStore<double> a, b;
  a.add("w", Tensor<double>({1, 2}, 0.0));
  b.add("w", Tensor<double>({1, 2}, 0.0));
  auto sa = AdamState<double>::init(a), sb = AdamState<double>::init(b);
  Grads<double> full{Tensor<double>({1, 2}, std::vector<double>{1.0, -2.0})};
  Grads<double> half{Tensor<double>({1, 2}, std::vector<double>{0.5, -1.0})};
  adam_step(a, full, sa, 0.1);
  adam_step(b, half, sb, 0.05);
  adam_step(b, half, sb, 0.05);
  CHECK_FALSE(a.tensor(0) == b.tensor(0));

  // Moments decay toward zero under zero gradients.
  const double m0 = std::abs(sa.m[0][0]), v0 = sa.v[0][0];
  for (int i = 0; i < 5; ++i) adam_step(a, zero_grads(a), sa, 0.1);
  CHECK(std::abs(sa.m[0][0]) < m0);
  CHECK(sa.v[0][0] < v0);

  Grads<double> bad{Tensor<double>({1, 2}, std::vector<double>{NAN, 0.0})};
  const auto keep = a.tensor(0);
  CHECK_THROWS_AS(adam_step(a, bad, sa, 0.1), NumericError);
  CHECK(a.tensor(0) == keep);
}

TEST_CASE("batch gradient does not depend on the worker count") {
  auto model = make_model<double>(test::tiny_spec(ModelKind::self_attn), 1);
  const auto data = toy_set(11, 2);
  std::vector<const InfillExample*> batch;
  for (const auto& ex : data) batch.push_back(&ex);
  Grads<double> g1, g4;
  const double l1 = batch_gradient<double>(*model, batch, g1, false, 3, 1);
  const double l4 = batch_gradient<double>(*model, batch, g4, false, 3, 4);
  CHECK(l1 == l4);
  CHECK(g1 == g4);
  double mean = 0;
  for (const auto& ex : data) mean += test::example_loss(*model, ex);
  CHECK(l1 == doctest::Approx(mean / double(data.size())).epsilon(1e-12));
}

TEST_CASE("training is deterministic, lowers the loss and keeps the best model") {
  const auto train_set = toy_set(24, 3);
  const auto valid_set = toy_set(6, 4);
  auto run = [&] {
    auto spec = test::tiny_spec(ModelKind::self_attn);
    spec.dropout = 0.1;
    auto model = make_model<double>(spec, 5);
    TrainOptions o;
    o.epochs = 30;
    o.batch_size = 8;
    o.val_every = 10;
    o.schedule = {1.0, 20, 8};
    o.seed = 6;
    auto res = train(*model, train_set, valid_set, o);
    return std::make_pair(metrics_csv(res.log), res);
  };
  const auto [csv1, r1] = run();
  const auto [csv2, r2] = run();
  CHECK(csv1 == csv2);
  CHECK(r1.steps == 90);
  REQUIRE(r1.best_val_ppl);

  std::vector<double> losses;
  for (const auto& row : r1.log) losses.push_back(row.loss);
  const std::size_t n = losses.size() / 2;
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + long(v.size() / 2), v.end());
    return v[v.size() / 2];
  };
  CHECK(median({losses.begin() + long(n), losses.end()}) < median({losses.begin(), losses.begin() + long(n)}));
  CHECK(csv1.rfind("step,loss,lr,val_ppl\n", 0) == 0);
}

TEST_CASE("training stops at the first validation under the target perplexity") {
  auto model = make_model<double>(test::tiny_spec(ModelKind::self_attn), 5);
  TrainOptions o;
  o.epochs = 10;
  o.batch_size = 4;
  o.val_every = 3;
  o.schedule = {1.0, 20, 8};
  o.target_val_ppl = 1e9;
  const auto data = toy_set(16, 3);
  const auto res = train(*model, data, data, o);
  CHECK(res.steps == 3);
  CHECK(res.best_step == 3);
}

TEST_CASE("zero epochs leaves the initial parameters") {
  auto model = make_model<double>(test::tiny_spec(ModelKind::seq2seq), 7);
  const auto before = model->params().tensor(0);
  TrainOptions o;
  o.epochs = 0;
  const auto res = train(*model, toy_set(4, 1), {}, o);
  CHECK(res.steps == 0);
  CHECK(res.log.empty());
  CHECK(model->params().tensor(0) == before);
}

TEST_CASE("checkpoint round trip is bit exact") {
  auto model = make_model<float>(test::tiny_spec(ModelKind::self_attn), 8);
  const auto manifest = make_manifest(model->spec(), 0xabcdef, 12);
  const auto path = temp_file("infill_ckpt_test.ckpt");
  save_checkpoint(path, manifest, model->params());
  const auto ck = load_checkpoint(path);
  CHECK(ck.manifest == manifest);
  CHECK(ck.step() == 12);
  CHECK(ck.vocab_hash() == 0xabcdef);
  auto restored = restore_model<float>(ck, 0xabcdef, ModelKind::self_attn);
  for (std::size_t i = 0; i < model->params().size(); ++i) CHECK(restored->params().tensor(i) == model->params().tensor(i));
  CHECK(serialize_checkpoint(manifest, restored->params()) == serialize_checkpoint(manifest, model->params()));

  Rng rng(9);
  const auto ex = test::random_example(rng, 11, 2);
  auto logits = [&](const InfillModel<float>& m) {
    Tape<float> tape;
    ParamBinding<float> b(tape, m.params(), false);
    ForwardContext<float> ctx{tape, b, false, nullptr};
    const SegId seg = ex.templ.blank_ids().front();
    return m.blank_logits(ctx, ex.templ, seg, decoder_input_for(ex.golden.at(seg))).value();
  };
  CHECK(logits(*model) == logits(*restored));
  fs::remove(path);
}

TEST_CASE("checkpoint loading rejects bad input without partial state") {
  auto model = make_model<float>(test::tiny_spec(ModelKind::self_attn), 8);
  const auto bytes = serialize_checkpoint(make_manifest(model->spec(), 1, 0), model->params());
  for (std::size_t cut : {std::size_t{3}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    CHECK_THROWS_AS(parse_checkpoint(std::string_view(bytes).substr(0, cut)), DataError);
  }
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(parse_checkpoint(bad), DataError);

  const auto ck = parse_checkpoint(bytes);
  CHECK_THROWS_WITH_AS(restore_model<float>(ck, 2), doctest::Contains("vocab.hash"), DataError);
  CHECK_THROWS_WITH_AS(restore_model<float>(ck, 1, ModelKind::seq2seq), doctest::Contains("model.kind"), DataError);

  auto other = make_model<float>(test::tiny_spec(ModelKind::seq2seq), 8);
  const auto before = other->params().tensor(0);
  CHECK_THROWS_AS(load_params(other->params(), ck), DataError);
  CHECK(other->params().tensor(0) == before);

  auto wider_spec = test::tiny_spec(ModelKind::self_attn);
  wider_spec.ffn_dim = 32;
  auto wider = make_model<float>(wider_spec, 8);
  CHECK_THROWS_WITH_AS(load_params(wider->params(), ck), doctest::Contains("ffn"), DataError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.ckpt"), IoError);
}
