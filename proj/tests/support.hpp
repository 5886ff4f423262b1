#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "infill/autodiff.hpp"
#include "infill/model.hpp"
#include "infill/params.hpp"
#include "infill/template.hpp"
#include "infill/vocab.hpp"

namespace infill::test {

inline Tensor<double> random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(shape);
  for (auto& x : t.values()) x = lo + (hi - lo) * uniform01(rng);
  return t;
}

/// Values bounded away from zero (for kinked ops such as relu).
inline Tensor<double> random_away_from_zero(const Shape& shape, Rng& rng, double gap = 0.1) {
  Tensor<double> t(shape);
  for (auto& x : t.values()) {
    const double m = gap + (1.0 - gap) * uniform01(rng);
    x = uniform01(rng) < 0.5 ? -m : m;
  }
  return t;
}

/// Norm-wise relative error ||a - b|| / (||a|| + ||b||); 0 when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na) + std::sqrt(nb);
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

using Builder = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

/// Reduces a tensor-valued output to a scalar through a fixed random weighting.
inline Var<double> project(Var<double> out, std::uint64_t seed) {
  Rng rng(seed);
  auto w = out.tape->constant(random_tensor(out.shape(), rng));
  return ad::sum(ad::mul(out, w));
}

/// Largest norm-wise relative error between the tape gradient of each input
/// and its central finite difference with step h.
inline double grad_check(const std::vector<Tensor<double>>& inputs, const Builder& build, double h = 1e-5) {
  Tape<double> tape;
  std::vector<Var<double>> vars;
  for (const auto& t : inputs) vars.push_back(tape.variable(t));
  Var<double> loss = build(tape, vars);
  tape.backward(loss);

  auto eval = [&](const std::vector<Tensor<double>>& in) {
    Tape<double> t2;
    std::vector<Var<double>> v2;
    for (const auto& t : in) v2.push_back(t2.constant(t));
    return build(t2, v2).value().item();
  };

  double worst = 0.0;
  auto work = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor<double> analytic = tape.grad(vars[i]);
    std::vector<double> numeric(inputs[i].size());
    for (std::size_t k = 0; k < inputs[i].size(); ++k) {
      const double x = work[i][k];
      work[i][k] = x + h;
      const double up = eval(work);
      work[i][k] = x - h;
      const double down = eval(work);
      work[i][k] = x;
      numeric[k] = (up - down) / (2.0 * h);
    }
    worst = std::max(worst, relative_error(analytic.values(), numeric));
  }
  return worst;
}

/// One randomized finite-difference check of every differentiable op on
/// small shapes; `report(name, relative_error)` is called once per check.
inline void op_gradient_trial(Rng& rng, const std::function<void(const char*, double)>& report) {
  using V = Var<double>;
  auto check = [&](const char* name, std::vector<Tensor<double>> in, const Builder& f) {
    report(name, grad_check(in, f));
  };
  const std::size_t m = 1 + rng() % 4, kk = 1 + rng() % 4, n = 1 + rng() % 4;
  const auto seed = rng();
  check("matmul", {random_tensor({m, kk}, rng), random_tensor({kk, n}, rng)},
        [&](Tape<double>&, const std::vector<V>& v) { return project(ad::matmul(v[0], v[1]), seed); });
  check("matmul_nt", {random_tensor({m, kk}, rng), random_tensor({n, kk}, rng)},
        [&](Tape<double>&, const std::vector<V>& v) { return project(ad::matmul_nt(v[0], v[1]), seed); });
  check("add", {random_tensor({m, n}, rng), random_tensor({m, n}, rng)},
        [&](Tape<double>&, const std::vector<V>& v) { return project(ad::add(v[0], v[1]), seed); });
  check("add_row", {random_tensor({m, n}, rng), random_tensor({n}, rng)},
        [&](Tape<double>&, const std::vector<V>& v) { return project(ad::add_row(v[0], v[1]), seed); });
  check("mul", {random_tensor({m, n}, rng), random_tensor({m, n}, rng)},
        [&](Tape<double>&, const std::vector<V>& v) { return project(ad::mul(v[0], v[1]), seed); });
  check("scale", {random_tensor({m, n}, rng)},
        [&](Tape<double>&, const std::vector<V>& v) { return project(ad::scale(v[0], -1.7), seed); });
  check("relu", {random_away_from_zero({m, n}, rng)},
        [&](Tape<double>&, const std::vector<V>& v) { return project(ad::relu(v[0]), seed); });
  check("sigmoid", {random_tensor({m, n}, rng, -3, 3)},
        [&](Tape<double>&, const std::vector<V>& v) { return project(ad::sigmoid(v[0]), seed); });
  check("tanh", {random_tensor({m, n}, rng, -2, 2)},
        [&](Tape<double>&, const std::vector<V>& v) { return project(ad::tanh(v[0]), seed); });
  for (std::size_t axis : {0u, 1u}) {
    check("softmax", {random_tensor({m, n}, rng, -3, 3)},
          [&](Tape<double>&, const std::vector<V>& v) { return project(ad::softmax(v[0], axis), seed); });
  }
  // Rows of two entries normalise to +-1 whatever their values, leaving an
  // x-gradient near eps that the difference quotient cannot resolve; use
  // three or more columns, spread by a ramp so the variance is not tiny.
  auto ln_in = random_tensor({m, n + 2}, rng);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c <= n + 1; ++c) ln_in(r, c) += 1.5 * double(c);
  check("layer_norm", {ln_in, random_tensor({n + 2}, rng), random_tensor({n + 2}, rng)},
        [&](Tape<double>&, const std::vector<V>& v) { return project(ad::layer_norm(v[0], v[1], v[2]), seed); });
  std::vector<int> ids(m);
  for (auto& id : ids) id = static_cast<int>(rng() % 5);
  check("embedding_lookup", {random_tensor({5, n}, rng)}, [&](Tape<double>&, const std::vector<V>& v) {
    return project(ad::embedding_lookup(v[0], std::span<const int>(ids)), seed);
  });
  std::vector<int> targets(m);
  for (auto& t : targets) t = static_cast<int>(rng() % (n + 1));
  check("cross_entropy", {random_tensor({m, n + 1}, rng, -3, 3)}, [&](Tape<double>&, const std::vector<V>& v) {
    return ad::cross_entropy(v[0], std::span<const int>(targets));
  });
  check("slice/concat", {random_tensor({m + 1, n + 1}, rng)}, [&](Tape<double>&, const std::vector<V>& v) {
    const V parts[] = {ad::slice_cols(v[0], 0, 1), ad::slice_cols(v[0], 1, n)};
    const V rows[] = {ad::slice_rows(ad::concat_cols(std::span<const V>(parts)), 1, m), ad::slice_rows(v[0], 0, 1)};
    return project(ad::concat_rows(std::span<const V>(rows)), seed);
  });
}

/// Tiny configuration used by gradient and causality tests.
inline ModelSpec tiny_spec(ModelKind kind, std::size_t vocab_size = 11) {
  ModelSpec s;
  s.kind = kind;
  s.vocab_size = vocab_size;
  s.base = 16;
  s.max_segments = 16;
  s.d_model = 8;
  s.num_blocks = 1;
  s.num_heads = 1;
  s.ffn_dim = 16;
  s.embedding_size = 6;
  s.num_units = 8;
  s.layers = 1;
  s.dropout = 0.0;
  return s;
}

/// Random example over ids [special::count, vocab_size): known runs of 1..3
/// tokens alternating with blanks whose golden fills hold 0..3 tokens.
inline InfillExample random_example(Rng& rng, std::size_t vocab_size, std::size_t blanks,
                                    std::size_t max_fill = 3) {
  auto word = [&] {
    return static_cast<TokenId>(special::count + (rng() % (vocab_size - special::count)));
  };
  auto run = [&](std::size_t lo, std::size_t hi) {
    std::vector<TokenId> r(lo + rng() % (hi - lo + 1));
    for (auto& x : r) x = word();
    return r;
  };
  std::vector<std::pair<SegmentKind, std::vector<TokenId>>> runs;
  std::vector<std::vector<TokenId>> fills;
  const bool lead_blank = rng() % 2 == 0;
  if (!lead_blank) runs.emplace_back(SegmentKind::known, run(1, 3));
  for (std::size_t b = 0; b < blanks; ++b) {
    runs.emplace_back(SegmentKind::blank, std::vector<TokenId>{});
    fills.push_back(run(0, max_fill));
    if (b + 1 < blanks || rng() % 2 == 0) runs.emplace_back(SegmentKind::known, run(1, 3));
  }
  auto templ = Template::from_runs(std::move(runs));
  std::map<SegId, std::vector<TokenId>> golden;
  std::size_t k = 0;
  for (SegId id : templ.blank_ids()) golden.emplace(id, fills[k++]);
  return InfillExample::make(std::move(templ), std::move(golden));
}

inline TextExample to_text(const InfillExample& ex, const Vocab& vocab) {
  std::map<SegId, std::vector<std::string>> golden;
  for (const auto& [seg, fill] : ex.golden) golden.emplace(seg, vocab.decode(fill));
  return TextExample::make(decode(ex.templ, vocab), std::move(golden));
}

inline double example_loss(const InfillModel<double>& model, const InfillExample& ex) {
  Tape<double> tape;
  ParamBinding<double> binding(tape, model.params(), false);
  ForwardContext<double> ctx{tape, binding, false, nullptr};
  return infill_loss(model, ctx, ex).value().item();
}

/// Finite-difference check of the full model loss against `ex`, on up to
/// `per_tensor` sampled entries of every parameter. Returns the per-parameter
/// norm-wise relative errors.
inline std::vector<double> model_grad_errors(InfillModel<double>& model, const InfillExample& ex, Rng& rng,
                                             std::size_t per_tensor = 12, double h = 1e-5) {
  auto& params = model.params();
  Tape<double> tape;
  ParamBinding<double> binding(tape, params, true);
  ForwardContext<double> ctx{tape, binding, false, nullptr};
  Var<double> loss = infill_loss(model, ctx, ex);
  tape.backward(loss);
  Grads<double> grads = zero_grads(params);
  binding.accumulate_into(grads);

  std::vector<double> errors;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor<double>& t = params.tensor(p);
    std::vector<std::size_t> idx(t.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i + 1 < idx.size(); ++i) std::swap(idx[i], idx[i + rng() % (idx.size() - i)]);
    idx.resize(std::min(per_tensor, idx.size()));
    std::vector<double> analytic, numeric;
    for (std::size_t k : idx) {
      const double x = t[k];
      t[k] = x + h;
      const double up = example_loss(model, ex);
      t[k] = x - h;
      const double down = example_loss(model, ex);
      t[k] = x;
      analytic.push_back(grads[p][k]);
      numeric.push_back((up - down) / (2.0 * h));
    }
    errors.push_back(relative_error(analytic, numeric));
  }
  return errors;
}

}  // namespace infill::test
