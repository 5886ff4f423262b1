#include "infill/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "infill/error.hpp"
#include "infill/evaluation.hpp"
#include "infill/masking.hpp"
#include "infill/parallel.hpp"

namespace infill {
namespace {

// Gradient shards are fixed in number so the summation order never depends
// on the worker count.
constexpr std::size_t kGradShards = 8;

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void ScheduleConfig::validate() const {
  if (warmup_steps < 1) throw ConfigError("train.warmup_steps must be at least 1");
  if (d_model < 1) throw ConfigError("schedule d_model must be positive");
  if (!(constant > 0.0)) throw ConfigError("train.lr_constant must be positive");
}

double lr_schedule(std::size_t step, const ScheduleConfig& cfg) {
  if (step == 0) throw ContractError("lr_schedule: steps count from 1");
  cfg.validate();
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(cfg.warmup_steps);
  return cfg.constant / std::sqrt(static_cast<double>(cfg.d_model)) * std::min(s / (w * std::sqrt(w)), 1.0 / std::sqrt(s));
}

template <class T>
AdamState<T> AdamState<T>::init(const ParamStore<T>& params, AdamConfig cfg) {
  AdamState st;
  st.cfg = cfg;
  st.m = zero_grads(params);
  st.v = zero_grads(params);
  return st;
}

template <class T>
void adam_step(ParamStore<T>& params, const Grads<T>& grads, AdamState<T>& state, double rate) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw DimensionError("adam_step: gradient count does not match parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params.tensor(i).shape()) {
      throw DimensionError("adam_step: gradient shape " + shape_string(grads[i].shape()) + " for parameter '" +
                           params.name(i) + "' of shape " + shape_string(params.tensor(i).shape()));
    }
    if (!all_finite(grads[i])) throw NumericError("non-finite gradient in parameter '" + params.name(i) + "'");
  }
  const auto& c = state.cfg;
  ++state.t;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params.tensor(i).data();
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    const T* g = grads[i].data();
    for (std::size_t k = 0, n = grads[i].size(); k < n; ++k) {
      const double gk = static_cast<double>(g[k]);
      const double mk = c.beta1 * static_cast<double>(m[k]) + (1.0 - c.beta1) * gk;
      const double vk = c.beta2 * static_cast<double>(v[k]) + (1.0 - c.beta2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double mhat = mk / bc1;
      const double vhat = vk / bc2;
      p[k] = static_cast<T>(static_cast<double>(p[k]) - rate * mhat / (std::sqrt(vhat) + c.eps));
    }
  }
}

std::string metrics_csv(std::span<const MetricRow> rows) {
  std::ostringstream os;
  os << "step,loss,lr,val_ppl\n";
  for (const auto& r : rows) {
    os << r.step << ',' << exact(r.loss) << ',' << exact(r.lr) << ',';
    if (r.val_ppl) os << exact(*r.val_ppl);
    os << '\n';
  }
  return os.str();
}

template <class T>
double batch_gradient(const InfillModel<T>& model, std::span<const InfillExample* const> batch, Grads<T>& grads,
                      bool training, std::uint64_t dropout_seed, std::size_t threads) {
  if (batch.empty()) throw ContractError("batch_gradient on an empty batch");
  const ParamStore<T>& params = model.params();
  const std::size_t shards = std::min(kGradShards, batch.size());
  std::vector<Grads<T>> shard_grads(shards);
  std::vector<double> shard_loss(shards, 0.0);
  parallel_for(shards, threads, [&](std::size_t s) {
    Grads<T> acc = zero_grads(params);
    const std::size_t lo = s * batch.size() / shards, hi = (s + 1) * batch.size() / shards;
    for (std::size_t i = lo; i < hi; ++i) {
      Tape<T> tape;
      ParamBinding<T> binding(tape, params, true);
      Rng rng(mix_seed(dropout_seed, i));
      ForwardContext<T> ctx{tape, binding, training, &rng};
      Var<T> loss = infill_loss(model, ctx, *batch[i]);
      shard_loss[s] += static_cast<double>(loss.value().item());
      if (!batch[i]->golden.empty()) {
        tape.backward(loss);
        binding.accumulate_into(acc);
      }
    }
    shard_grads[s] = std::move(acc);
  });
  grads = zero_grads(params);
  double total = 0.0;
  const T inv = T(1) / static_cast<T>(batch.size());
  for (std::size_t s = 0; s < shards; ++s) {
    total += shard_loss[s];
    for (std::size_t p = 0; p < grads.size(); ++p) {
      T* dst = grads[p].data();
      const T* src = shard_grads[s][p].data();
      for (std::size_t k = 0, n = grads[p].size(); k < n; ++k) dst[k] += src[k];
    }
  }
  for (auto& g : grads) {
    for (std::size_t k = 0; k < g.size(); ++k) g.data()[k] *= inv;
  }
  return total / static_cast<double>(batch.size());
}

template <class T>
TrainResult<T> train(InfillModel<T>& model, std::span<const InfillExample> train_set,
                     std::span<const InfillExample> valid_set, const TrainOptions& options) {
  options.schedule.validate();
  if (options.batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  TrainResult<T> res;
  res.steps = options.start_step;
  res.best_step = options.start_step;
  if (options.epochs == 0) return res;
  if (train_set.empty()) throw DataError("training set is empty");

  ParamStore<T>& params = model.params();
  AdamState<T> adam = AdamState<T>::init(params, options.adam);
  std::optional<ParamStore<T>> best;
  Rng shuffle(mix_seed(options.seed, 0x5eed));

  auto validate = [&](MetricRow& row) {
    if (valid_set.empty()) return;
    row.val_ppl = perplexity(model, valid_set, nullptr, options.threads);
    if (!res.best_val_ppl || *row.val_ppl < *res.best_val_ppl) {
      res.best_val_ppl = row.val_ppl;
      res.best_step = row.step;
      best = params;
    }
  };

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  bool done = false;
  for (std::size_t epoch = 0; epoch < options.epochs && !done; ++epoch) {
    for (std::size_t i = 0; i + 1 < order.size(); ++i) std::swap(order[i], order[i + uniform_below(shuffle, order.size() - i)]);
    for (std::size_t start = 0; start < order.size() && !done; start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      std::vector<const InfillExample*> batch;
      for (std::size_t k = start; k < end; ++k) batch.push_back(&train_set[order[k]]);

      const std::size_t step = res.steps + 1;
      Grads<T> grads;
      const double loss = batch_gradient<T>(model, batch, grads, true, mix_seed(options.seed, step), options.threads);
      if (!std::isfinite(loss)) throw NumericError("non-finite training loss at step " + std::to_string(step));
      const double rate = lr_schedule(step, options.schedule);
      adam_step(params, grads, adam, rate);
      res.steps = step;

      MetricRow row{step, loss, rate, std::nullopt};
      done = options.max_steps && step - options.start_step >= options.max_steps;
      const bool last_batch = end == order.size();
      if ((options.val_every && step % options.val_every == 0) ||
          (!options.val_every && last_batch) || done || (last_batch && epoch + 1 == options.epochs)) {
        validate(row);
        if (options.target_val_ppl && row.val_ppl && *row.val_ppl < *options.target_val_ppl) done = true;
      }
      res.log.push_back(row);
      if (options.on_log) options.on_log(row);
    }
  }
  if (best) params = std::move(*best);
  else res.best_step = res.steps;
  return res;
}

#define INFILL_TRAIN_INSTANTIATE(T)                                                                      \
  template struct AdamState<T>;                                                                          \
  template void adam_step(ParamStore<T>&, const Grads<T>&, AdamState<T>&, double);                       \
  template double batch_gradient(const InfillModel<T>&, std::span<const InfillExample* const>, Grads<T>&, \
                                 bool, std::uint64_t, std::size_t);                                      \
  template TrainResult<T> train(InfillModel<T>&, std::span<const InfillExample>,                         \
                                std::span<const InfillExample>, const TrainOptions&);

INFILL_TRAIN_INSTANTIATE(float)
INFILL_TRAIN_INSTANTIATE(double)

}  // namespace infill
