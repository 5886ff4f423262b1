#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "infill/model.hpp"

namespace infill {

struct ScheduleConfig {
  double constant = 0.3;
  std::size_t warmup_steps = 10000;
  std::size_t d_model = 400;

  void validate() const;
};

/// constant / sqrt(d_model) * min(step / warmup^1.5, 1 / sqrt(step)); step >= 1.
double lr_schedule(std::size_t step, const ScheduleConfig& cfg);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.997;
  double eps = 1e-9;
};

template <class T>
struct AdamState {
  AdamConfig cfg;
  Grads<T> m;
  Grads<T> v;
  std::size_t t = 0;

  static AdamState init(const ParamStore<T>& params, AdamConfig cfg = {});
};

/// One bias-corrected Adam update. Throws NumericError naming the parameter
/// when a gradient is not finite; parameters are untouched in that case.
template <class T>
void adam_step(ParamStore<T>& params, const Grads<T>& grads, AdamState<T>& state, double rate);

struct MetricRow {
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  std::optional<double> val_ppl;
};

/// CSV with header `step,loss,lr,val_ppl`; values round-trip exact.
std::string metrics_csv(std::span<const MetricRow> rows);

struct TrainOptions {
  std::size_t epochs = 1;
  std::size_t batch_size = 200;
  /// Stop after this many updates; 0 means no limit.
  std::size_t max_steps = 0;
  /// Validate every this many updates; 0 validates at the end of each epoch.
  std::size_t val_every = 0;
  /// Stop at the first validation whose perplexity is below this value.
  std::optional<double> target_val_ppl;
  /// Step count already taken (resumed runs); the schedule continues from it.
  std::size_t start_step = 0;
  ScheduleConfig schedule;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::function<void(const MetricRow&)> on_log;
};

template <class T>
struct TrainResult {
  std::vector<MetricRow> log;
  std::size_t steps = 0;
  /// Step whose parameters were kept (0 = initial parameters).
  std::size_t best_step = 0;
  std::optional<double> best_val_ppl;
};

/// Mean-over-batch loss and gradient for a group of examples. Gradients are
/// summed in a fixed order, so the result does not depend on `threads`.
template <class T>
double batch_gradient(const InfillModel<T>& model, std::span<const InfillExample* const> batch, Grads<T>& grads,
                      bool training, std::uint64_t dropout_seed, std::size_t threads);

/// Trains `model` in place. With a validation set, the parameters with the
/// lowest validation perplexity are restored at the end.
template <class T>
TrainResult<T> train(InfillModel<T>& model, std::span<const InfillExample> train_set,
                     std::span<const InfillExample> valid_set, const TrainOptions& options);

}  // namespace infill
