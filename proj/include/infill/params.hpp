#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "infill/autodiff.hpp"

namespace infill {

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Standard normal via Box-Muller (one value per call).
double standard_normal(Rng& rng);

/// SplitMix64 finaliser; derives independent seeds from (seed, index) pairs.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

/// Named, ordered parameter tensors of one model.
template <class T>
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor<T> init);

  std::size_t size() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  Tensor<T>& tensor(std::size_t i) { return tensors_.at(i); }
  const Tensor<T>& tensor(std::size_t i) const { return tensors_.at(i); }
  std::optional<std::size_t> find(const std::string& name) const;
  std::size_t total_values() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> tensors_;
};

/// One gradient tensor per parameter, aligned with ParamStore indices.
template <class T>
using Grads = std::vector<Tensor<T>>;

template <class T>
Grads<T> zero_grads(const ParamStore<T>& store);

/// Binds parameters onto a tape lazily, one node per parameter.
template <class T>
class ParamBinding {
 public:
  ParamBinding(Tape<T>& tape, const ParamStore<T>& store, bool requires_grad);

  Var<T> operator()(std::size_t index);

  /// Adds each bound parameter's gradient into `acc` (after backward()).
  void accumulate_into(Grads<T>& acc) const;

  Tape<T>& tape() { return tape_; }

 private:
  Tape<T>& tape_;
  const ParamStore<T>& store_;
  bool requires_grad_;
  std::vector<std::optional<Var<T>>> bound_;
};

/// Everything a forward pass needs besides the model: the tape, bound
/// parameters, and the dropout switch with its random stream.
template <class T>
struct ForwardContext {
  Tape<T>& tape;
  ParamBinding<T>& params;
  bool training = false;
  Rng* rng = nullptr;

  Var<T> dropout(Var<T> x, double p) {
    if (!training || p <= 0.0) return x;
    if (!rng) throw ContractError("training-mode forward without a random stream");
    return ad::dropout(x, p, *rng);
  }
};

/// Xavier/Glorot uniform matrix.
template <class T>
Tensor<T> xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

template <class T>
Tensor<T> normal_tensor(Shape shape, double stddev, Rng& rng);

}  // namespace infill
