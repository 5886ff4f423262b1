#include "infill/params.hpp"

#include <cmath>
#include <numbers>

#include "infill/kernels.hpp"

namespace infill {

double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <class T>
std::size_t ParamStore<T>::add(std::string name, Tensor<T> init) {
  if (find(name)) throw ContractError("duplicate parameter name " + name);
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(init));
  return tensors_.size() - 1;
}

template <class T>
std::optional<std::size_t> ParamStore<T>::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

template <class T>
std::size_t ParamStore<T>::total_values() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

template <class T>
Grads<T> zero_grads(const ParamStore<T>& store) {
  Grads<T> g;
  g.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) g.emplace_back(store.tensor(i).shape());
  return g;
}

template <class T>
ParamBinding<T>::ParamBinding(Tape<T>& tape, const ParamStore<T>& store, bool requires_grad)
    : tape_(tape), store_(store), requires_grad_(requires_grad), bound_(store.size()) {}

template <class T>
Var<T> ParamBinding<T>::operator()(std::size_t index) {
  auto& slot = bound_.at(index);
  if (!slot) slot = tape_.external(store_.tensor(index), requires_grad_);
  return *slot;
}

template <class T>
void ParamBinding<T>::accumulate_into(Grads<T>& acc) const {
  for (std::size_t i = 0; i < bound_.size(); ++i) {
    if (!bound_[i] || !tape_.has_grad(*bound_[i])) continue;
    const Tensor<T> g = tape_.grad(*bound_[i]);
    kernels::active<T>().axpy(g.size(), T(1), g.data(), acc[i].data());
  }
}

template <class T>
Tensor<T> xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor<T> t({fan_in, fan_out});
  for (auto& v : t.values()) v = static_cast<T>((2.0 * uniform01(rng) - 1.0) * a);
  return t;
}

template <class T>
Tensor<T> normal_tensor(Shape shape, double stddev, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(standard_normal(rng) * stddev);
  return t;
}

template class ParamStore<float>;
template class ParamStore<double>;
template class ParamBinding<float>;
template class ParamBinding<double>;
template Grads<float> zero_grads(const ParamStore<float>&);
template Grads<double> zero_grads(const ParamStore<double>&);
template Tensor<float> xavier_uniform(std::size_t, std::size_t, Rng&);
template Tensor<double> xavier_uniform(std::size_t, std::size_t, Rng&);
template Tensor<float> normal_tensor(Shape, double, Rng&);
template Tensor<double> normal_tensor(Shape, double, Rng&);

}  // namespace infill
