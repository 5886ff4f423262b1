#pragma once

// Reverse-mode automatic differentiation over Tensor<T>.
//
// A Tape owns every intermediate produced during one forward pass. Ops append
// a node holding the output value and a closure that pushes the output
// gradient back into the input gradient buffers. Node ids are assigned in
// creation order, so the tape is topologically sorted by construction and
// backward() is a single reverse sweep.

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

#include "infill/tensor.hpp"

namespace infill {

template <class T>
class Tape;

/// Handle to one node of a Tape.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(id); }
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const { return tape->requires_grad(id); }
};

template <class T>
class Tape {
 public:
  // Receives the node's own output value and its accumulated gradient.
  using Backward = std::function<void(Tape&, const Tensor<T>& out, const Tensor<T>& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var<T> constant(Tensor<T> value);
  /// Leaf that receives a gradient.
  Var<T> variable(Tensor<T> value);
  /// Leaf referring to storage owned elsewhere (model parameters). The
  /// referenced tensor must outlive the tape and stay unmodified.
  Var<T> external(const Tensor<T>& value, bool requires_grad);

  /// Appends an op output. `fn` is dropped when no input requires a gradient.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, Backward fn);
  Var<T> record(Tensor<T> value, std::span<const Var<T>> inputs, Backward fn);

  const Tensor<T>& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Populates gradients of every requires_grad node reachable from `loss`.
  /// The loss must hold exactly one element. Can run once per tape.
  void backward(Var<T> loss);

  bool has_grad(Var<T> v) const { return !nodes_[v.id].grad.empty(); }
  /// Gradient of `v`, or zeros shaped like `v` when nothing flowed into it.
  Tensor<T> grad(Var<T> v) const;

  /// Gradient accumulator of node `id`, zero-initialised on first access.
  Tensor<T>& grad_buffer(std::size_t id);

  std::size_t size() const { return nodes_.size(); }
  std::size_t backward_visits() const { return backward_visits_; }

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    bool requires_grad = false;
    Backward backward;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;
  std::size_t backward_visits_ = 0;
};

using Rng = std::mt19937_64;

namespace ad {

/// a[m x k] * b[k x n]
template <class T>
Var<T> matmul(Var<T> a, Var<T> b);

/// a[m x k] * b[n x k]^T
template <class T>
Var<T> matmul_nt(Var<T> a, Var<T> b);

template <class T>
Var<T> add(Var<T> a, Var<T> b);

/// a[m x n] + bias[n] broadcast over rows.
template <class T>
Var<T> add_row(Var<T> a, Var<T> bias);

template <class T>
Var<T> mul(Var<T> a, Var<T> b);

template <class T>
Var<T> scale(Var<T> a, T factor);

template <class T>
Var<T> relu(Var<T> a);

template <class T>
Var<T> sigmoid(Var<T> a);

template <class T>
Var<T> tanh(Var<T> a);

/// Softmax over `axis` with max subtraction. When `additive_mask` is given it
/// must match x's shape and is added to the scores first (use -inf to mask).
template <class T>
Var<T> softmax(Var<T> x, std::size_t axis, const Tensor<T>* additive_mask = nullptr);

/// Normalises each row of x over its last axis, then applies gamma/beta.
template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps = T(1e-6));

/// Gathers rows of table[V x d].
template <class T>
Var<T> embedding_lookup(Var<T> table, std::span<const int> ids);

/// Summed negative log-likelihood of `targets` under softmax(logits) over the
/// rows whose mask entry is non-zero. An empty mask means every row counts.
template <class T>
Var<T> cross_entropy(Var<T> logits, std::span<const int> targets,
                     std::span<const std::uint8_t> mask = {});

template <class T>
Var<T> sum(Var<T> x);

template <class T>
Var<T> slice_cols(Var<T> x, std::size_t begin, std::size_t count);

template <class T>
Var<T> slice_rows(Var<T> x, std::size_t begin, std::size_t count);

template <class T>
Var<T> concat_cols(std::span<const Var<T>> parts);

template <class T>
Var<T> concat_rows(std::span<const Var<T>> parts);

/// Inverted dropout. Identity when p == 0.
template <class T>
Var<T> dropout(Var<T> x, double p, Rng& rng);

}  // namespace ad
}  // namespace infill
