#include "infill/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "infill/kernels.hpp"

namespace infill {

// ---------------------------------------------------------------------------
// Tape

template <class T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

template <class T>
Var<T> Tape<T>::variable(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

template <class T>
Var<T> Tape<T>::external(const Tensor<T>& value, bool requires_grad) {
  Node n;
  n.external = &value;
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

template <class T>
Var<T> Tape<T>::record(Tensor<T> value, std::span<const Var<T>> inputs, Backward fn) {
#ifndef NDEBUG
  if (!all_finite(value)) throw NumericError("non-finite value produced on tape");
#endif
  Node n;
  n.value = std::move(value);
  for (const auto& in : inputs) {
    if (in.tape != this) throw ContractError("op inputs belong to a different tape");
    n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

template <class T>
Var<T> Tape<T>::record(Tensor<T> value, std::initializer_list<Var<T>> inputs, Backward fn) {
  return record(std::move(value), std::span<const Var<T>>(inputs.begin(), inputs.size()),
                std::move(fn));
}

template <class T>
const Tensor<T>& Tape<T>::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

template <class T>
Tensor<T>& Tape<T>::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor<T>(value(id).shape());
  return n.grad;
}

template <class T>
Tensor<T> Tape<T>::grad(Var<T> v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.empty()) return Tensor<T>(value(v.id).shape());
  return n.grad;
}

template <class T>
void Tape<T>::backward(Var<T> loss) {
  if (loss.tape != this) throw ContractError("loss belongs to a different tape");
  if (value(loss.id).size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_string(value(loss.id).shape()));
  }
  if (backward_done_) throw ContractError("backward() already ran on this tape");
  backward_done_ = true;
  if (!nodes_[loss.id].requires_grad) return;
  grad_buffer(loss.id)[0] = T(1);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    ++backward_visits_;
    n.backward(*this, value(id), n.grad);
  }
}

template class Tape<float>;
template class Tape<double>;

namespace ad {
namespace {

template <class T>
const kernels::Table<T>& K() {
  return kernels::active<T>();
}

template <class T>
void require_rank2(const Tensor<T>& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
  }
}

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

template <class T>
void accumulate(Tape<T>& tape, Var<T> v, const Tensor<T>& g) {
  if (!v.requires_grad()) return;
  Tensor<T>& buf = tape.grad_buffer(v.id);
  K<T>().axpy(g.size(), T(1), g.data(), buf.data());
}

// Elementwise unary op; `dfdx(x, y)` is the derivative given input and output.
template <class T, class F, class D>
Var<T> unary(Var<T> a, F f, D dfdx) {
  const Tensor<T>& av = a.value();
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  return a.tape->record(std::move(out), {a},
                        [a, dfdx](Tape<T>& tape, const Tensor<T>& y, const Tensor<T>& g) {
                          const Tensor<T>& x = a.value();
                          Tensor<T>& ga = tape.grad_buffer(a.id);
                          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(x[i], y[i]);
                        });
}

}  // namespace

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  require_rank2(av, "matmul");
  require_rank2(bv, "matmul");
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions differ " + shape_string(av.shape()) + " * " +
                         shape_string(bv.shape()));
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor<T> out({m, n});
  K<T>().gemm_nn(m, n, k, av.data(), bv.data(), out.data(), false);
  return a.tape->record(std::move(out), {a, b}, [a, b, m, n, k](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& g) {
    if (a.requires_grad()) {
      K<T>().gemm_nt(m, k, n, g.data(), b.value().data(), tape.grad_buffer(a.id).data(), true);
    }
    if (b.requires_grad()) {
      K<T>().gemm_tn(k, n, m, a.value().data(), g.data(), tape.grad_buffer(b.id).data(), true);
    }
  });
}

template <class T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  require_rank2(av, "matmul_nt");
  require_rank2(bv, "matmul_nt");
  if (av.cols() != bv.cols()) {
    throw DimensionError("matmul_nt: inner dimensions differ " + shape_string(av.shape()) +
                         " * " + shape_string(bv.shape()) + "^T");
  }
  const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
  Tensor<T> out({m, n});
  K<T>().gemm_nt(m, n, k, av.data(), bv.data(), out.data(), false);
  return a.tape->record(std::move(out), {a, b}, [a, b, m, n, k](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& g) {
    // out = A B^T: dA = G B, dB = G^T A
    if (a.requires_grad()) {
      K<T>().gemm_nn(m, k, n, g.data(), b.value().data(), tape.grad_buffer(a.id).data(), true);
    }
    if (b.requires_grad()) {
      K<T>().gemm_tn(n, k, m, g.data(), a.value().data(), tape.grad_buffer(b.id).data(), true);
    }
  });
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor<T> out(a.value().shape());
  K<T>().add(out.size(), a.value().data(), b.value().data(), out.data());
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& g) {
    accumulate(tape, a, g);
    accumulate(tape, b, g);
  });
}

template <class T>
Var<T> add_row(Var<T> a, Var<T> bias) {
  const auto& av = a.value();
  require_rank2(av, "add_row");
  const std::size_t m = av.rows(), n = av.cols();
  if (bias.value().size() != n) {
    throw DimensionError("add_row: bias of shape " + shape_string(bias.shape()) +
                         " for rows of width " + std::to_string(n));
  }
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < m; ++i) {
    K<T>().add(n, av.data() + i * n, bias.value().data(), out.data() + i * n);
  }
  return a.tape->record(std::move(out), {a, bias}, [a, bias, m, n](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& g) {
    accumulate(tape, a, g);
    if (bias.requires_grad()) {
      Tensor<T>& gb = tape.grad_buffer(bias.id);
      for (std::size_t i = 0; i < m; ++i) K<T>().axpy(n, T(1), g.data() + i * n, gb.data());
    }
  });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor<T> out(a.value().shape());
  K<T>().mul(out.size(), a.value().data(), b.value().data(), out.data());
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& g) {
    if (a.requires_grad()) {
      K<T>().mul_acc(g.size(), g.data(), b.value().data(), tape.grad_buffer(a.id).data());
    }
    if (b.requires_grad()) {
      K<T>().mul_acc(g.size(), g.data(), a.value().data(), tape.grad_buffer(b.id).data());
    }
  });
}

template <class T>
Var<T> scale(Var<T> a, T factor) {
  Tensor<T> out(a.value().shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * factor;
  return a.tape->record(std::move(out), {a}, [a, factor](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& g) {
    if (a.requires_grad()) K<T>().axpy(g.size(), factor, g.data(), tape.grad_buffer(a.id).data());
  });
}

template <class T>
Var<T> relu(Var<T> a) {
  return unary(a, [](T x) { return x > T(0) ? x : T(0); },
               [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <class T>
Var<T> sigmoid(Var<T> a) {
  auto f = [](T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
  };
  return unary(a, f, [](T, T s) { return s * (T(1) - s); });
}

template <class T>
Var<T> tanh(Var<T> a) {
  return unary(a, [](T x) { return std::tanh(x); }, [](T, T t) { return T(1) - t * t; });
}

template <class T>
Var<T> softmax(Var<T> x, std::size_t axis, const Tensor<T>* additive_mask) {
  const auto& xv = x.value();
  if (axis >= xv.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         shape_string(xv.shape()));
  }
  if (additive_mask) require_same_shape(xv, *additive_mask, "softmax mask");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= xv.dim(i);
  for (std::size_t i = axis + 1; i < xv.rank(); ++i) inner *= xv.dim(i);
  const std::size_t len = xv.dim(axis);

  Tensor<T> out(xv.shape());
  std::vector<T> buf(len);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < len; ++j) {
        const std::size_t idx = base + j * inner;
        buf[j] = xv[idx] + (additive_mask ? (*additive_mask)[idx] : T(0));
        mx = std::max(mx, buf[j]);
      }
      if (!std::isfinite(mx)) throw ContractError("softmax: every entry of a slice is masked");
      T total = T(0);
      for (std::size_t j = 0; j < len; ++j) {
        buf[j] = std::exp(buf[j] - mx);
        total += buf[j];
      }
      for (std::size_t j = 0; j < len; ++j) out[base + j * inner] = buf[j] / total;
    }
  }

  return x.tape->record(std::move(out), {x},
                        [x, outer, inner, len](Tape<T>& tape, const Tensor<T>& y, const Tensor<T>& g) {
                          Tensor<T>& gx = tape.grad_buffer(x.id);
                          for (std::size_t o = 0; o < outer; ++o) {
                            for (std::size_t in = 0; in < inner; ++in) {
                              const std::size_t base = o * len * inner + in;
                              T dotp = T(0);
                              for (std::size_t j = 0; j < len; ++j) {
                                dotp += g[base + j * inner] * y[base + j * inner];
                              }
                              for (std::size_t j = 0; j < len; ++j) {
                                const std::size_t idx = base + j * inner;
                                gx[idx] += y[idx] * (g[idx] - dotp);
                              }
                            }
                          }
                        });
}

template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, T eps) {
  const auto& xv = x.value();
  if (xv.rank() < 1 || xv.dim(xv.rank() - 1) < 2) {
    throw DimensionError("layer_norm: last axis must have length >= 2, got " +
                         shape_string(xv.shape()));
  }
  const std::size_t n = xv.dim(xv.rank() - 1);
  const std::size_t rows = xv.size() / n;
  if (gamma.value().size() != n || beta.value().size() != n) {
    throw DimensionError("layer_norm: gamma/beta must have " + std::to_string(n) + " entries");
  }
  Tensor<T> out(xv.shape());
  std::vector<T> xhat(xv.size());
  std::vector<T> inv_std(rows);
  const T* gm = gamma.value().data();
  const T* bt = beta.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xv.data() + r * n;
    T mean = T(0);
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= T(n);
    T var = T(0);
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= T(n);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const T h = (row[j] - mean) * is;
      xhat[r * n + j] = h;
      out[r * n + j] = h * gm[j] + bt[j];
    }
  }
  return x.tape->record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, n, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape<T>& tape, const Tensor<T>&, const Tensor<T>& g) {
        const T* gm = gamma.value().data();
        if (gamma.requires_grad()) {
          Tensor<T>& gg = tape.grad_buffer(gamma.id);
          for (std::size_t r = 0; r < rows; ++r) {
            K<T>().mul_acc(n, g.data() + r * n, xhat.data() + r * n, gg.data());
          }
        }
        if (beta.requires_grad()) {
          Tensor<T>& gb = tape.grad_buffer(beta.id);
          for (std::size_t r = 0; r < rows; ++r) K<T>().axpy(n, T(1), g.data() + r * n, gb.data());
        }
        if (x.requires_grad()) {
          Tensor<T>& gx = tape.grad_buffer(x.id);
          std::vector<T> dh(n);
          for (std::size_t r = 0; r < rows; ++r) {
            T mean_dh = T(0), mean_dh_h = T(0);
            for (std::size_t j = 0; j < n; ++j) {
              dh[j] = g[r * n + j] * gm[j];
              mean_dh += dh[j];
              mean_dh_h += dh[j] * xhat[r * n + j];
            }
            mean_dh /= T(n);
            mean_dh_h /= T(n);
            for (std::size_t j = 0; j < n; ++j) {
              gx[r * n + j] += inv_std[r] * (dh[j] - mean_dh - xhat[r * n + j] * mean_dh_h);
            }
          }
        }
      });
}

template <class T>
Var<T> embedding_lookup(Var<T> table, std::span<const int> ids) {
  const auto& tv = table.value();
  require_rank2(tv, "embedding_lookup");
  const std::size_t vocab = tv.rows(), d = tv.cols();
  std::vector<int> idv(ids.begin(), ids.end());
  Tensor<T> out({idv.size(), d});
  for (std::size_t i = 0; i < idv.size(); ++i) {
    if (idv[i] < 0 || static_cast<std::size_t>(idv[i]) >= vocab) {
      throw IndexError("embedding_lookup: id " + std::to_string(idv[i]) + " outside [0, " +
                       std::to_string(vocab) + ")");
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(idv[i]) * d, d, out.data() + i * d);
  }
  return table.tape->record(std::move(out), {table},
                            [table, d, idv = std::move(idv)](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& g) {
                              Tensor<T>& gt = tape.grad_buffer(table.id);
                              for (std::size_t i = 0; i < idv.size(); ++i) {
                                K<T>().axpy(d, T(1), g.data() + i * d,
                                            gt.data() + static_cast<std::size_t>(idv[i]) * d);
                              }
                            });
}

template <class T>
Var<T> cross_entropy(Var<T> logits, std::span<const int> targets, std::span<const std::uint8_t> mask) {
  const auto& lv = logits.value();
  require_rank2(lv, "cross_entropy");
  const std::size_t n = lv.rows(), vocab = lv.cols();
  if (targets.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(n) + " rows");
  }
  if (!mask.empty() && mask.size() != n) {
    throw DimensionError("cross_entropy: mask length " + std::to_string(mask.size()) +
                         " for " + std::to_string(n) + " rows");
  }
  std::vector<int> tg(targets.begin(), targets.end());
  std::vector<std::uint8_t> mk(n, 1);
  if (!mask.empty()) std::copy(mask.begin(), mask.end(), mk.begin());

  // Softmax probabilities are kept for the backward pass.
  std::vector<T> probs(n * vocab, T(0));
  T loss = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!mk[i]) continue;
    if (tg[i] < 0 || static_cast<std::size_t>(tg[i]) >= vocab) {
      throw IndexError("cross_entropy: target " + std::to_string(tg[i]) + " outside [0, " +
                       std::to_string(vocab) + ")");
    }
    const T* row = lv.data() + i * vocab;
    const T mx = *std::max_element(row, row + vocab);
    T total = T(0);
    for (std::size_t j = 0; j < vocab; ++j) {
      probs[i * vocab + j] = std::exp(row[j] - mx);
      total += probs[i * vocab + j];
    }
    for (std::size_t j = 0; j < vocab; ++j) probs[i * vocab + j] /= total;
    loss += -(row[tg[i]] - mx - std::log(total));
  }
  return logits.tape->record(
      Tensor<T>::scalar(loss), {logits},
      [logits, n, vocab, tg = std::move(tg), mk = std::move(mk), probs = std::move(probs)](
          Tape<T>& tape, const Tensor<T>&, const Tensor<T>& g) {
        const T go = g[0];
        Tensor<T>& gl = tape.grad_buffer(logits.id);
        for (std::size_t i = 0; i < n; ++i) {
          if (!mk[i]) continue;
          K<T>().axpy(vocab, go, probs.data() + i * vocab, gl.data() + i * vocab);
          gl[i * vocab + static_cast<std::size_t>(tg[i])] -= go;
        }
      });
}

template <class T>
Var<T> sum(Var<T> x) {
  T s = T(0);
  for (T v : x.value().values()) s += v;
  return x.tape->record(Tensor<T>::scalar(s), {x}, [x](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& g) {
    Tensor<T>& gx = tape.grad_buffer(x.id);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
  });
}

template <class T>
Var<T> slice_cols(Var<T> x, std::size_t begin, std::size_t count) {
  const auto& xv = x.value();
  require_rank2(xv, "slice_cols");
  const std::size_t m = xv.rows(), n = xv.cols();
  if (begin + count > n) throw DimensionError("slice_cols: range past column " + std::to_string(n));
  Tensor<T> out({m, count});
  for (std::size_t i = 0; i < m; ++i) std::copy_n(xv.data() + i * n + begin, count, out.data() + i * count);
  return x.tape->record(std::move(out), {x}, [x, m, n, begin, count](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& g) {
    Tensor<T>& gx = tape.grad_buffer(x.id);
    for (std::size_t i = 0; i < m; ++i) {
      K<T>().axpy(count, T(1), g.data() + i * count, gx.data() + i * n + begin);
    }
  });
}

template <class T>
Var<T> slice_rows(Var<T> x, std::size_t begin, std::size_t count) {
  const auto& xv = x.value();
  require_rank2(xv, "slice_rows");
  const std::size_t m = xv.rows(), n = xv.cols();
  if (begin + count > m) throw DimensionError("slice_rows: range past row " + std::to_string(m));
  Tensor<T> out({count, n});
  std::copy_n(xv.data() + begin * n, count * n, out.data());
  return x.tape->record(std::move(out), {x}, [x, n, begin, count](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& g) {
    Tensor<T>& gx = tape.grad_buffer(x.id);
    K<T>().axpy(count * n, T(1), g.data(), gx.data() + begin * n);
  });
}

template <class T>
Var<T> concat_cols(std::span<const Var<T>> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t m = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank2(p.value(), "concat_cols");
    if (p.value().rows() != m) throw DimensionError("concat_cols: row counts differ");
    widths.push_back(p.value().cols());
    total += p.value().cols();
  }
  Tensor<T> out({m, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& pv = parts[k].value();
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(pv.data() + i * widths[k], widths[k], out.data() + i * total + off);
    }
    off += widths[k];
  }
  std::vector<Var<T>> ps(parts.begin(), parts.end());
  return parts[0].tape->record(std::move(out), parts,
                               [ps, widths, m, total](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& g) {
                                 std::size_t off = 0;
                                 for (std::size_t k = 0; k < ps.size(); ++k) {
                                   if (ps[k].requires_grad()) {
                                     Tensor<T>& gp = tape.grad_buffer(ps[k].id);
                                     for (std::size_t i = 0; i < m; ++i) {
                                       K<T>().axpy(widths[k], T(1), g.data() + i * total + off,
                                                   gp.data() + i * widths[k]);
                                     }
                                   }
                                   off += widths[k];
                                 }
                               });
}

template <class T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t n = parts[0].value().cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank2(p.value(), "concat_rows");
    if (p.value().cols() != n) throw DimensionError("concat_rows: column counts differ");
    total += p.value().rows();
  }
  Tensor<T> out({total, n});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy_n(p.value().data(), p.value().size(), out.data() + off * n);
    off += p.value().rows();
  }
  std::vector<Var<T>> ps(parts.begin(), parts.end());
  return parts[0].tape->record(std::move(out), parts, [ps, n](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& g) {
    std::size_t off = 0;
    for (const auto& p : ps) {
      const std::size_t sz = p.value().size();
      if (p.requires_grad()) K<T>().axpy(sz, T(1), g.data() + off * n, tape.grad_buffer(p.id).data());
      off += p.value().rows();
    }
  });
}

template <class T>
Var<T> dropout(Var<T> x, double p, Rng& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
  const auto& xv = x.value();
  const T keep_scale = T(1.0 / (1.0 - p));
  Tensor<T> mask(xv.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    mask[i] = u < p ? T(0) : keep_scale;
  }
  Tensor<T> out(xv.shape());
  K<T>().mul(out.size(), xv.data(), mask.data(), out.data());
  return x.tape->record(std::move(out), {x}, [x, mask = std::move(mask)](Tape<T>& tape, const Tensor<T>&, const Tensor<T>& g) {
    K<T>().mul_acc(g.size(), g.data(), mask.data(), tape.grad_buffer(x.id).data());
  });
}

#define INFILL_INSTANTIATE_OPS(T)                                                             \
  template Var<T> matmul(Var<T>, Var<T>);                                                     \
  template Var<T> matmul_nt(Var<T>, Var<T>);                                                  \
  template Var<T> add(Var<T>, Var<T>);                                                        \
  template Var<T> add_row(Var<T>, Var<T>);                                                    \
  template Var<T> mul(Var<T>, Var<T>);                                                        \
  template Var<T> scale(Var<T>, T);                                                           \
  template Var<T> relu(Var<T>);                                                               \
  template Var<T> sigmoid(Var<T>);                                                            \
  template Var<T> tanh(Var<T>);                                                               \
  template Var<T> softmax(Var<T>, std::size_t, const Tensor<T>*);                             \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                                      \
  template Var<T> embedding_lookup(Var<T>, std::span<const int>);                             \
  template Var<T> cross_entropy(Var<T>, std::span<const int>, std::span<const std::uint8_t>); \
  template Var<T> sum(Var<T>);                                                                \
  template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                               \
  template Var<T> slice_rows(Var<T>, std::size_t, std::size_t);                               \
  template Var<T> concat_cols(std::span<const Var<T>>);                                       \
  template Var<T> concat_rows(std::span<const Var<T>>);                                       \
  template Var<T> dropout(Var<T>, double, Rng&);

INFILL_INSTANTIATE_OPS(float)
INFILL_INSTANTIATE_OPS(double)

#undef INFILL_INSTANTIATE_OPS

}  // namespace ad
}  // namespace infill
