#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the replex authors

/**
 * @file tensor.hpp
 * @brief Reverse-mode automatic differentiation over dense 2-D matrices.
 *
 * A Tensor is a shared handle to a row-major matrix of 64-bit values plus a
 * same-shape gradient buffer. Operations compute their result eagerly and,
 * while the tape is recording, push a closure that propagates gradients back
 * into their operands. backward() replays the closures in reverse order, so
 * every operand's grad ends up holding d(loss)/d(operand), accumulated (+=)
 * so shared parameters and repeated uses combine correctly.
 *
 * The op set is exactly what the encoder-decoder model needs: matmul (plus a
 * transposed-right variant for attention scores), elementwise add/mul/affine,
 * column concatenation, sigmoid/tanh/row softmax, embedding lookup, inverted
 * dropout, fused log-softmax NLL, row stacking and weighted reduction.
 *
 * Everything is single-threaded by design: a tape and the tensors hanging off
 * it belong to one thread; distinct tapes are independent.
 */

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "replex/rng.hpp"

namespace replex::autograd {

struct TensorData {
  int rows = 0;
  int cols = 0;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;

  int size() const { return rows * cols; }
  double& at(int r, int c) { return value[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return value[static_cast<std::size_t>(r) * cols + c]; }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

using Tensor = std::shared_ptr<TensorData>;

inline Tensor make_tensor(int rows, int cols, bool requires_grad = false) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("make_tensor: non-positive shape");
  auto t = std::make_shared<TensorData>();
  t->rows = rows;
  t->cols = cols;
  t->value.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  t->grad.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  t->requires_grad = requires_grad;
  return t;
}

inline Tensor make_tensor(int rows, int cols, std::vector<double> value,
                          bool requires_grad = false) {
  Tensor t = make_tensor(rows, cols, requires_grad);
  if (value.size() != t->value.size())
    throw std::invalid_argument("make_tensor: value length does not match shape");
  t->value = std::move(value);
  return t;
}

/// Trainable parameter with uniform init in [lo, hi).
inline Tensor make_param(int rows, int cols, Rng& rng, double lo = -0.08, double hi = 0.08) {
  Tensor t = make_tensor(rows, cols, true);
  for (double& v : t->value) v = rng.uniform(lo, hi);
  return t;
}

namespace detail {

inline std::string shape_str(const Tensor& t) {
  return "[" + std::to_string(t->rows) + "x" + std::to_string(t->cols) + "]";
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace detail

/// Ordered record of backward closures. Closures capture their operand
/// handles, so results of recorded ops stay alive until clear().
class Tape {
 public:
  void push(std::function<void()> fn) { ops_.push_back(std::move(fn)); }
  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }
  std::size_t size() const { return ops_.size(); }
  void clear() { ops_.clear(); }

  /// Seeds d(loss)/d(loss) = seed and replays the tape backwards. Gradients
  /// accumulate into every recorded operand. loss must be 1x1.
  void backward(const Tensor& loss, double seed = 1.0) {
    detail::require(loss->rows == 1 && loss->cols == 1,
                    "backward: loss must be 1x1, got " + detail::shape_str(loss));
    loss->grad[0] += seed;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> ops_;
  bool recording_ = true;
};

/// Turns recording off for generation / evaluation within a scope.
class NoGradGuard {
 public:
  explicit NoGradGuard(Tape& tape) : tape_(tape), prev_(tape.recording()) {
    tape_.set_recording(false);
  }
  ~NoGradGuard() { tape_.set_recording(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape& tape_;
  bool prev_;
};

namespace detail {

inline bool track(const Tape& tape, const Tensor& a) {
  return tape.recording() && a->requires_grad;
}

inline bool track(const Tape& tape, const Tensor& a, const Tensor& b) {
  return tape.recording() && (a->requires_grad || b->requires_grad);
}

}  // namespace detail

// ============================================================================
// Linear algebra
// ============================================================================

inline Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::require(a->cols == b->rows, "matmul: inner dimensions differ, " +
                                          detail::shape_str(a) + " x " + detail::shape_str(b));
  const int m = a->rows, k = a->cols, n = b->cols;
  Tensor out = make_tensor(m, n);
  {
    const double* av = a->value.data();
    const double* bv = b->value.data();
    double* ov = out->value.data();
    for (int i = 0; i < m; ++i)
      for (int p = 0; p < k; ++p) {
        const double aip = av[i * k + p];
        const double* brow = bv + p * n;
        double* orow = ov + i * n;
        for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
      }
  }
  if (detail::track(tape, a, b)) {
    out->requires_grad = true;
    tape.push([a, b, out] {
      const int m = a->rows, k = a->cols, n = b->cols;
      const double* og = out->grad.data();
      if (a->requires_grad) {
        double* ag = a->grad.data();
        const double* bv = b->value.data();
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            const double* brow = bv + p * n;
            const double* grow = og + i * n;
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
            ag[i * k + p] += s;
          }
      }
      if (b->requires_grad) {
        double* bg = b->grad.data();
        const double* av = a->value.data();
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            double* bgrow = bg + p * n;
            const double* grow = og + i * n;
            for (int j = 0; j < n; ++j) bgrow[j] += aip * grow[j];
          }
      }
    });
  }
  return out;
}

/// a * b^T without materializing the transpose; used for attention scores
/// (query [1,h] against stacked encoder states [T,h]).
inline Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::require(a->cols == b->cols, "matmul_nt: column counts differ, " +
                                          detail::shape_str(a) + " x " + detail::shape_str(b) +
                                          "^T");
  const int m = a->rows, k = a->cols, n = b->rows;
  Tensor out = make_tensor(m, n);
  {
    const double* av = a->value.data();
    const double* bv = b->value.data();
    double* ov = out->value.data();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        const double* arow = av + i * k;
        const double* brow = bv + j * k;
        double s = 0.0;
        for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
        ov[i * n + j] = s;
      }
  }
  if (detail::track(tape, a, b)) {
    out->requires_grad = true;
    tape.push([a, b, out] {
      const int m = a->rows, k = a->cols, n = b->rows;
      const double* og = out->grad.data();
      if (a->requires_grad) {
        double* ag = a->grad.data();
        const double* bv = b->value.data();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) {
            const double g = og[i * n + j];
            const double* brow = bv + j * k;
            double* arow = ag + i * k;
            for (int p = 0; p < k; ++p) arow[p] += g * brow[p];
          }
      }
      if (b->requires_grad) {
        double* bg = b->grad.data();
        const double* av = a->value.data();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) {
            const double g = og[i * n + j];
            const double* arow = av + i * k;
            double* brow = bg + j * k;
            for (int p = 0; p < k; ++p) brow[p] += g * arow[p];
          }
      }
    });
  }
  return out;
}

// ============================================================================
// Elementwise
// ============================================================================

/// Same-shape addition, or row broadcast when b is [1, n] (bias add).
inline Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  const bool same = a->rows == b->rows && a->cols == b->cols;
  const bool bcast = !same && b->rows == 1 && b->cols == a->cols;
  detail::require(same || bcast, "add: incompatible shapes " + detail::shape_str(a) + " + " +
                                     detail::shape_str(b));
  Tensor out = make_tensor(a->rows, a->cols);
  for (int i = 0; i < a->rows; ++i)
    for (int j = 0; j < a->cols; ++j)
      out->at(i, j) = a->at(i, j) + (same ? b->at(i, j) : b->at(0, j));
  if (detail::track(tape, a, b)) {
    out->requires_grad = true;
    tape.push([a, b, out, same] {
      const int n = a->size();
      if (a->requires_grad)
        for (int i = 0; i < n; ++i) a->grad[i] += out->grad[i];
      if (b->requires_grad) {
        if (same) {
          for (int i = 0; i < n; ++i) b->grad[i] += out->grad[i];
        } else {
          for (int i = 0; i < a->rows; ++i)
            for (int j = 0; j < a->cols; ++j)
              b->grad[j] += out->grad[static_cast<std::size_t>(i) * a->cols + j];
        }
      }
    });
  }
  return out;
}

inline Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::require(a->rows == b->rows && a->cols == b->cols,
                  "mul: incompatible shapes " + detail::shape_str(a) + " * " +
                      detail::shape_str(b));
  Tensor out = make_tensor(a->rows, a->cols);
  for (int i = 0; i < a->size(); ++i) out->value[i] = a->value[i] * b->value[i];
  if (detail::track(tape, a, b)) {
    out->requires_grad = true;
    tape.push([a, b, out] {
      const int n = a->size();
      if (a->requires_grad)
        for (int i = 0; i < n; ++i) a->grad[i] += out->grad[i] * b->value[i];
      if (b->requires_grad)
        for (int i = 0; i < n; ++i) b->grad[i] += out->grad[i] * a->value[i];
    });
  }
  return out;
}

/// Elementwise scale * x + shift with scalar constants (no gradient through
/// the constants). Covers negation and the highway gate's (1 - z).
inline Tensor affine(Tape& tape, const Tensor& x, double scale, double shift) {
  Tensor out = make_tensor(x->rows, x->cols);
  for (int i = 0; i < x->size(); ++i) out->value[i] = scale * x->value[i] + shift;
  if (detail::track(tape, x)) {
    out->requires_grad = true;
    tape.push([x, out, scale] {
      for (int i = 0; i < x->size(); ++i) x->grad[i] += scale * out->grad[i];
    });
  }
  return out;
}

inline Tensor sigmoid(Tape& tape, const Tensor& x) {
  Tensor out = make_tensor(x->rows, x->cols);
  for (int i = 0; i < x->size(); ++i) out->value[i] = 1.0 / (1.0 + std::exp(-x->value[i]));
  if (detail::track(tape, x)) {
    out->requires_grad = true;
    tape.push([x, out] {
      for (int i = 0; i < x->size(); ++i) {
        const double y = out->value[i];
        x->grad[i] += out->grad[i] * y * (1.0 - y);
      }
    });
  }
  return out;
}

inline Tensor tanh(Tape& tape, const Tensor& x) {
  Tensor out = make_tensor(x->rows, x->cols);
  for (int i = 0; i < x->size(); ++i) out->value[i] = std::tanh(x->value[i]);
  if (detail::track(tape, x)) {
    out->requires_grad = true;
    tape.push([x, out] {
      for (int i = 0; i < x->size(); ++i) {
        const double y = out->value[i];
        x->grad[i] += out->grad[i] * (1.0 - y * y);
      }
    });
  }
  return out;
}

// ============================================================================
// Shape
// ============================================================================

inline Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b) {
  detail::require(a->rows == b->rows, "concat_cols: row counts differ, " +
                                          detail::shape_str(a) + " | " + detail::shape_str(b));
  Tensor out = make_tensor(a->rows, a->cols + b->cols);
  for (int i = 0; i < a->rows; ++i) {
    for (int j = 0; j < a->cols; ++j) out->at(i, j) = a->at(i, j);
    for (int j = 0; j < b->cols; ++j) out->at(i, a->cols + j) = b->at(i, j);
  }
  if (detail::track(tape, a, b)) {
    out->requires_grad = true;
    tape.push([a, b, out] {
      for (int i = 0; i < a->rows; ++i) {
        const double* grow = out->grad.data() + static_cast<std::size_t>(i) * out->cols;
        if (a->requires_grad) {
          double* ag = a->grad.data() + static_cast<std::size_t>(i) * a->cols;
          for (int j = 0; j < a->cols; ++j) ag[j] += grow[j];
        }
        if (b->requires_grad) {
          double* bg = b->grad.data() + static_cast<std::size_t>(i) * b->cols;
          for (int j = 0; j < b->cols; ++j) bg[j] += grow[a->cols + j];
        }
      }
    });
  }
  return out;
}

/// Stacks k row vectors [1, n] into one [k, n] matrix.
inline Tensor stack_rows(Tape& tape, const std::vector<Tensor>& rows) {
  detail::require(!rows.empty(), "stack_rows: empty input");
  const int n = rows.front()->cols;
  for (const Tensor& r : rows)
    detail::require(r->rows == 1 && r->cols == n,
                    "stack_rows: every input must be [1x" + std::to_string(n) + "], got " +
                        detail::shape_str(r));
  Tensor out = make_tensor(static_cast<int>(rows.size()), n);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int j = 0; j < n; ++j) out->value[r * n + j] = rows[r]->value[j];
  bool any = false;
  for (const Tensor& r : rows) any = any || r->requires_grad;
  if (tape.recording() && any) {
    out->requires_grad = true;
    tape.push([rows, out, n] {
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!rows[r]->requires_grad) continue;
        const double* grow = out->grad.data() + r * n;
        for (int j = 0; j < n; ++j) rows[r]->grad[j] += grow[j];
      }
    });
  }
  return out;
}

// ============================================================================
// Softmax family
// ============================================================================

/// Row-wise softmax with max subtraction.
inline Tensor softmax_rows(Tape& tape, const Tensor& x) {
  Tensor out = make_tensor(x->rows, x->cols);
  for (int i = 0; i < x->rows; ++i) {
    const double* xrow = x->value.data() + static_cast<std::size_t>(i) * x->cols;
    double* orow = out->value.data() + static_cast<std::size_t>(i) * x->cols;
    double mx = xrow[0];
    for (int j = 1; j < x->cols; ++j) mx = std::max(mx, xrow[j]);
    double sum = 0.0;
    for (int j = 0; j < x->cols; ++j) {
      orow[j] = std::exp(xrow[j] - mx);
      sum += orow[j];
    }
    for (int j = 0; j < x->cols; ++j) orow[j] /= sum;
  }
  if (detail::track(tape, x)) {
    out->requires_grad = true;
    tape.push([x, out] {
      for (int i = 0; i < x->rows; ++i) {
        const std::size_t off = static_cast<std::size_t>(i) * x->cols;
        const double* y = out->value.data() + off;
        const double* gy = out->grad.data() + off;
        double* gx = x->grad.data() + off;
        double dot = 0.0;
        for (int j = 0; j < x->cols; ++j) dot += gy[j] * y[j];
        for (int j = 0; j < x->cols; ++j) gx[j] += y[j] * (gy[j] - dot);
      }
    });
  }
  return out;
}

struct NllResult {
  Tensor loss;                // [T, 1] per-token negative log-likelihood
  std::vector<double> probs;  // p_t = exp(-loss_t), the target probabilities
};

/// Fused log-softmax + NLL over a [T, V] logit matrix with one target id per
/// row. Returns the per-token losses as a tensor (so weighted reductions stay
/// differentiable) and the target probabilities as plain numbers (for the
/// weighting schemes, which treat them as constants).
inline NllResult log_softmax_nll(Tape& tape, const Tensor& logits,
                                 const std::vector<int>& targets) {
  detail::require(static_cast<int>(targets.size()) == logits->rows,
                  "log_softmax_nll: need one target per logit row");
  const int rows = logits->rows, v = logits->cols;
  for (int t : targets)
    detail::require(t >= 0 && t < v, "log_softmax_nll: target id out of range");
  Tensor loss = make_tensor(rows, 1);
  std::vector<double> probs(static_cast<std::size_t>(rows));
  auto softmax = std::make_shared<std::vector<double>>(logits->value.size());
  for (int i = 0; i < rows; ++i) {
    const double* xrow = logits->value.data() + static_cast<std::size_t>(i) * v;
    double* srow = softmax->data() + static_cast<std::size_t>(i) * v;
    double mx = xrow[0];
    for (int j = 1; j < v; ++j) mx = std::max(mx, xrow[j]);
    double sum = 0.0;
    for (int j = 0; j < v; ++j) {
      srow[j] = std::exp(xrow[j] - mx);
      sum += srow[j];
    }
    const double lse = mx + std::log(sum);
    for (int j = 0; j < v; ++j) srow[j] /= sum;
    loss->value[i] = lse - xrow[targets[static_cast<std::size_t>(i)]];
    probs[static_cast<std::size_t>(i)] = std::exp(-loss->value[i]);
  }
  if (detail::track(tape, logits)) {
    loss->requires_grad = true;
    tape.push([logits, loss, softmax, targets] {
      const int rows = logits->rows, v = logits->cols;
      for (int i = 0; i < rows; ++i) {
        const double g = loss->grad[i];
        if (g == 0.0) continue;
        const double* srow = softmax->data() + static_cast<std::size_t>(i) * v;
        double* grow = logits->grad.data() + static_cast<std::size_t>(i) * v;
        for (int j = 0; j < v; ++j) grow[j] += g * srow[j];
        grow[targets[static_cast<std::size_t>(i)]] -= g;
      }
    });
  }
  return {loss, probs};
}

// ============================================================================
// Lookup, dropout, reductions
// ============================================================================

/// Gathers rows of an embedding table: out[r] = table[ids[r]].
inline Tensor embedding_lookup(Tape& tape, const Tensor& table, const std::vector<int>& ids) {
  detail::require(!ids.empty(), "embedding_lookup: empty id list");
  const int e = table->cols;
  for (int id : ids)
    detail::require(id >= 0 && id < table->rows, "embedding_lookup: id out of range");
  Tensor out = make_tensor(static_cast<int>(ids.size()), e);
  for (std::size_t r = 0; r < ids.size(); ++r)
    for (int j = 0; j < e; ++j)
      out->value[r * e + j] = table->value[static_cast<std::size_t>(ids[r]) * e + j];
  if (detail::track(tape, table)) {
    out->requires_grad = true;
    tape.push([table, out, ids] {
      const int e = table->cols;
      for (std::size_t r = 0; r < ids.size(); ++r) {
        const double* grow = out->grad.data() + r * e;
        double* trow = table->grad.data() + static_cast<std::size_t>(ids[r]) * e;
        for (int j = 0; j < e; ++j) trow[j] += grow[j];
      }
    });
  }
  return out;
}

/// Inverted dropout: at train time zeroes entries with probability p and
/// scales survivors by 1/(1-p), so evaluation is the identity. The mask is a
/// pure function of the seed.
inline Tensor dropout(Tape& tape, const Tensor& x, double p, bool training,
                      std::uint64_t seed) {
  detail::require(p >= 0.0 && p < 1.0, "dropout: p must be in [0, 1)");
  if (!training || p == 0.0) return x;
  Rng rng(seed);
  auto mask = std::make_shared<std::vector<double>>(x->value.size());
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& m : *mask) m = rng.next_double() < p ? 0.0 : keep_scale;
  Tensor out = make_tensor(x->rows, x->cols);
  for (int i = 0; i < x->size(); ++i) out->value[i] = x->value[i] * (*mask)[i];
  if (detail::track(tape, x)) {
    out->requires_grad = true;
    tape.push([x, out, mask] {
      for (int i = 0; i < x->size(); ++i) x->grad[i] += out->grad[i] * (*mask)[i];
    });
  }
  return out;
}

/// Scalar sum of all entries.
inline Tensor sum(Tape& tape, const Tensor& x) {
  Tensor out = make_tensor(1, 1);
  double s = 0.0;
  for (double v : x->value) s += v;
  out->value[0] = s;
  if (detail::track(tape, x)) {
    out->requires_grad = true;
    tape.push([x, out] {
      for (int i = 0; i < x->size(); ++i) x->grad[i] += out->grad[0];
    });
  }
  return out;
}

/// Scalar dot product of a column vector with constant weights; the
/// differentiable half of the weighted loss reductions.
inline Tensor weighted_sum(Tape& tape, const Tensor& x, const std::vector<double>& weights) {
  detail::require(x->cols == 1, "weighted_sum: input must be a column vector");
  detail::require(static_cast<int>(weights.size()) == x->rows,
                  "weighted_sum: need one weight per row");
  Tensor out = make_tensor(1, 1);
  double s = 0.0;
  for (int i = 0; i < x->rows; ++i) s += weights[static_cast<std::size_t>(i)] * x->value[i];
  out->value[0] = s;
  if (detail::track(tape, x)) {
    out->requires_grad = true;
    tape.push([x, out, weights] {
      for (int i = 0; i < x->rows; ++i)
        x->grad[i] += weights[static_cast<std::size_t>(i)] * out->grad[0];
    });
  }
  return out;
}

}  // namespace replex::autograd
