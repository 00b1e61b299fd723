// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "bridgekit/numcore/tape.hpp"

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace bridgekit {

namespace detail {

template <typename Scalar>
void require_same_shape(const char* op, const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.rows(), a.cols()) + " vs " +
                         shape_string(b.rows(), b.cols()));
  }
}

template <typename Scalar>
void require_row(const char* op, const Var<Scalar>& row, Index cols) {
  if (row.rows() != 1 || row.cols() != cols) {
    throw DimensionError(std::string(op) + ": expected a row of width " + std::to_string(cols) + ", got " +
                         shape_string(row.rows(), row.cols()));
  }
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree " + shape_string(a.rows(), a.cols()) + " x " +
                         shape_string(b.rows(), b.cols()));
  }
  using Matrix = MatrixX<Scalar>;
  Matrix out(a.rows(), b.cols());
  out.noalias() = a.value() * b.value();
  const Index ia = a.id(), ib = b.id();
  return a.tape().record("matmul", std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.needs_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

/// a * b^T
template <typename Scalar>
Var<Scalar> matmul_nt(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: inner dimensions disagree " + shape_string(a.rows(), a.cols()) + " x " +
                         shape_string(b.rows(), b.cols()) + "^T");
  }
  using Matrix = MatrixX<Scalar>;
  Matrix out(a.rows(), b.rows());
  out.noalias() = a.value() * b.value().transpose();
  const Index ia = a.id(), ib = b.id();
  return a.tape().record("matmul_nt", std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.accumulate(ia, g * t.value(ib));
    if (t.needs_grad(ib)) t.accumulate(ib, g.transpose() * t.value(ia));
  });
}

/// x * weight + bias, bias broadcast over rows.
template <typename Scalar>
Var<Scalar> affine(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias) {
  if (x.cols() != weight.rows()) {
    throw DimensionError("affine: input " + shape_string(x.rows(), x.cols()) + " vs weight " +
                         shape_string(weight.rows(), weight.cols()));
  }
  detail::require_row("affine", bias, weight.cols());
  using Matrix = MatrixX<Scalar>;
  Matrix out(x.rows(), weight.cols());
  out.noalias() = x.value() * weight.value();
  out.rowwise() += bias.value().row(0);
  const Index ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.tape().record("affine", std::move(out), {x, weight, bias},
                         [ix, iw, ib](Tape<Scalar>& t, const Matrix& g) {
                           if (t.needs_grad(ix)) t.accumulate(ix, g * t.value(iw).transpose());
                           if (t.needs_grad(iw)) t.accumulate(iw, t.value(ix).transpose() * g);
                           if (t.needs_grad(ib)) t.accumulate(ib, g.colwise().sum());
                         });
}

template <typename Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape("add", a, b);
  using Matrix = MatrixX<Scalar>;
  const Index ia = a.id(), ib = b.id();
  return a.tape().record("add", a.value() + b.value(), {a, b}, [ia, ib](Tape<Scalar>& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

template <typename Scalar>
Var<Scalar> sub(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape("sub", a, b);
  using Matrix = MatrixX<Scalar>;
  const Index ia = a.id(), ib = b.id();
  return a.tape().record("sub", a.value() - b.value(), {a, b}, [ia, ib](Tape<Scalar>& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, -g);
  });
}

/// Elementwise product.
template <typename Scalar>
Var<Scalar> mul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape("mul", a, b);
  using Matrix = MatrixX<Scalar>;
  const Index ia = a.id(), ib = b.id();
  Matrix out = a.value().cwiseProduct(b.value());
  return a.tape().record("mul", std::move(out), {a, b}, [ia, ib](Tape<Scalar>& t, const Matrix& g) {
    if (t.needs_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    if (t.needs_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  using Matrix = MatrixX<Scalar>;
  const Index ia = a.id();
  return a.tape().record("scale", a.value() * s, {a}, [ia, s](Tape<Scalar>& t, const Matrix& g) {
    t.accumulate(ia, g * s);
  });
}

/// Adds a 1 x n row to every row of a.
template <typename Scalar>
Var<Scalar> add_row(const Var<Scalar>& a, const Var<Scalar>& row) {
  detail::require_row("add_row", row, a.cols());
  using Matrix = MatrixX<Scalar>;
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  const Index ia = a.id(), ir = row.id();
  return a.tape().record("add_row", std::move(out), {a, row}, [ia, ir](Tape<Scalar>& t, const Matrix& g) {
    t.accumulate(ia, g);
    if (t.needs_grad(ir)) t.accumulate(ir, g.colwise().sum());
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& a) {
  using Matrix = MatrixX<Scalar>;
  const Index ia = a.id();
  Matrix out = a.value().cwiseMax(Scalar(0));
  return a.tape().record("relu", std::move(out), {a}, [ia](Tape<Scalar>& t, const Matrix& g) {
    t.accumulate(ia, (t.value(ia).array() > Scalar(0)).select(g, Scalar(0)));
  });
}

/// Exact (erf) GELU.
template <typename Scalar>
Var<Scalar> gelu(const Var<Scalar>& a) {
  using Matrix = MatrixX<Scalar>;
  constexpr Scalar inv_sqrt2 = Scalar(1) / std::numbers::sqrt2_v<Scalar>;
  constexpr Scalar inv_sqrt2pi = std::numbers::inv_sqrtpi_v<Scalar> * inv_sqrt2;
  const Index ia = a.id();
  Matrix out = a.value().unaryExpr([](Scalar x) { return Scalar(0.5) * x * (Scalar(1) + std::erf(x * inv_sqrt2)); });
  return a.tape().record("gelu", std::move(out), {a}, [ia](Tape<Scalar>& t, const Matrix& g) {
    Matrix d = t.value(ia).unaryExpr([](Scalar x) {
      return Scalar(0.5) * (Scalar(1) + std::erf(x * inv_sqrt2)) + x * inv_sqrt2pi * std::exp(Scalar(-0.5) * x * x);
    });
    t.accumulate(ia, g.cwiseProduct(d));
  });
}

template <typename Scalar>
MatrixX<Scalar> softmax_rows_value(const MatrixX<Scalar>& a) {
  MatrixX<Scalar> out(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    const Scalar m = a.row(i).maxCoeff();
    out.row(i) = (a.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

/// Row-wise softmax with per-row max subtraction.
template <typename Scalar>
Var<Scalar> softmax_rows(const Var<Scalar>& a) {
  using Matrix = MatrixX<Scalar>;
  const Index ia = a.id();
  Matrix out = softmax_rows_value(a.value());
  Matrix y = a.needs_grad() ? out : Matrix();
  return a.tape().record("softmax_rows", std::move(out), {a}, [ia, y = std::move(y)](Tape<Scalar>& t, const Matrix& g) {
    Matrix dot = g.cwiseProduct(y).rowwise().sum();
    t.accumulate(ia, y.cwiseProduct(g - dot.replicate(1, g.cols())));
  });
}

template <typename Scalar>
Var<Scalar> log_softmax_rows(const Var<Scalar>& a) {
  using Matrix = MatrixX<Scalar>;
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const Scalar m = x.row(i).maxCoeff();
    const Scalar lse = m + std::log((x.row(i).array() - m).exp().sum());
    out.row(i) = x.row(i).array() - lse;
  }
  const Index ia = a.id();
  Matrix probs = out.array().exp();
  return a.tape().record("log_softmax_rows", std::move(out), {a},
                         [ia, probs = std::move(probs)](Tape<Scalar>& t, const Matrix& g) {
                           Matrix total = g.rowwise().sum();
                           t.accumulate(ia, g - probs.cwiseProduct(total.replicate(1, g.cols())));
                         });
}

/// Per-row normalisation to zero mean and unit variance, then gain and bias.
template <typename Scalar>
Var<Scalar> layernorm(const Var<Scalar>& a, const Var<Scalar>& gain, const Var<Scalar>& bias,
                      Scalar eps = Scalar(1e-5)) {
  detail::require_row("layernorm", gain, a.cols());
  detail::require_row("layernorm", bias, a.cols());
  using Matrix = MatrixX<Scalar>;
  const Matrix& x = a.value();
  const Index n = x.cols();
  Matrix xhat(x.rows(), n);
  Matrix inv_std(x.rows(), 1);
  for (Index i = 0; i < x.rows(); ++i) {
    const Scalar mean = x.row(i).mean();
    const Scalar var = (x.row(i).array() - mean).square().mean();
    inv_std(i, 0) = Scalar(1) / std::sqrt(var + eps);
    xhat.row(i) = (x.row(i).array() - mean) * inv_std(i, 0);
  }
  Matrix out = xhat.array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  const Index ia = a.id(), ig = gain.id(), ib = bias.id();
  return a.tape().record(
      "layernorm", std::move(out), {a, gain, bias},
      [ia, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<Scalar>& t, const Matrix& g) {
        if (t.needs_grad(ig)) t.accumulate(ig, g.cwiseProduct(xhat).colwise().sum());
        if (t.needs_grad(ib)) t.accumulate(ib, g.colwise().sum());
        if (!t.needs_grad(ia)) return;
        Matrix dxhat = g.array().rowwise() * t.value(ig).row(0).array();
        Matrix dx(dxhat.rows(), dxhat.cols());
        for (Index i = 0; i < dxhat.rows(); ++i) {
          const Scalar m1 = dxhat.row(i).mean();
          const Scalar m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
          dx.row(i) = (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2) * inv_std(i, 0);
        }
        t.accumulate(ia, dx);
      });
}

template <typename Scalar>
Var<Scalar> concat_rows(std::span<const Var<Scalar>> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  using Matrix = MatrixX<Scalar>;
  const Index cols = parts[0].cols();
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw DimensionError("concat_rows: column mismatch " + std::to_string(p.cols()) + " vs " + std::to_string(cols));
    }
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<Index, Index>> spans;  // (id, first row)
  Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    spans.emplace_back(p.id(), r);
    r += p.rows();
  }
  return parts[0].tape().record("concat_rows", std::move(out), parts, [spans = std::move(spans)](Tape<Scalar>& t, const Matrix& g) {
    for (const auto& [id, first] : spans) {
      if (t.needs_grad(id)) t.accumulate(id, g.middleRows(first, t.value(id).rows()));
    }
  });
}

template <typename Scalar>
Var<Scalar> slice_rows(const Var<Scalar>& a, Index first, Index count) {
  if (first < 0 || count < 0 || first + count > a.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(first) + ", +" + std::to_string(count) + ") out of " +
                         std::to_string(a.rows()) + " rows");
  }
  using Matrix = MatrixX<Scalar>;
  const Index ia = a.id();
  return a.tape().record("slice_rows", Matrix(a.value().middleRows(first, count)), {a},
                         [ia, first, count](Tape<Scalar>& t, const Matrix& g) {
                           t.grad_buffer(ia).middleRows(first, count) += g;
                         });
}

/// Appends zero rows up to `rows` total.
template <typename Scalar>
Var<Scalar> pad_rows(const Var<Scalar>& a, Index rows) {
  if (rows < a.rows()) throw DimensionError("pad_rows: target smaller than input");
  if (rows == a.rows()) return a;
  using Matrix = MatrixX<Scalar>;
  Matrix out = Matrix::Zero(rows, a.cols());
  out.topRows(a.rows()) = a.value();
  const Index ia = a.id(), keep = a.rows();
  return a.tape().record("pad_rows", std::move(out), {a}, [ia, keep](Tape<Scalar>& t, const Matrix& g) {
    t.accumulate(ia, g.topRows(keep));
  });
}

/// Row-major reshape; element order is unchanged.
template <typename Scalar>
Var<Scalar> reshape(const Var<Scalar>& a, Index rows, Index cols) {
  if (rows * cols != a.value().size()) {
    throw DimensionError("reshape: cannot view " + shape_string(a.rows(), a.cols()) + " as " + shape_string(rows, cols));
  }
  using Matrix = MatrixX<Scalar>;
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  const Index ia = a.id(), r0 = a.rows(), c0 = a.cols();
  return a.tape().record("reshape", std::move(out), {a}, [ia, r0, c0](Tape<Scalar>& t, const Matrix& g) {
    t.accumulate(ia, Eigen::Map<const Matrix>(g.data(), r0, c0));
  });
}

/// Rows table[ids[0]], table[ids[1]], ... (embedding lookup).
template <typename Scalar>
Var<Scalar> gather_rows(const Var<Scalar>& table, std::span<const int> ids) {
  using Matrix = MatrixX<Scalar>;
  Matrix out(static_cast<Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) {
      throw DimensionError("gather_rows: id " + std::to_string(ids[i]) + " out of " + std::to_string(table.rows()));
    }
    out.row(static_cast<Index>(i)) = table.value().row(ids[i]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  const Index it = table.id();
  return table.tape().record("gather_rows", std::move(out), {table}, [it, idx = std::move(idx)](Tape<Scalar>& t, const Matrix& g) {
    Matrix& dst = t.grad_buffer(it);
    for (std::size_t i = 0; i < idx.size(); ++i) dst.row(idx[i]) += g.row(static_cast<Index>(i));
  });
}

/// 1-d convolution over rows (time) with channels in columns.
///
/// `weight` is the matrix view of a [out, in, kernel] tensor, i.e. row
/// o * in + c holds the kernel taps of output channel o and input channel c.
/// No implicit padding: output length is (n - kernel) / stride + 1.
template <typename Scalar>
Var<Scalar> conv1d(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias, Index in_channels,
                   Index kernel, Index stride) {
  if (x.cols() != in_channels) {
    throw DimensionError("conv1d: input has " + std::to_string(x.cols()) + " channels, kernel expects " +
                         std::to_string(in_channels));
  }
  if (weight.cols() != kernel || weight.rows() % in_channels != 0) {
    throw DimensionError("conv1d: weight " + shape_string(weight.rows(), weight.cols()) + " is not [out*" +
                         std::to_string(in_channels) + " x " + std::to_string(kernel) + "]");
  }
  if (stride < 1 || kernel < 1 || x.rows() < kernel) throw DimensionError("conv1d: input shorter than kernel");
  const Index out_channels = weight.rows() / in_channels;
  detail::require_row("conv1d", bias, out_channels);
  using Matrix = MatrixX<Scalar>;
  const Index steps = (x.rows() - kernel) / stride + 1;
  const Matrix& xv = x.value();
  const Matrix& w = weight.value();
  Matrix out(steps, out_channels);
  for (Index step = 0; step < steps; ++step) {
    for (Index o = 0; o < out_channels; ++o) {
      Scalar acc = bias.value()(0, o);
      for (Index c = 0; c < in_channels; ++c) {
        for (Index j = 0; j < kernel; ++j) acc += xv(step * stride + j, c) * w(o * in_channels + c, j);
      }
      out(step, o) = acc;
    }
  }
  const Index ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.tape().record(
      "conv1d", std::move(out), {x, weight, bias},
      [ix, iw, ib, in_channels, out_channels, kernel, stride, steps](Tape<Scalar>& t, const Matrix& g) {
        if (t.needs_grad(ib)) t.accumulate(ib, g.colwise().sum());
        const bool gx = t.needs_grad(ix), gw = t.needs_grad(iw);
        if (!gx && !gw) return;
        const Matrix& xv = t.value(ix);
        const Matrix& w = t.value(iw);
        Matrix dx = gx ? Matrix::Zero(xv.rows(), xv.cols()) : Matrix();
        Matrix dw = gw ? Matrix::Zero(w.rows(), w.cols()) : Matrix();
        for (Index step = 0; step < steps; ++step) {
          for (Index o = 0; o < out_channels; ++o) {
            const Scalar go = g(step, o);
            for (Index c = 0; c < in_channels; ++c) {
              for (Index j = 0; j < kernel; ++j) {
                if (gx) dx(step * stride + j, c) += go * w(o * in_channels + c, j);
                if (gw) dw(o * in_channels + c, j) += go * xv(step * stride + j, c);
              }
            }
          }
        }
        if (gx) t.accumulate(ix, dx);
        if (gw) t.accumulate(iw, dw);
      });
}

template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  using Matrix = MatrixX<Scalar>;
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const Index ia = a.id(), r = a.rows(), c = a.cols();
  return a.tape().record("sum", std::move(out), {a}, [ia, r, c](Tape<Scalar>& t, const Matrix& g) {
    t.accumulate(ia, Matrix::Constant(r, c, g(0, 0)));
  });
}

/// sum(a .* weights) for a fixed weight matrix.
template <typename Scalar>
Var<Scalar> weighted_sum(const Var<Scalar>& a, const MatrixX<Scalar>& weights) {
  if (weights.rows() != a.rows() || weights.cols() != a.cols()) {
    throw DimensionError("weighted_sum: weights " + shape_string(weights.rows(), weights.cols()) + " vs value " +
                         shape_string(a.rows(), a.cols()));
  }
  using Matrix = MatrixX<Scalar>;
  Matrix out(1, 1);
  out(0, 0) = a.value().cwiseProduct(weights).sum();
  const Index ia = a.id();
  return a.tape().record("weighted_sum", std::move(out), {a}, [ia, weights](Tape<Scalar>& t, const Matrix& g) {
    t.accumulate(ia, weights * g(0, 0));
  });
}

/// Mean token cross-entropy over rows with weight > 0.
///
/// `weights` (one per row, usually 0/1) excludes padding; rows with zero
/// weight contribute neither loss nor gradient.
template <typename Scalar>
Var<Scalar> cross_entropy(const Var<Scalar>& logits, std::span<const int> targets, std::span<const Scalar> weights = {}) {
  using Matrix = MatrixX<Scalar>;
  if (static_cast<Index>(targets.size()) != logits.rows()) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(logits.rows()) + " rows");
  }
  if (!weights.empty() && weights.size() != targets.size()) throw DimensionError("cross_entropy: weight count");
  const Matrix& x = logits.value();
  Matrix probs = softmax_rows_value(x);
  Scalar total_weight = 0, loss = 0;
  std::vector<Scalar> w(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    w[i] = weights.empty() ? Scalar(1) : weights[i];
    if (w[i] == Scalar(0)) continue;
    const int y = targets[i];
    if (y < 0 || y >= x.cols()) throw DimensionError("cross_entropy: target out of range");
    const Index r = static_cast<Index>(i);
    const Scalar m = x.row(r).maxCoeff();
    const Scalar lse = m + std::log((x.row(r).array() - m).exp().sum());
    loss += w[i] * (lse - x(r, y));
    total_weight += w[i];
  }
  if (total_weight <= Scalar(0)) throw DimensionError("cross_entropy: no positions carry weight");
  Matrix out(1, 1);
  out(0, 0) = loss / total_weight;
  std::vector<int> ys(targets.begin(), targets.end());
  const Index il = logits.id();
  return logits.tape().record(
      "cross_entropy", std::move(out), {logits},
      [il, probs = std::move(probs), ys = std::move(ys), w = std::move(w), total_weight](Tape<Scalar>& t,
                                                                                        const Matrix& g) {
        Matrix d = probs;
        for (std::size_t i = 0; i < ys.size(); ++i) {
          const Index r = static_cast<Index>(i);
          if (w[i] == Scalar(0)) {
            d.row(r).setZero();
            continue;
          }
          d(r, ys[i]) -= Scalar(1);
          d.row(r) *= w[i] / total_weight;
        }
        t.accumulate(il, d * g(0, 0));
      });
}

}  // namespace bridgekit
