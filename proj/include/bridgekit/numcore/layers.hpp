// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "bridgekit/numcore/attention.hpp"
#include "bridgekit/numcore/ops.hpp"

#include <cmath>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

namespace bridgekit {

using Rng = std::mt19937_64;

/// U[-1/sqrt(fan_in), 1/sqrt(fan_in)]
template <typename Scalar>
MatrixX<Scalar> uniform_fan_in(Index rows, Index cols, Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  MatrixX<Scalar> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
  return m;
}

template <typename Scalar>
MatrixX<Scalar> gaussian(Index rows, Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  MatrixX<Scalar> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
  return m;
}

template <typename Scalar>
Tensor<Scalar> trainable(MatrixX<Scalar> m, bool row_vector = false) {
  const Index cols = m.cols();
  Tensor<Scalar> t = row_vector ? Tensor<Scalar>(Shape{cols}, std::move(m)) : Tensor<Scalar>(std::move(m));
  t.set_requires_grad(true);
  return t;
}

/// y = x W + b with W stored in x out layout; the bias is optional.
template <typename Scalar>
struct Linear {
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;
  bool has_bias = true;

  Linear() = default;
  Linear(Index in, Index out, Rng& rng, bool with_bias = true)
      : weight(trainable<Scalar>(uniform_fan_in<Scalar>(in, out, in, rng))),
        bias(trainable<Scalar>(MatrixX<Scalar>::Zero(1, out), true)),
        has_bias(with_bias) {
    if (!has_bias) bias.set_requires_grad(false);
  }

  Index in_features() const { return weight.rows(); }
  Index out_features() const { return weight.cols(); }

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) {
    if (!has_bias) return matmul(x, tape.parameter(weight));
    return affine(x, tape.parameter(weight), tape.parameter(bias));
  }

  /// Inference: weights enter the tape as constants.
  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const {
    if (!has_bias) return matmul(x, tape.reference(weight.value()));
    return affine(x, tape.reference(weight.value()), tape.reference(bias.value()));
  }

  template <typename Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    v(prefix + ".weight", weight);
    if (has_bias) v(prefix + ".bias", bias);
  }
};

template <typename Scalar>
struct LayerNorm {
  Tensor<Scalar> gain;
  Tensor<Scalar> bias;

  LayerNorm() = default;
  explicit LayerNorm(Index width)
      : gain(trainable<Scalar>(MatrixX<Scalar>::Ones(1, width), true)),
        bias(trainable<Scalar>(MatrixX<Scalar>::Zero(1, width), true)) {}

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) {
    return layernorm(x, tape.parameter(gain), tape.parameter(bias));
  }

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const {
    return layernorm(x, tape.reference(gain.value()), tape.reference(bias.value()));
  }

  template <typename Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    v(prefix + ".gain", gain);
    v(prefix + ".bias", bias);
  }
};

/// Position-wise GELU feed-forward.
template <typename Scalar>
struct FeedForward {
  Linear<Scalar> up;
  Linear<Scalar> down;

  FeedForward() = default;
  FeedForward(Index width, Index hidden, Rng& rng) : up(width, hidden, rng), down(hidden, width, rng) {}

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) { return down(tape, gelu(up(tape, x))); }
  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& x) const { return down(tape, gelu(up(tape, x))); }

  template <typename Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    up.visit(prefix + ".up", v);
    down.visit(prefix + ".down", v);
  }
};

/// Learned query/key/value/output projections around scaled_dot_attention.
///
/// Queries come in with width `query_width`, keys and values with
/// `kv_width`; everything is projected to `model_width` before the heads
/// split, and the output projection maps back to `model_width`. The key
/// projection has no bias: it would shift every score in a row equally.
template <typename Scalar>
struct MultiHeadAttention {
  Linear<Scalar> q;
  Linear<Scalar> k;
  Linear<Scalar> v;
  Linear<Scalar> o;
  Index heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(Index query_width, Index kv_width, Index model_width, Index n_heads, Rng& rng)
      : q(query_width, model_width, rng),
        k(kv_width, model_width, rng, false),
        v(kv_width, model_width, rng),
        o(model_width, model_width, rng),
        heads(n_heads) {
    if (n_heads < 1 || model_width % n_heads != 0) {
      throw ConfigError("attention: " + std::to_string(n_heads) + " heads do not divide model width " +
                        std::to_string(model_width));
    }
  }

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& query, const Var<Scalar>& key,
                         const Var<Scalar>& value, AttentionMask mask = {}) {
    return o(tape, scaled_dot_attention(q(tape, query), k(tape, key), v(tape, value), heads, mask));
  }

  Var<Scalar> operator()(Tape<Scalar>& tape, const Var<Scalar>& query, const Var<Scalar>& key,
                         const Var<Scalar>& value, AttentionMask mask = {}) const {
    return o(tape, scaled_dot_attention(q(tape, query), k(tape, key), v(tape, value), heads, mask));
  }

  template <typename Visitor>
  void visit(const std::string& prefix, Visitor&& vis) {
    q.visit(prefix + ".q", vis);
    k.visit(prefix + ".k", vis);
    v.visit(prefix + ".v", vis);
    o.visit(prefix + ".o", vis);
  }
};

/// Sinusoidal encoding of one position over `width` channels.
///
/// Channel 2k is sin(pos / 10000^(2k/width)) and channel 2k+1 the matching
/// cosine; an odd trailing channel keeps only its sine.
template <typename Scalar>
RowVectorX<Scalar> sinusoid(double position, Index width) {
  RowVectorX<Scalar> out(width);
  for (Index c = 0; c < width; c += 2) {
    const double freq = std::pow(10000.0, -static_cast<double>(c) / static_cast<double>(width));
    out(c) = static_cast<Scalar>(std::sin(position * freq));
    if (c + 1 < width) out(c + 1) = static_cast<Scalar>(std::cos(position * freq));
  }
  return out;
}

/// Copies parameter values between two modules of the same layout, casting
/// the scalar type. Both modules must visit tensors in the same order.
template <typename From, typename To>
void copy_parameters(From& src, To& dst) {
  std::vector<std::string> names;
  std::vector<MatrixX<double>> values;
  src.visit([&](const std::string& name, auto& t) {
    names.push_back(name);
    values.push_back(t.value().template cast<double>());
  });
  std::size_t i = 0;
  dst.visit([&](const std::string& name, auto& t) {
    using S = typename std::decay_t<decltype(t)>::Matrix::Scalar;
    if (i >= names.size() || names[i] != name) throw ConfigError("copy_parameters: layout mismatch at " + name);
    if (values[i].rows() != t.rows() || values[i].cols() != t.cols()) {
      throw DimensionError("copy_parameters: shape mismatch at " + name);
    }
    t.value() = values[i].template cast<S>();
    ++i;
  });
  if (i != names.size()) throw ConfigError("copy_parameters: tensor count mismatch");
}

template <typename Scalar>
MatrixX<Scalar> sinusoid_table(Index positions, Index width, Index first = 0) {
  MatrixX<Scalar> out(positions, width);
  for (Index p = 0; p < positions; ++p) out.row(p) = sinusoid<Scalar>(static_cast<double>(first + p), width);
  return out;
}

}  // namespace bridgekit
