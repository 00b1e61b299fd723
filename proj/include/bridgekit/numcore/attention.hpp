// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "bridgekit/numcore/ops.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace bridgekit {

/// Which key positions a query position may see.
///
/// With causal = false every key is visible. With causal = true, query i
/// sees key j iff j < prefix or j <= i, so the first `prefix` rows form a
/// bidirectional block visible to everyone while the rest is causal.
struct AttentionMask {
  bool causal = false;
  Index prefix = 0;

  bool allowed(Index i, Index j) const { return !causal || j < prefix || j <= i; }
};

/// Scaled dot-product attention split over heads, without projections.
///
/// query is a x d, key is b x d, value is b x dv; d and dv must both be
/// divisible by `heads`. Head h uses columns [h*d/heads, (h+1)*d/heads) of
/// query/key and the matching slice of value; outputs are concatenated back
/// in head order. Scale is 1/sqrt(d/heads).
template <typename Scalar>
Var<Scalar> scaled_dot_attention(const Var<Scalar>& query, const Var<Scalar>& key, const Var<Scalar>& value,
                                 Index heads, AttentionMask mask = {}) {
  using Matrix = MatrixX<Scalar>;
  if (heads < 1 || query.cols() % heads != 0 || value.cols() % heads != 0) {
    throw ConfigError("attention: " + std::to_string(heads) + " heads do not divide model width " +
                      std::to_string(query.cols()) + "/" + std::to_string(value.cols()));
  }
  if (query.cols() != key.cols()) {
    throw DimensionError("attention: query width " + std::to_string(query.cols()) + " vs key width " +
                         std::to_string(key.cols()));
  }
  if (key.rows() != value.rows() || key.rows() < 1) {
    throw DimensionError("attention: key/value row counts " + std::to_string(key.rows()) + "/" +
                         std::to_string(value.rows()));
  }
  if (mask.causal && query.rows() != key.rows()) throw DimensionError("attention: causal mask needs a == b");

  const Index a = query.rows(), b = key.rows();
  const Index dh = query.cols() / heads, dvh = value.cols() / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  const Matrix& q = query.value();
  const Matrix& k = key.value();
  const Matrix& v = value.value();

  Matrix out(a, value.cols());
  std::vector<Matrix> probs(static_cast<std::size_t>(heads));
  for (Index h = 0; h < heads; ++h) {
    Matrix scores(a, b);
    scores.noalias() = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose();
    scores *= scale;
    if (mask.causal) {
      for (Index i = 0; i < a; ++i) {
        for (Index j = 0; j < b; ++j) {
          if (!mask.allowed(i, j)) scores(i, j) = -std::numeric_limits<Scalar>::infinity();
        }
      }
    }
    Matrix p = softmax_rows_value(scores);
    out.middleCols(h * dvh, dvh).noalias() = p * v.middleCols(h * dvh, dvh);
    probs[static_cast<std::size_t>(h)] = std::move(p);
  }

  const Index iq = query.id(), ik = key.id(), iv = value.id();
  return query.tape().record(
      "attention", std::move(out), {query, key, value},
      [iq, ik, iv, heads, dh, dvh, scale, probs = std::move(probs)](Tape<Scalar>& t, const Matrix& g) {
        const Matrix& q = t.value(iq);
        const Matrix& k = t.value(ik);
        const Matrix& v = t.value(iv);
        const bool gq = t.needs_grad(iq), gk = t.needs_grad(ik), gv = t.needs_grad(iv);
        Matrix dq = gq ? Matrix::Zero(q.rows(), q.cols()) : Matrix();
        Matrix dk = gk ? Matrix::Zero(k.rows(), k.cols()) : Matrix();
        Matrix dv = gv ? Matrix::Zero(v.rows(), v.cols()) : Matrix();
        for (Index h = 0; h < heads; ++h) {
          const Matrix& p = probs[static_cast<std::size_t>(h)];
          const auto go = g.middleCols(h * dvh, dvh);
          if (gv) dv.middleCols(h * dvh, dvh).noalias() += p.transpose() * go;
          if (!gq && !gk) continue;
          Matrix dp(p.rows(), p.cols());
          dp.noalias() = go * v.middleCols(h * dvh, dvh).transpose();
          Matrix rowdot = dp.cwiseProduct(p).rowwise().sum();
          Matrix ds = p.cwiseProduct(dp - rowdot.replicate(1, dp.cols())) * scale;
          if (gq) dq.middleCols(h * dh, dh).noalias() += ds * k.middleCols(h * dh, dh);
          if (gk) dk.middleCols(h * dh, dh).noalias() += ds.transpose() * q.middleCols(h * dh, dh);
        }
        if (gq) t.accumulate(iq, dq);
        if (gk) t.accumulate(ik, dk);
        if (gv) t.accumulate(iv, dv);
      });
}

}  // namespace bridgekit
