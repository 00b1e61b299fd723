// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "bridgekit/numcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace bridgekit {

struct GradcheckBlock {
  std::string name;
  double max_rel_error = 0.0;
  Index elements = 0;
};

struct GradcheckReport {
  std::vector<GradcheckBlock> blocks;

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& b : blocks) m = std::max(m, b.max_rel_error);
    return m;
  }
  bool passed(double tolerance) const { return max_rel_error() <= tolerance; }
};

struct NamedTensor {
  std::string name;
  Tensor<double>* tensor;
};

/// Builds the function under test on a fresh tape.
///
/// The returned value need not be scalar: a non-scalar output is contracted
/// with a fixed pseudo-random probe so that gradients are not degenerate
/// (a plain sum of softmax rows, for example, is constant).
using GradcheckFunction = std::function<Var<double>(Tape<double>&)>;

inline MatrixX<double> gradcheck_probe(Index rows, Index cols) {
  MatrixX<double> w(rows, cols);
  std::uint64_t state = 0x9E3779B97F4A7C15ull;
  for (Index i = 0; i < w.size(); ++i) {
    state ^= state >> 12;
    state ^= state << 25;
    state ^= state >> 27;
    const std::uint64_t r = state * 0x2545F4914F6CDD1Dull;
    w.data()[i] = static_cast<double>(r >> 11) / static_cast<double>(1ull << 53) * 2.0 - 1.0;
  }
  return w;
}

namespace detail {

inline Var<double> scalarize(const Var<double>& out) {
  if (out.rows() == 1 && out.cols() == 1) return out;
  return weighted_sum(out, gradcheck_probe(out.rows(), out.cols()));
}

}  // namespace detail

/// Compares tape gradients with central differences (f(x+eps) - f(x-eps)) / (2 eps).
///
/// Per element the error is |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|);
/// each block reports its maximum. Every tape runs with non-finite checks
/// on, so a NaN or Inf raises NonFiniteError naming the producing op.
inline GradcheckReport gradcheck(const GradcheckFunction& f, const std::vector<NamedTensor>& inputs,
                                 double eps = 1e-5) {
  std::vector<MatrixX<double>> analytic;
  {
    Tape<double> tape;
    tape.set_check_finite(true);
    for (const auto& in : inputs) {
      if (in.tensor->requires_grad()) in.tensor->zero_grad();
    }
    Var<double> out = detail::scalarize(f(tape));
    tape.backward(out);
    tape.accumulate_into_parameters();
    for (const auto& in : inputs) {
      const auto& g = in.tensor->grad();
      analytic.push_back(g ? *g : MatrixX<double>::Zero(in.tensor->rows(), in.tensor->cols()));
    }
  }

  auto evaluate = [&f]() {
    Tape<double> tape;
    tape.set_check_finite(true);
    return detail::scalarize(f(tape)).value()(0, 0);
  };

  GradcheckReport report;
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    GradcheckBlock block{inputs[b].name, 0.0, inputs[b].tensor->size()};
    MatrixX<double>& x = inputs[b].tensor->value();
    for (Index i = 0; i < x.size(); ++i) {
      const double saved = x.data()[i];
      x.data()[i] = saved + eps;
      const double plus = evaluate();
      x.data()[i] = saved - eps;
      const double minus = evaluate();
      x.data()[i] = saved;
      const double fd = (plus - minus) / (2.0 * eps);
      const double ad = analytic[b].data()[i];
      const double err = std::abs(ad - fd) / std::max(1e-8, std::abs(ad) + std::abs(fd));
      block.max_rel_error = std::max(block.max_rel_error, err);
    }
    report.blocks.push_back(block);
  }
  return report;
}

}  // namespace bridgekit
