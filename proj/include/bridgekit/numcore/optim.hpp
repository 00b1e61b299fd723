// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "bridgekit/numcore/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

namespace bridgekit {

/// Trainable tensors in visit order. The order fixes the reduction order
/// of per-sample gradients and the layout of optimizer state.
template <typename Scalar>
class ParameterList {
 public:
  void add(const std::string& name, Tensor<Scalar>& t) {
    if (!t.requires_grad()) return;
    index_.emplace(&t, tensors_.size());
    names_.push_back(name);
    tensors_.push_back(&t);
  }

  template <typename Module>
  static ParameterList from(Module& module) {
    ParameterList list;
    module.visit([&](const std::string& name, Tensor<Scalar>& t) { list.add(name, t); });
    return list;
  }

  std::size_t size() const { return tensors_.size(); }
  Tensor<Scalar>& operator[](std::size_t i) const { return *tensors_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }

  /// Position of `t` in the list, or -1.
  long find(const Tensor<Scalar>* t) const {
    auto it = index_.find(t);
    return it == index_.end() ? -1 : static_cast<long>(it->second);
  }

  std::vector<MatrixX<Scalar>> zeros() const {
    std::vector<MatrixX<Scalar>> out;
    out.reserve(tensors_.size());
    for (auto* t : tensors_) out.push_back(MatrixX<Scalar>::Zero(t->rows(), t->cols()));
    return out;
  }

  /// Adds this tape's parameter gradients into `dst` (aligned with the list).
  void gather(const Tape<Scalar>& tape, std::vector<MatrixX<Scalar>>& dst, Scalar weight = Scalar(1)) const {
    for (const auto& pg : tape.parameter_grads()) {
      const long i = find(pg.tensor);
      if (i >= 0) dst[static_cast<std::size_t>(i)] += weight * pg.grad;
    }
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<Scalar>*> tensors_;
  std::unordered_map<const Tensor<Scalar>*, std::size_t> index_;
};

struct AdamConfig {
  double learning_rate = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long warmup_steps = 200;
};

/// Adam with linear warmup over the first warmup_steps updates, then constant.
template <typename Scalar>
class Adam {
 public:
  Adam(ParameterList<Scalar> params, AdamConfig config) : params_(std::move(params)), config_(config) {
    m_ = params_.zeros();
    v_ = params_.zeros();
  }

  const ParameterList<Scalar>& parameters() const { return params_; }
  long steps() const { return step_; }

  double learning_rate() const {
    if (config_.warmup_steps <= 0) return config_.learning_rate;
    return config_.learning_rate * std::min(1.0, static_cast<double>(step_ + 1) / static_cast<double>(config_.warmup_steps));
  }

  void step(const std::vector<MatrixX<Scalar>>& grads) {
    const double lr = learning_rate();
    ++step_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    const Scalar b1 = static_cast<Scalar>(config_.beta1), b2 = static_cast<Scalar>(config_.beta2);
    const Scalar step_size = static_cast<Scalar>(lr / c1);
    const Scalar inv_c2 = static_cast<Scalar>(1.0 / c2);
    const Scalar eps = static_cast<Scalar>(config_.eps);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const auto& g = grads[i].array();
      m_[i].array() = b1 * m_[i].array() + (Scalar(1) - b1) * g;
      v_[i].array() = b2 * v_[i].array() + (Scalar(1) - b2) * g.square();
      if (lr == 0.0) continue;
      params_[i].value().array() -= step_size * m_[i].array() / ((v_[i].array() * inv_c2).sqrt() + eps);
    }
  }

 private:
  ParameterList<Scalar> params_;
  AdamConfig config_;
  std::vector<MatrixX<Scalar>> m_;
  std::vector<MatrixX<Scalar>> v_;
  long step_ = 0;
};

}  // namespace bridgekit
