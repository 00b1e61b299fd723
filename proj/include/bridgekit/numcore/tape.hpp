// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "bridgekit/numcore/tensor.hpp"

#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bridgekit {

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
class Tape;

/// Handle to a value recorded on a Tape.
template <typename Scalar>
class Var {
 public:
  using Matrix = MatrixX<Scalar>;

  Var() = default;
  Var(Tape<Scalar>* tape, Index id) : tape_(tape), id_(id) {}

  Tape<Scalar>& tape() const { return *tape_; }
  Index id() const { return id_; }
  const Matrix& value() const { return tape_->value(id_); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool needs_grad() const { return tape_->needs_grad(id_); }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<Scalar>* tape_ = nullptr;
  Index id_ = -1;
};

/// Records primitive operations in execution order and replays their
/// adjoints in exact reverse order.
///
/// One tape belongs to one thread. Parameters are referenced, not copied;
/// their gradients live on the tape until collected with parameter_grads()
/// or accumulate_into_parameters(), so several tapes can share one set of
/// parameters.
template <typename Scalar>
class Tape {
 public:
  using Matrix = MatrixX<Scalar>;
  using Backward = std::function<void(Tape&, const Matrix&)>;

  struct ParameterGrad {
    Tensor<Scalar>* tensor;
    Matrix grad;
  };

  Tape() {
#ifndef NDEBUG
    check_finite_ = true;
#endif
  }

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void set_check_finite(bool on) { check_finite_ = on; }
  bool check_finite() const { return check_finite_; }
  std::size_t size() const { return nodes_.size(); }

  Var<Scalar> constant(Matrix value) { return push("constant", std::move(value), nullptr, false, {}); }

  /// Leaf that receives a gradient.
  Var<Scalar> variable(Matrix value) { return push("variable", std::move(value), nullptr, true, {}); }

  /// Leaf that references a parameter; differentiable iff the tensor requires grad.
  Var<Scalar> parameter(Tensor<Scalar>& tensor) {
    const bool grad = tensor.requires_grad() && !tensor.frozen();
    Var<Scalar> v = push("parameter", Matrix(), &tensor.value(), grad, {});
    if (grad) parameters_.emplace_back(&tensor, v.id());
    return v;
  }

  /// Frozen parameters and other read-only matrices enter as constants without a copy.
  Var<Scalar> reference(const Matrix& value) { return push("constant", Matrix(), &value, false, {}); }

  Var<Scalar> record(std::string_view op, Matrix value, std::initializer_list<Var<Scalar>> parents,
                     Backward backward) {
    return record(op, std::move(value), std::span<const Var<Scalar>>(parents.begin(), parents.size()),
                  std::move(backward));
  }

  Var<Scalar> record(std::string_view op, Matrix value, std::span<const Var<Scalar>> parents, Backward backward) {
    bool grad = false;
    for (const auto& p : parents) {
      if (&p.tape() != this) throw std::logic_error(std::string(op) + ": operands from different tapes");
      grad = grad || needs_grad(p.id());
    }
    return push(op, std::move(value), nullptr, grad, grad ? std::move(backward) : Backward{});
  }

  const Matrix& value(Index id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.external ? *n.external : n.own;
  }
  bool needs_grad(Index id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  std::string_view op(Index id) const { return nodes_[static_cast<std::size_t>(id)].op; }

  const Matrix* grad(Index id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.has_grad ? &n.grad : nullptr;
  }
  const Matrix* grad(const Var<Scalar>& v) const { return grad(v.id()); }

  template <typename Derived>
  void accumulate(Index id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad) return;
    if (!n.has_grad) {
      n.grad = g;
      n.has_grad = true;
    } else {
      n.grad += g;
    }
  }

  /// Gradient buffer for in-place scatter; zero-initialised on first use.
  Matrix& grad_buffer(Index id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad) {
      const Matrix& v = value(id);
      n.grad = Matrix::Zero(v.rows(), v.cols());
      n.has_grad = true;
    }
    return n.grad;
  }

  /// Seeds the root with ones (a scalar root gets d root / d root = 1).
  void backward(const Var<Scalar>& root) {
    if (&root.tape() != this) throw std::logic_error("backward: root from another tape");
    if (!needs_grad(root.id())) return;
    const Matrix& v = value(root.id());
    accumulate(root.id(), Matrix::Ones(v.rows(), v.cols()));
    for (Index id = root.id(); id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.has_grad || !n.backward) continue;
      if (check_finite_ && !n.grad.allFinite()) {
        throw NonFiniteError("non-finite gradient flowing into " + std::string(n.op));
      }
      n.backward(*this, n.grad);
    }
  }

  std::vector<ParameterGrad> parameter_grads() const {
    std::vector<ParameterGrad> out;
    out.reserve(parameters_.size());
    for (const auto& [tensor, id] : parameters_) {
      const Matrix* g = grad(id);
      out.push_back({tensor, g ? *g : Matrix::Zero(tensor->rows(), tensor->cols())});
    }
    return out;
  }

  void accumulate_into_parameters() const {
    for (const auto& [tensor, id] : parameters_) {
      if (const Matrix* g = grad(id)) tensor->add_grad(*g);
    }
  }

 private:
  struct Node {
    std::string_view op;
    Matrix own;
    const Matrix* external = nullptr;
    bool needs_grad = false;
    bool has_grad = false;
    Matrix grad;
    Backward backward;
  };

  Var<Scalar> push(std::string_view op, Matrix value, const Matrix* external, bool grad, Backward backward) {
    if (check_finite_) {
      const Matrix& v = external ? *external : value;
      if (!v.allFinite()) throw NonFiniteError("non-finite value produced by " + std::string(op));
    }
    Node n;
    n.op = op;
    n.own = std::move(value);
    n.external = external;
    n.needs_grad = grad;
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var<Scalar>(this, static_cast<Index>(nodes_.size() - 1));
  }

  // deque keeps value references stable while the tape grows.
  std::deque<Node> nodes_;
  std::vector<std::pair<Tensor<Scalar>*, Index>> parameters_;
  bool check_finite_ = false;
};

}  // namespace bridgekit
