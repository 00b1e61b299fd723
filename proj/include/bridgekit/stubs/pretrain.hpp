// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "bridgekit/numcore/optim.hpp"
#include "bridgekit/numcore/parallel.hpp"
#include "bridgekit/stubs/toy_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace bridgekit {

/// Prompted prefix-LM pretraining of the toy decoder.
///
/// Every other step the documents carry a soft prompt made of their own
/// symbols: row j is E[x_j] + sinusoid(j) + marker + noise. The prompt also
/// holds "silent" rows (position code and marker only), N(0, 1) distractor
/// rows and zero rows, shuffled together. The remaining steps are plain
/// next-token training without a prefix.
struct LmPretrainConfig {
  long steps = 1200;
  long batch_size = 16;
  AdamConfig adam{3e-3, 0.9, 0.999, 1e-8, 0};
  double prompt_noise = 0.3;
  int max_silent = 20;
  int max_distractors = 4;
  int max_zero_rows = 24;
  std::uint64_t seed = 7;
  long log_every = 100;
};

struct LmPretrainLog {
  long step = 0;
  bool prompted = false;
  double loss = 0.0;
};

namespace detail {

struct PromptPlan {
  std::vector<int> doc;
  int silent = 0;
  MatrixX<double> distractors;
  int zero_rows = 0;
  MatrixX<double> noise;  // (doc + silent) x d_t
  std::vector<int> order;
};

inline PromptPlan plan_prompt(const std::vector<int>& doc, Index d_t, const LmPretrainConfig& c, Rng& rng) {
  PromptPlan plan;
  plan.doc = doc;
  plan.silent = std::uniform_int_distribution<int>(0, c.max_silent)(rng);
  const int nd = std::uniform_int_distribution<int>(0, c.max_distractors)(rng);
  plan.distractors = gaussian<double>(nd, d_t, 1.0, rng);
  plan.zero_rows = std::uniform_int_distribution<int>(0, c.max_zero_rows)(rng);
  plan.noise = gaussian<double>(static_cast<Index>(doc.size()) + plan.silent, d_t, c.prompt_noise, rng);
  const int total = static_cast<int>(doc.size()) + plan.silent + nd + plan.zero_rows;
  plan.order.resize(static_cast<std::size_t>(total));
  std::iota(plan.order.begin(), plan.order.end(), 0);
  std::shuffle(plan.order.begin(), plan.order.end(), rng);
  return plan;
}

template <typename Scalar>
Var<Scalar> build_prompt(Tape<Scalar>& tape, ToyDecoder<Scalar>& dec, const PromptPlan& plan) {
  const Index d = dec.config().d_t;
  const Index n = static_cast<Index>(plan.doc.size());
  auto marker = tape.parameter(dec.prompt_marker());
  MatrixX<Scalar> codes = sinusoid_table<Scalar>(n + plan.silent, d, 1) + plan.noise.template cast<Scalar>();
  auto content = add(gather_rows(tape.parameter(dec.embedding()), plan.doc), tape.constant(codes.topRows(n)));
  std::vector<Var<Scalar>> parts{add_row(content, marker)};
  if (plan.silent > 0) parts.push_back(add_row(tape.constant(codes.bottomRows(plan.silent)), marker));
  if (plan.distractors.rows() > 0) parts.push_back(tape.constant(plan.distractors.template cast<Scalar>()));
  if (plan.zero_rows > 0) parts.push_back(tape.constant(MatrixX<Scalar>::Zero(plan.zero_rows, d)));
  return gather_rows(concat_rows<Scalar>(parts), plan.order);
}

}  // namespace detail

/// Mean next-token cross-entropy (nats per target) over `corpus` without a prefix.
template <typename Scalar>
double lm_cross_entropy(ToyDecoder<Scalar>& dec, const std::vector<std::vector<int>>& corpus) {
  if (corpus.empty()) throw ConfigError("lm_cross_entropy: empty corpus");
  std::vector<double> loss(corpus.size());
  std::vector<double> count(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) {
    Tape<Scalar> tape;
    loss[i] = static_cast<double>(dec.teacher_forced_loss(tape, Var<Scalar>(), corpus[i]).value()(0, 0));
    count[i] = static_cast<double>(corpus[i].size() + 1);
  });
  double total = 0.0, n = 0.0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    total += loss[i] * count[i];
    n += count[i];
  }
  return total / n;
}

/// Trains `dec` in place on `corpus`, then freezes it.
template <typename Scalar>
void pretrain_toy_lm(ToyDecoder<Scalar>& dec, const std::vector<std::vector<int>>& corpus, const LmPretrainConfig& c,
                     const std::function<void(const LmPretrainLog&)>& log = {}) {
  if (corpus.empty()) throw ConfigError("pretrain_toy_lm: empty corpus");
  for (const auto& doc : corpus) {
    if (doc.empty()) throw ConfigError("pretrain_toy_lm: empty document in corpus");
  }
  Rng rng(c.seed);
  Adam<Scalar> opt(ParameterList<Scalar>::from(dec), c.adam);
  const auto& params = opt.parameters();
  const std::size_t bs = static_cast<std::size_t>(c.batch_size);
  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);

  for (long step = 0; step < c.steps; ++step) {
    const bool prompted = step % 2 == 0;
    std::vector<detail::PromptPlan> plans(bs);
    std::vector<const std::vector<int>*> docs(bs);
    for (std::size_t b = 0; b < bs; ++b) {
      docs[b] = &corpus[pick(rng)];
      if (prompted) plans[b] = detail::plan_prompt(*docs[b], dec.config().d_t, c, rng);
    }
    std::vector<std::vector<MatrixX<Scalar>>> grads(bs);
    std::vector<double> losses(bs), targets(bs);
    parallel_for(bs, [&](std::size_t b) {
      Tape<Scalar> tape;
      Var<Scalar> prefix = prompted ? detail::build_prompt(tape, dec, plans[b]) : Var<Scalar>();
      auto loss = dec.teacher_forced_loss(tape, prefix, *docs[b]);
      tape.backward(loss);
      grads[b] = params.zeros();
      params.gather(tape, grads[b]);
      losses[b] = static_cast<double>(loss.value()(0, 0));
      targets[b] = static_cast<double>(docs[b]->size() + 1);
    });
    const double total = std::accumulate(targets.begin(), targets.end(), 0.0);
    auto sum = params.zeros();
    double mean_loss = 0.0;
    for (std::size_t b = 0; b < bs; ++b) {
      const Scalar w = static_cast<Scalar>(targets[b] / total);
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += w * grads[b][i];
      mean_loss += losses[b] * targets[b] / total;
    }
    if (!std::isfinite(mean_loss)) {
      throw NonFiniteError("pretrain_toy_lm: loss diverged at step " + std::to_string(step));
    }
    opt.step(sum);
    if (log && (step % c.log_every == 0 || step + 1 == c.steps)) log({step, prompted, mean_loss});
  }
  dec.freeze();
}

}  // namespace bridgekit
