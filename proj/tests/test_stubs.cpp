// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#include "bridgekit/stubs/pretrain.hpp"
#include "bridgekit/stubs/toy_task.hpp"

#include "doctest.h"

#include <cmath>

using namespace bridgekit;
using Mat = MatrixX<double>;

namespace {

ToyDecoderConfig tiny_decoder() {
  ToyDecoderConfig c;
  c.vocab = 8;
  c.d_t = 8;
  c.heads = 2;
  c.ffn = 16;
  c.max_context = 64;
  return c;
}

}  // namespace

TEST_CASE("symbol words round trip") {
  std::vector<int> s{0, 5, 25, 26, 30};
  CHECK(symbols_to_text(s) == "a f z s26 s30");
  CHECK(text_to_symbols("a f z s26 s30", 31) == s);
  CHECK_THROWS_AS(text_to_symbols("a q", 10), ConfigError);
  CHECK_THROWS_AS(text_to_symbols("s07", 10), ConfigError);
}

TEST_CASE("grammar rows are distributions and sampling is seeded") {
  Rng rng(1);
  SymbolGrammar g(24, 5, 0.85, rng);
  for (Index i = 0; i < 24; ++i) {
    CHECK(std::abs(g.transition().row(i).sum() - 1.0) < 1e-12);
    CHECK(g.transition().row(i).minCoeff() > 0.0);
  }
  Rng a(9), b(9);
  CHECK(g.sample(40, a) == g.sample(40, b));
  CHECK(g.sample(0, a).empty());
  // Sparse successors make the chain far more predictable than uniform.
  Rng c(3);
  double lp = 0.0;
  int n = 0;
  for (int i = 0; i < 200; ++i) {
    auto s = g.sample(50, c);
    lp += g.log_prob(s);
    n += 50;
  }
  CHECK(std::exp(-lp / n) < 12.0);
}

TEST_CASE("generate_utterance examples") {
  SyntheticTaskSpec spec;
  spec.noise_sigma = 0.0;
  spec.r = 1;
  spec.identity_mixing = true;
  SyntheticTask task(spec);
  Rng rng(2);
  auto u = generate_utterance(spec, task.grammar, task.encoder, rng, "u0");
  REQUIRE(u.frames.rows() == static_cast<Index>(u.symbols.size()));
  for (std::size_t i = 0; i < u.symbols.size(); ++i) {
    CHECK(u.frames.row(static_cast<Index>(i)) == task.encoder.symbols().value().row(u.symbols[i]));
  }
  CHECK(u.record.transcript == symbols_to_text(u.symbols));

  SyntheticTaskSpec fixed;
  fixed.min_len = fixed.max_len = 12;
  SyntheticTask t2(fixed);
  auto v = generate_utterance(fixed, t2.grammar, t2.encoder, rng, "u1");
  CHECK(v.frames.rows() == 120);
  CHECK(v.record.duration_seconds == doctest::Approx(12.0));

  SyntheticTask t3(fixed), t4(fixed);
  Rng r3(77), r4(77);
  auto w3 = generate_utterance(fixed, t3.grammar, t3.encoder, r3, "x");
  auto w4 = generate_utterance(fixed, t4.grammar, t4.encoder, r4, "x");
  CHECK(w3.symbols == w4.symbols);
  CHECK(w3.frames == w4.frames);
}

TEST_CASE("encoder pads to whole windows and adds the window code") {
  SyntheticTaskSpec spec;
  spec.window = 30;
  SyntheticTask task(spec);
  Rng rng(3);
  Mat frames = task.encoder.render({1, 2, 3, 4}, rng);
  Mat x = task.encoder.encode(frames);
  REQUIRE(x.rows() == 60);
  Mat code = sinusoid_table<double>(30, spec.d_x);
  CHECK((x.topRows(40) - frames - (Mat(60, spec.d_x) << code, code).finished().topRows(40)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((x.middleRows(40, 20) - code.bottomRows(20)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(task.encoder.encode(Mat(0, spec.d_x)).rows() == 30);

  spec.frame_position_code = false;
  SyntheticTask plain(spec);
  Mat y = plain.encoder.encode(plain.encoder.render({1}, rng));
  CHECK(y.bottomRows(20).cwiseAbs().maxCoeff() == 0.0);
  CHECK(task.encoder.symbols().frozen());
  CHECK(task.encoder.mixing().frozen());
  Mat mix = task.encoder.mixing().value();
  CHECK((mix * mix.transpose() - Mat::Identity(spec.d_x, spec.d_x)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("teacher forcing examples") {
  Rng rng(4);
  ToyDecoder<double> dec(tiny_decoder(), rng);
  std::vector<int> text{1, 2, 3};
  SUBCASE("uniform logits give ln V") {
    dec.head().weight.value().setZero();
    dec.head().bias.value().setZero();
    Tape<double> tape;
    TeacherForcedStats stats;
    auto loss = dec.teacher_forced_loss(tape, tape.constant(gaussian<double>(3, 8, 1.0, rng)), text, &stats);
    CHECK(loss.value()(0, 0) == doctest::Approx(std::log(8.0)).epsilon(1e-14));
    CHECK(stats.positions == 4);
  }
  SUBCASE("empty transcript and overlong inputs are rejected") {
    Tape<double> tape;
    CHECK_THROWS_AS(dec.teacher_forced_loss(tape, Var<double>(), std::vector<int>{}), LengthError);
    CHECK_THROWS_AS(dec.teacher_forced_loss(tape, tape.constant(Mat::Zero(61, 8)), text), LengthError);
  }
  SUBCASE("gradients reach the prefix but not a frozen decoder") {
    dec.freeze();
    Tape<double> tape;
    auto prefix = tape.variable(gaussian<double>(4, 8, 1.0, rng));
    auto loss = dec.teacher_forced_loss(tape, prefix, text);
    tape.backward(loss);
    REQUIRE(tape.grad(prefix) != nullptr);
    CHECK(tape.grad(prefix)->cwiseAbs().maxCoeff() > 0.0);
    CHECK(tape.parameter_grads().empty());
  }
}

TEST_CASE("prefix rows are bidirectional and unaffected by text") {
  Rng rng(5);
  ToyDecoder<double> dec(tiny_decoder(), rng);
  Mat prefix = gaussian<double>(5, 8, 1.0, rng);
  Tape<double> tape;
  Mat a = dec.logits(tape, tape.constant(prefix), std::vector<int>{6, 1, 2}).value();
  Mat b = dec.logits(tape, tape.constant(prefix), std::vector<int>{6, 1, 4}).value();
  // Changing the last text token leaves earlier text rows untouched.
  CHECK((a.topRows(2) - b.topRows(2)).cwiseAbs().maxCoeff() == 0.0);
  // Reordering prefix rows is invisible to the text: no positions on the prefix.
  Mat shuffled = prefix;
  shuffled.row(0).swap(shuffled.row(4));
  Mat c = dec.logits(tape, tape.constant(shuffled), std::vector<int>{6, 1, 2}).value();
  CHECK((a - c).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("greedy decoding examples") {
  Rng rng(6);
  ToyDecoder<double> dec(tiny_decoder(), rng);
  Mat prefix = gaussian<double>(4, 8, 1.0, rng);
  SUBCASE("cached decoding matches the full forward") {
    Mat steps;
    auto r = dec.greedy_decode(prefix, 12, &steps);
    std::vector<int> inputs{dec.bos()};
    inputs.insert(inputs.end(), r.tokens.begin(), r.tokens.end());
    Tape<double> tape;
    Mat full = dec.logits(tape, tape.constant(prefix), inputs).value();
    REQUIRE(steps.rows() == full.rows());
    CHECK((steps - full).cwiseAbs().maxCoeff() < 1e-10);
    for (std::size_t i = 0; i < r.tokens.size(); ++i) CHECK(ToyDecoder<double>::argmax(full.row(static_cast<Index>(i))) == r.tokens[i]);

    auto again = dec.greedy_decode(prefix, 12);
    CHECK(again.tokens == r.tokens);
    CHECK(again.truncated == r.truncated);

    Mat none;
    auto bare = dec.greedy_decode(Mat(0, 8), 5, &none);
    Tape<double> t2;
    std::vector<int> in2{dec.bos()};
    in2.insert(in2.end(), bare.tokens.begin(), bare.tokens.end());
    CHECK((none - dec.logits(t2, Var<double>(), in2).value()).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("EOS always wins") {
    dec.head().weight.value().setZero();
    dec.head().bias.value().setZero();
    dec.head().bias.value()(0, dec.eos()) = 1.0;
    auto r = dec.greedy_decode(prefix, 10);
    CHECK(r.tokens.empty());
    CHECK_FALSE(r.truncated);
  }
  SUBCASE("max_len = 0") {
    auto r = dec.greedy_decode(prefix, 0);
    CHECK(r.tokens.empty());
    CHECK(r.truncated);
  }
  SUBCASE("never-ending output is truncated") {
    dec.head().weight.value().setZero();
    dec.head().bias.value().setZero();
    auto r = dec.greedy_decode(prefix, 7);
    CHECK(r.tokens == std::vector<int>(7, 0));  // all-equal logits pick id 0
    CHECK(r.truncated);
  }
}

TEST_CASE("float copy of a decoder agrees with double") {
  Rng rng(7);
  ToyDecoder<double> dec(tiny_decoder(), rng);
  dec.freeze();
  ToyDecoder<float> f = dec.cast<float>();
  CHECK(f.frozen());
  Mat prefix = gaussian<double>(3, 8, 1.0, rng);
  Tape<double> td;
  Tape<float> tf;
  std::vector<int> in{6, 2, 3};
  Mat a = dec.logits(td, td.constant(prefix), in).value();
  MatrixX<float> b = f.logits(tf, tf.constant(prefix.cast<float>()), in).value();
  CHECK((a - b.cast<double>()).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("pretraining beats the uniform baseline and freezes the decoder") {
  SyntheticTaskSpec spec;
  spec.vocab = 6;
  SyntheticTask task(spec);
  Rng rng(8);
  std::vector<std::vector<int>> corpus, held;
  for (int i = 0; i < 300; ++i) corpus.push_back(task.grammar.sample(1 + i % 12, rng));
  for (int i = 0; i < 40; ++i) held.push_back(task.grammar.sample(1 + i % 12, rng));

  ToyDecoder<float> dec(tiny_decoder(), rng);
  LmPretrainConfig c;
  c.steps = 120;
  c.batch_size = 8;
  c.max_silent = 4;
  c.max_zero_rows = 4;
  const double before = lm_cross_entropy(dec, held);
  pretrain_toy_lm(dec, corpus, c);
  const double after = lm_cross_entropy(dec, held);
  MESSAGE("held-out perplexity " << std::exp(before) << " -> " << std::exp(after) << " (uniform 8)");
  CHECK(after < before);
  CHECK(std::exp(after) < 8.0);
  CHECK(dec.frozen());

  ToyDecoder<float> other(tiny_decoder(), rng);
  CHECK_THROWS_AS(pretrain_toy_lm(other, {}, c), ConfigError);
}
