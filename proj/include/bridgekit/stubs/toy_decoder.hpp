// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "bridgekit/numcore/layers.hpp"

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bridgekit {

class LengthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ToyDecoderConfig {
  int vocab = 26;  // symbols + BOS + EOS
  Index d_t = 64;
  Index layers = 2;
  Index heads = 4;
  Index ffn = 256;
  Index max_context = 512;

  int bos() const { return vocab - 2; }
  int eos() const { return vocab - 1; }
  void validate() const {
    if (vocab < 3) throw ConfigError("decoder: vocab must be >= 3");
    if (d_t < 1 || layers < 1 || ffn < 1 || max_context < 2) throw ConfigError("decoder: bad dimensions");
    if (heads < 1 || d_t % heads != 0) throw ConfigError("decoder: heads must divide d_t");
  }
};

template <typename Scalar>
struct DecoderBlock {
  LayerNorm<Scalar> ln_attn;
  MultiHeadAttention<Scalar> attn;
  LayerNorm<Scalar> ln_ffn;
  FeedForward<Scalar> ffn;

  DecoderBlock() = default;
  DecoderBlock(const ToyDecoderConfig& c, Rng& rng)
      : ln_attn(c.d_t), attn(c.d_t, c.d_t, c.d_t, c.heads, rng), ln_ffn(c.d_t), ffn(c.d_t, c.ffn, rng) {}

  template <typename Self>
  static Var<Scalar> apply(Self& self, Tape<Scalar>& tape, Var<Scalar> h, AttentionMask mask) {
    auto y = self.ln_attn(tape, h);
    h = add(h, self.attn(tape, y, y, y, mask));
    return add(h, self.ffn(tape, self.ln_ffn(tape, h)));
  }

  template <typename Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    ln_attn.visit(prefix + ".ln_attn", v);
    attn.visit(prefix + ".attn", v);
    ln_ffn.visit(prefix + ".ln_ffn", v);
    ffn.visit(prefix + ".ffn", v);
  }
};

struct TeacherForcedStats {
  double loss = 0.0;
  Index correct = 0;
  Index positions = 0;
};

struct DecodeResult {
  std::vector<int> tokens;  // without BOS/EOS
  bool truncated = false;
};

/// Small pre-norm Transformer LM reading an optional soft prefix.
///
/// Input rows are [prefix] ++ [E[BOS] ++ E[tokens]] + sinusoid(text position),
/// with text positions counted from 0 at BOS; prefix rows carry no position
/// code. Prefix rows attend to each other in both directions, text rows are
/// causal and see the whole prefix.
template <typename Scalar>
class ToyDecoder {
 public:
  using Matrix = MatrixX<Scalar>;

  ToyDecoder() = default;
  ToyDecoder(const ToyDecoderConfig& c, Rng& rng) : config_(c) {
    c.validate();
    embed_ = trainable<Scalar>(gaussian<Scalar>(c.vocab, c.d_t, 1.0, rng));
    prompt_marker_ = trainable<Scalar>(gaussian<Scalar>(1, c.d_t, 0.5, rng), true);
    for (Index l = 0; l < c.layers; ++l) blocks_.emplace_back(c, rng);
    final_ln_ = LayerNorm<Scalar>(c.d_t);
    head_ = Linear<Scalar>(c.d_t, c.vocab, rng);
  }

  const ToyDecoderConfig& config() const { return config_; }
  int bos() const { return config_.bos(); }
  int eos() const { return config_.eos(); }

  Tensor<Scalar>& embedding() { return embed_; }
  const Tensor<Scalar>& embedding() const { return embed_; }
  Tensor<Scalar>& prompt_marker() { return prompt_marker_; }
  Linear<Scalar>& head() { return head_; }

  void freeze() {
    visit([](const std::string&, Tensor<Scalar>& t) { t.freeze(); });
  }
  bool frozen() {
    bool all = true;
    visit([&](const std::string&, Tensor<Scalar>& t) { all = all && t.frozen(); });
    return all;
  }

  /// Logits (one row per input token) for the text region.
  Var<Scalar> logits(Tape<Scalar>& tape, const Var<Scalar>& prefix, std::span<const int> inputs) {
    const Index p = prefix.valid() ? prefix.rows() : 0;
    const Index n = static_cast<Index>(inputs.size());
    if (n < 1) throw LengthError("decoder: empty text region");
    if (p + n > config_.max_context) {
      throw LengthError("decoder: " + std::to_string(p + n) + " positions exceed max context " +
                        std::to_string(config_.max_context));
    }
    if (p > 0 && prefix.cols() != config_.d_t) throw DimensionError("decoder: prefix width != d_t");
    auto text = add(gather_rows(tape.parameter(embed_), inputs), tape.constant(sinusoid_table<Scalar>(n, config_.d_t)));
    Var<Scalar> h = text;
    if (p > 0) {
      std::vector<Var<Scalar>> parts{prefix, text};
      h = concat_rows<Scalar>(parts);
    }
    const AttentionMask mask{true, p};
    for (auto& block : blocks_) h = DecoderBlock<Scalar>::apply(block, tape, h, mask);
    if (p > 0) h = slice_rows(h, p, n);
    return head_(tape, final_ln_(tape, h));
  }

  /// Next-token loss on [BOS] ++ transcript -> transcript ++ [EOS].
  ///
  /// Returns the mean cross-entropy over the transcript.size() + 1 targets
  /// and fills `stats` (argmax accuracy) when given.
  Var<Scalar> teacher_forced_loss(Tape<Scalar>& tape, const Var<Scalar>& prefix, std::span<const int> transcript,
                                  TeacherForcedStats* stats = nullptr) {
    if (transcript.empty()) throw LengthError("decoder: empty transcript");
    std::vector<int> inputs{bos()};
    inputs.insert(inputs.end(), transcript.begin(), transcript.end());
    std::vector<int> targets(transcript.begin(), transcript.end());
    targets.push_back(eos());
    auto out = logits(tape, prefix, inputs);
    auto loss = cross_entropy<Scalar>(out, targets);
    if (stats) {
      stats->loss = static_cast<double>(loss.value()(0, 0));
      stats->positions = static_cast<Index>(targets.size());
      stats->correct = 0;
      for (Index i = 0; i < out.rows(); ++i) {
        if (argmax(out.value().row(i)) == targets[static_cast<std::size_t>(i)]) ++stats->correct;
      }
    }
    return loss;
  }

  /// Greedy decoding from BOS with a key/value cache.
  ///
  /// Stops at EOS or after max_len tokens (then truncated = true). Ties in
  /// the argmax go to the lowest token id. When `step_logits` is given it
  /// receives one row of logits per decoding step.
  DecodeResult greedy_decode(const Matrix& prefix, Index max_len, Matrix* step_logits = nullptr) const {
    DecodeResult result;
    if (max_len <= 0) {
      result.truncated = true;
      return result;
    }
    if (prefix.rows() > 0 && prefix.cols() != config_.d_t) throw DimensionError("decoder: prefix width != d_t");
    const Index p = prefix.rows();
    Tape<Scalar> tape;
    std::vector<Matrix> keys(blocks_.size()), values(blocks_.size());
    if (p > 0) {
      Var<Scalar> h = tape.reference(prefix);
      for (std::size_t l = 0; l < blocks_.size(); ++l) {
        const auto& b = blocks_[l];
        auto y = b.ln_attn(tape, h);
        auto k = b.attn.k(tape, y);
        auto v = b.attn.v(tape, y);
        keys[l] = k.value();
        values[l] = v.value();
        h = add(h, b.attn.o(tape, scaled_dot_attention(b.attn.q(tape, y), k, v, b.attn.heads)));
        h = add(h, b.ffn(tape, b.ln_ffn(tape, h)));
      }
    }
    int token = bos();
    for (Index pos = 0;; ++pos) {
      if (p + pos + 1 > config_.max_context) {
        result.truncated = true;
        break;
      }
      Tape<Scalar> step;
      Matrix row = embed_.value().row(token) + sinusoid<Scalar>(static_cast<double>(pos), config_.d_t);
      Var<Scalar> h = step.constant(std::move(row));
      for (std::size_t l = 0; l < blocks_.size(); ++l) {
        const auto& b = blocks_[l];
        auto y = b.ln_attn(step, h);
        Matrix& kc = keys[l];
        Matrix& vc = values[l];
        const Matrix k = b.attn.k(step, y).value();
        const Matrix v = b.attn.v(step, y).value();
        kc.conservativeResize(kc.rows() + 1, k.cols());
        vc.conservativeResize(vc.rows() + 1, v.cols());
        kc.bottomRows(1) = k;
        vc.bottomRows(1) = v;
        auto att = scaled_dot_attention(b.attn.q(step, y), step.reference(kc), step.reference(vc), b.attn.heads);
        h = add(h, b.attn.o(step, att));
        h = add(h, b.ffn(step, b.ln_ffn(step, h)));
      }
      const Matrix& out = head_(step, final_ln_(step, h)).value();
      if (step_logits) {
        step_logits->conservativeResize(pos + 1, out.cols());
        step_logits->row(pos) = out.row(0);
      }
      const int next = argmax(out.row(0));
      if (next == eos()) break;
      if (static_cast<Index>(result.tokens.size()) == max_len) {
        result.truncated = true;
        break;
      }
      result.tokens.push_back(next);
      token = next;
    }
    return result;
  }

  template <typename Visitor>
  void visit(Visitor&& v) {
    visit("decoder", v);
  }

  template <typename Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    v(prefix + ".embed", embed_);
    v(prefix + ".prompt_marker", prompt_marker_);
    for (std::size_t l = 0; l < blocks_.size(); ++l) blocks_[l].visit(prefix + ".block" + std::to_string(l), v);
    final_ln_.visit(prefix + ".final_ln", v);
    head_.visit(prefix + ".head", v);
  }

  /// Same weights in another scalar type; frozen flags carry over.
  template <typename Other>
  ToyDecoder<Other> cast() {
    Rng rng(0);
    ToyDecoder<Other> out(config_, rng);
    copy_parameters(*this, out);
    if (frozen()) out.freeze();
    return out;
  }

  /// Lowest index among the maxima.
  template <typename Row>
  static int argmax(const Row& row) {
    int best = 0;
    for (Index j = 1; j < row.size(); ++j) {
      if (row(j) > row(best)) best = static_cast<int>(j);
    }
    return best;
  }

 private:
  ToyDecoderConfig config_;
  Tensor<Scalar> embed_;
  Tensor<Scalar> prompt_marker_;
  std::vector<DecoderBlock<Scalar>> blocks_;
  LayerNorm<Scalar> final_ln_;
  Linear<Scalar> head_;
};

}  // namespace bridgekit
