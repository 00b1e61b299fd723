// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "bridgekit/numcore/layers.hpp"

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace bridgekit {

enum class ConnectorKind { FC, CA, QF, SegQF };

std::string to_string(ConnectorKind kind);
/// Accepts "fc", "ca", "qf", "segqf" in any case.
ConnectorKind parse_connector_kind(const std::string& name);

struct ConnectorConfig {
  ConnectorKind kind = ConnectorKind::QF;
  Index d_x = 32;
  Index d_t = 64;
  // FC
  Index m = 10;
  Index fc_hidden = 256;
  // CA
  Index s = 10;
  Index ca_heads = 4;
  // QF and SegQF
  Index n_q = 16;
  Index d_q = 0;  // 0 means d_x
  Index n_blocks = 2;
  Index n_heads = 4;
  Index segment_len = 300;

  Index query_width() const { return d_q > 0 ? d_q : d_x; }

  /// Throws ConfigError for any field the chosen kind needs that is out of range.
  void validate() const;
};

/// Trainable parameter count computed from the config alone.
std::int64_t param_count(const ConnectorConfig& config);

inline Index ceil_div(Index a, Index b) { return (a + b - 1) / b; }

/// Groups of m consecutive frames concatenated into one row.
///
/// A short final group is zero-padded to m frames, so the result has
/// ceil(n_x / m) rows of width m * d_x.
template <typename Scalar>
Var<Scalar> stack_frames(const Var<Scalar>& x, Index m) {
  if (m < 1) throw ConfigError("stack_frames: m must be >= 1");
  if (x.rows() < 1) throw DimensionError("stack_frames: empty input");
  const Index groups = ceil_div(x.rows(), m);
  return reshape(pad_rows(x, groups * m), groups, m * x.cols());
}

template <typename Scalar>
MatrixX<Scalar> stack_frames(const MatrixX<Scalar>& x, Index m) {
  Tape<Scalar> tape;
  return stack_frames(tape.reference(x), m).value();
}

/// Kernel = stride = s convolution over a zero-padded input.
///
/// `weight` is [out * d_x x s] as in conv1d. Output has ceil(n_x / s) rows.
template <typename Scalar>
Var<Scalar> conv1d_downsample(const Var<Scalar>& x, Index s, const Var<Scalar>& weight, const Var<Scalar>& bias) {
  if (s < 1) throw ConfigError("conv1d_downsample: s must be >= 1");
  if (x.rows() < 1) throw DimensionError("conv1d_downsample: empty input");
  return conv1d(pad_rows(x, ceil_div(x.rows(), s) * s), weight, bias, x.cols(), s, s);
}

/// The first FC layer rearranged as conv1d weights: W[t * d_x + c, o]
/// becomes row o * d_x + c, column t.
template <typename Scalar>
MatrixX<Scalar> stacked_linear_as_conv(const MatrixX<Scalar>& weight, Index m, Index d_x) {
  if (weight.rows() != m * d_x) throw DimensionError("stacked_linear_as_conv: weight rows != m * d_x");
  const Index out = weight.cols();
  MatrixX<Scalar> conv(out * d_x, m);
  for (Index o = 0; o < out; ++o) {
    for (Index c = 0; c < d_x; ++c) {
      for (Index t = 0; t < m; ++t) conv(o * d_x + c, t) = weight(t * d_x + c, o);
    }
  }
  return conv;
}

/// Contiguous segments of L rows; the last one is zero-padded to L.
template <typename Scalar>
std::vector<MatrixX<Scalar>> segment_split(const MatrixX<Scalar>& x, Index L) {
  if (L < 1) throw ConfigError("segment_split: L must be >= 1");
  if (x.rows() < 1) throw DimensionError("segment_split: empty input");
  std::vector<MatrixX<Scalar>> out;
  for (Index first = 0; first < x.rows(); first += L) {
    MatrixX<Scalar> seg = MatrixX<Scalar>::Zero(L, x.cols());
    const Index n = std::min(L, x.rows() - first);
    seg.topRows(n) = x.middleRows(first, n);
    out.push_back(std::move(seg));
  }
  return out;
}

/// Positional embedding of the i-th segment (i >= 1), sinusoid at position i - 1.
template <typename Scalar>
RowVectorX<Scalar> segment_pe(Index i, Index d_x) {
  if (i < 1) throw ConfigError("segment_pe: segment index starts at 1");
  return sinusoid<Scalar>(static_cast<double>(i - 1), d_x);
}

template <typename Scalar>
struct FcConnector {
  Index m = 1;
  Linear<Scalar> up;
  Linear<Scalar> down;

  FcConnector() = default;
  FcConnector(const ConnectorConfig& c, Rng& rng) : m(c.m), up(c.m * c.d_x, c.fc_hidden, rng), down(c.fc_hidden, c.d_t, rng) {}

  /// Linear(ReLU(Linear(H))) on already stacked frames.
  Var<Scalar> mlp(Tape<Scalar>& tape, const Var<Scalar>& h) { return down(tape, relu(up(tape, h))); }

  Var<Scalar> forward(Tape<Scalar>& tape, const Var<Scalar>& x) { return mlp(tape, stack_frames(x, m)); }

  template <typename Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    up.visit(prefix + ".up", v);
    down.visit(prefix + ".down", v);
  }
};

template <typename Scalar>
struct CaConnector {
  Index s = 1;
  Tensor<Scalar> conv_weight;
  Tensor<Scalar> conv_bias;
  Linear<Scalar> proj;
  MultiHeadAttention<Scalar> attn;

  CaConnector() = default;
  CaConnector(const ConnectorConfig& c, Rng& rng)
      : s(c.s),
        conv_weight(Shape{c.d_x, c.d_x, c.s}, uniform_fan_in<Scalar>(c.d_x * c.d_x, c.s, c.d_x * c.s, rng)),
        conv_bias(trainable<Scalar>(MatrixX<Scalar>::Zero(1, c.d_x), true)),
        proj(c.d_x, c.d_t, rng),
        attn(c.d_t, c.d_t, c.d_t, c.ca_heads, rng) {
    conv_weight.set_requires_grad(true);
  }

  /// `embed` is the frozen V x d_t text embedding table.
  Var<Scalar> forward(Tape<Scalar>& tape, const Var<Scalar>& x, const Var<Scalar>& embed) {
    if (embed.cols() != attn.k.in_features()) {
      throw DimensionError("ca connector: embedding width " + std::to_string(embed.cols()) + " != d_t " +
                           std::to_string(attn.k.in_features()));
    }
    auto h = proj(tape, conv1d_downsample(x, s, tape.parameter(conv_weight), tape.parameter(conv_bias)));
    return attn(tape, h, embed, embed);
  }

  template <typename Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    v(prefix + ".conv.weight", conv_weight);
    v(prefix + ".conv.bias", conv_bias);
    proj.visit(prefix + ".proj", v);
    attn.visit(prefix + ".attn", v);
  }
};

/// Pre-norm block: self-attention over queries, cross-attention into X, GELU FFN.
template <typename Scalar>
struct QFormerBlock {
  LayerNorm<Scalar> ln_self;
  MultiHeadAttention<Scalar> self_attn;
  LayerNorm<Scalar> ln_cross;
  MultiHeadAttention<Scalar> cross_attn;
  LayerNorm<Scalar> ln_ffn;
  FeedForward<Scalar> ffn;

  QFormerBlock() = default;
  QFormerBlock(Index d_q, Index d_x, Index heads, Rng& rng)
      : ln_self(d_q),
        self_attn(d_q, d_q, d_q, heads, rng),
        ln_cross(d_q),
        cross_attn(d_q, d_x, d_q, heads, rng),
        ln_ffn(d_q),
        ffn(d_q, 4 * d_q, rng) {}

  Var<Scalar> operator()(Tape<Scalar>& tape, Var<Scalar> q, const Var<Scalar>& x) {
    auto y = ln_self(tape, q);
    q = add(q, self_attn(tape, y, y, y));
    q = add(q, cross_attn(tape, ln_cross(tape, q), x, x));
    return add(q, ffn(tape, ln_ffn(tape, q)));
  }

  template <typename Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    ln_self.visit(prefix + ".ln_self", v);
    self_attn.visit(prefix + ".self_attn", v);
    ln_cross.visit(prefix + ".ln_cross", v);
    cross_attn.visit(prefix + ".cross_attn", v);
    ln_ffn.visit(prefix + ".ln_ffn", v);
    ffn.visit(prefix + ".ffn", v);
  }
};

template <typename Scalar>
struct QFormer {
  Tensor<Scalar> queries;
  std::vector<QFormerBlock<Scalar>> blocks;
  Linear<Scalar> out;

  QFormer() = default;
  QFormer(const ConnectorConfig& c, Rng& rng) : queries(trainable<Scalar>(gaussian<Scalar>(c.n_q, c.query_width(), 0.02, rng))) {
    for (Index b = 0; b < c.n_blocks; ++b) blocks.emplace_back(c.query_width(), c.d_x, c.n_heads, rng);
    out = Linear<Scalar>(c.query_width(), c.d_t, rng);
  }

  Index n_q() const { return queries.rows(); }

  /// Always n_q rows of width d_t, whatever the number of frames.
  Var<Scalar> forward(Tape<Scalar>& tape, const Var<Scalar>& x) {
    if (x.rows() < 1) throw DimensionError("qformer: empty input");
    auto q = tape.parameter(queries);
    for (auto& block : blocks) q = block(tape, q, x);
    return out(tape, q);
  }

  template <typename Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    v(prefix + ".queries", queries);
    for (std::size_t b = 0; b < blocks.size(); ++b) blocks[b].visit(prefix + ".block" + std::to_string(b), v);
    out.visit(prefix + ".out", v);
  }
};

/// One shared QFormer applied to each L-frame segment plus its segment PE.
template <typename Scalar>
struct SegQFormer {
  Index segment_len = 1;
  bool use_pe = true;
  QFormer<Scalar> qf;

  SegQFormer() = default;
  SegQFormer(const ConnectorConfig& c, Rng& rng) : segment_len(c.segment_len), qf(c, rng) {}

  Var<Scalar> forward(Tape<Scalar>& tape, const Var<Scalar>& x) {
    if (x.rows() < 1) throw DimensionError("seg qformer: empty input");
    const Index n = ceil_div(x.rows(), segment_len);
    std::vector<Var<Scalar>> outs;
    outs.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      const Index first = i * segment_len;
      auto seg = pad_rows(slice_rows(x, first, std::min(segment_len, x.rows() - first)), segment_len);
      if (use_pe) seg = add_row(seg, tape.constant(segment_pe<Scalar>(i + 1, x.cols())));
      outs.push_back(qf.forward(tape, seg));
    }
    return n == 1 ? outs[0] : concat_rows<Scalar>(outs);
  }

  template <typename Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    qf.visit(prefix, v);
  }
};

/// Any of the four connectors behind one interface.
template <typename Scalar>
class Connector {
 public:
  Connector() = default;
  Connector(const ConnectorConfig& config, Rng& rng) : config_(config) {
    config.validate();
    switch (config.kind) {
      case ConnectorKind::FC: impl_ = FcConnector<Scalar>(config, rng); break;
      case ConnectorKind::CA: impl_ = CaConnector<Scalar>(config, rng); break;
      case ConnectorKind::QF: impl_ = QFormer<Scalar>(config, rng); break;
      case ConnectorKind::SegQF: impl_ = SegQFormer<Scalar>(config, rng); break;
    }
  }

  const ConnectorConfig& config() const { return config_; }

  /// Maps encoder features to speech tokens. Only CA reads `embed`.
  Var<Scalar> forward(Tape<Scalar>& tape, const Var<Scalar>& x, const Var<Scalar>& embed) {
    Var<Scalar> out = std::visit(
        [&](auto& c) -> Var<Scalar> {
          using C = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<C, CaConnector<Scalar>>) return c.forward(tape, x, embed);
          else return c.forward(tape, x);
        },
        impl_);
    if (out.cols() != config_.d_t) throw DimensionError("connector output width != d_t");
    return out;
  }

  /// Output token count for n_x input frames.
  Index output_tokens(Index n_x) const {
    switch (config_.kind) {
      case ConnectorKind::FC: return ceil_div(n_x, config_.m);
      case ConnectorKind::CA: return ceil_div(n_x, config_.s);
      case ConnectorKind::QF: return config_.n_q;
      case ConnectorKind::SegQF: return ceil_div(n_x, config_.segment_len) * config_.n_q;
    }
    return 0;
  }

  template <typename Visitor>
  void visit(Visitor&& v) {
    std::visit([&](auto& c) { c.visit("connector", v); }, impl_);
  }

  std::int64_t trainable_parameters() {
    std::int64_t n = 0;
    visit([&](const std::string&, Tensor<Scalar>& t) { n += t.size(); });
    return n;
  }

  /// Redraws the query embeddings from N(0, stddev^2); no-op for FC and CA.
  ///
  /// At the 0.02 init scale the self-attention over queries is almost
  /// uniform and its q/k gradients are small enough for finite-difference
  /// roundoff to dominate, so gradient checks use unit-scale queries.
  void redraw_queries(Rng& rng, double stddev) {
    Tensor<Scalar>* q = nullptr;
    if (auto* qf = std::get_if<QFormer<Scalar>>(&impl_)) q = &qf->queries;
    if (auto* seg = std::get_if<SegQFormer<Scalar>>(&impl_)) q = &seg->qf.queries;
    if (q) q->value() = gaussian<Scalar>(q->rows(), q->cols(), stddev, rng);
  }

  template <typename C>
  C& as() {
    return std::get<C>(impl_);
  }

 private:
  ConnectorConfig config_;
  std::variant<FcConnector<Scalar>, CaConnector<Scalar>, QFormer<Scalar>, SegQFormer<Scalar>> impl_;
};

}  // namespace bridgekit
