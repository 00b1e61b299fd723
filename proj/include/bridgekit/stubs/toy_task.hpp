// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "bridgekit/datapipe/record.hpp"
#include "bridgekit/numcore/layers.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace bridgekit {

/// Synthetic speech-like task.
///
/// Transcripts are strings over `vocab` symbols drawn from a seeded sparse
/// Markov chain; each symbol is rendered as `r` noisy frames.
struct SyntheticTaskSpec {
  int vocab = 24;
  int min_len = 1;
  int max_len = 12;
  Index r = 10;
  double noise_sigma = 0.1;
  double frame_rate_hz = 10.0;
  Index d_x = 32;
  Index window = 300;  // encoder window in frames
  std::uint64_t seed = 1;
  int successors = 5;
  double sparse_mass = 0.85;
  bool identity_mixing = false;
  bool frame_position_code = true;

  void validate() const;
};

/// Token ids: symbols 0..vocab-1, then BOS and EOS.
inline int bos_token(int vocab) { return vocab; }
inline int eos_token(int vocab) { return vocab + 1; }

/// Symbol k is written as a lowercase word ("a".."z", then "s26", "s27", ...).
std::string symbol_word(int symbol);
std::string symbols_to_text(const std::vector<int>& symbols);
/// Inverse of symbols_to_text; unknown words throw ConfigError.
std::vector<int> text_to_symbols(const std::string& text, int vocab);

/// First-order Markov chain over symbols: each symbol gets `successors`
/// likely next symbols with Dirichlet(1) weights holding `sparse_mass` of the
/// probability; the rest is spread uniformly.
class SymbolGrammar {
 public:
  SymbolGrammar() = default;
  SymbolGrammar(int vocab, int successors, double sparse_mass, Rng& rng);

  int vocab() const { return static_cast<int>(transition_.rows()); }
  const MatrixX<double>& transition() const { return transition_; }
  std::vector<int> sample(int length, Rng& rng) const;
  /// Natural-log probability of a string under the chain.
  double log_prob(const std::vector<int>& symbols) const;

 private:
  MatrixX<double> transition_;
};

/// Frozen stand-in for a pretrained speech encoder.
///
/// render() turns symbols into raw frames: each symbol's embedding repeated
/// r times, plus N(0, noise^2), times a fixed orthogonal mixing matrix.
/// encode() zero-pads to a whole number of windows and adds a fixed
/// sinusoidal frame-position code that restarts in every window.
class ToyEncoder {
 public:
  ToyEncoder() = default;
  ToyEncoder(const SyntheticTaskSpec& spec, Rng& rng);

  const SyntheticTaskSpec& spec() const { return spec_; }
  Tensor<double>& symbols() { return symbols_; }
  Tensor<double>& mixing() { return mixing_; }
  const Tensor<double>& symbols() const { return symbols_; }
  const Tensor<double>& mixing() const { return mixing_; }

  MatrixX<double> render(const std::vector<int>& symbols, Rng& rng) const;
  MatrixX<double> encode(const MatrixX<double>& frames) const;

  template <typename Visitor>
  void visit(const std::string& prefix, Visitor&& v) {
    v(prefix + ".symbols", symbols_);
    v(prefix + ".mixing", mixing_);
  }

 private:
  SyntheticTaskSpec spec_;
  Tensor<double> symbols_;
  Tensor<double> mixing_;
  MatrixX<double> window_code_;
};

// frames are raw, before encode()
using SyntheticUtterance = Utterance;

/// One utterance of random length in [min_len, max_len].
SyntheticUtterance generate_utterance(const SyntheticTaskSpec& spec, const SymbolGrammar& grammar,
                                      const ToyEncoder& encoder, Rng& rng, const std::string& id);

/// Grammar and encoder derived from spec.seed.
struct SyntheticTask {
  SyntheticTaskSpec spec;
  SymbolGrammar grammar;
  ToyEncoder encoder;

  explicit SyntheticTask(const SyntheticTaskSpec& s);
};

}  // namespace bridgekit
