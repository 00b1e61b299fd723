// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#include "bridgekit/stubs/toy_task.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace bridgekit {

void SyntheticTaskSpec::validate() const {
  if (vocab < 1) throw ConfigError("task: vocab must be >= 1");
  if (min_len < 1 || max_len < min_len) throw ConfigError("task: need 1 <= min_len <= max_len");
  if (r < 1) throw ConfigError("task: r must be >= 1");
  if (noise_sigma < 0.0) throw ConfigError("task: noise_sigma must be >= 0");
  if (frame_rate_hz <= 0.0) throw ConfigError("task: frame_rate_hz must be > 0");
  if (d_x < 1 || window < 1) throw ConfigError("task: d_x and window must be >= 1");
  if (successors < 1 || successors > vocab) throw ConfigError("task: successors must be in [1, vocab]");
  if (sparse_mass < 0.0 || sparse_mass > 1.0) throw ConfigError("task: sparse_mass must be in [0, 1]");
}

std::string symbol_word(int symbol) {
  if (symbol >= 0 && symbol < 26) return std::string(1, static_cast<char>('a' + symbol));
  return "s" + std::to_string(symbol);
}

std::string symbols_to_text(const std::vector<int>& symbols) {
  std::string out;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i) out += ' ';
    out += symbol_word(symbols[i]);
  }
  return out;
}

std::vector<int> text_to_symbols(const std::string& text, int vocab) {
  std::vector<int> out;
  std::istringstream in(text);
  std::string word;
  while (in >> word) {
    int id = -1;
    if (word.size() == 1 && word[0] >= 'a' && word[0] <= 'z') id = word[0] - 'a';
    else if (word.size() > 1 && word[0] == 's') id = std::stoi(word.substr(1));
    if (id < 0 || id >= vocab || symbol_word(id) != word) throw ConfigError("unknown symbol word '" + word + "'");
    out.push_back(id);
  }
  return out;
}

SymbolGrammar::SymbolGrammar(int vocab, int successors, double sparse_mass, Rng& rng)
    : transition_(MatrixX<double>::Constant(vocab, vocab, (1.0 - sparse_mass) / vocab)) {
  std::exponential_distribution<double> gamma1(1.0);
  std::vector<int> order(static_cast<std::size_t>(vocab));
  for (int s = 0; s < vocab; ++s) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> w(static_cast<std::size_t>(successors));
    for (auto& x : w) x = gamma1(rng);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (int k = 0; k < successors; ++k) transition_(s, order[static_cast<std::size_t>(k)]) += sparse_mass * w[static_cast<std::size_t>(k)] / total;
  }
}

namespace {

int draw(const auto& probs, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  const int n = static_cast<int>(probs.size());
  for (int i = 0; i < n; ++i) {
    acc += probs(i);
    if (u < acc) return i;
  }
  return n - 1;
}

}  // namespace

std::vector<int> SymbolGrammar::sample(int length, Rng& rng) const {
  std::vector<int> out;
  if (length <= 0) return out;
  out.push_back(std::uniform_int_distribution<int>(0, vocab() - 1)(rng));
  while (static_cast<int>(out.size()) < length) out.push_back(draw(transition_.row(out.back()), rng));
  return out;
}

double SymbolGrammar::log_prob(const std::vector<int>& symbols) const {
  if (symbols.empty()) return 0.0;
  double lp = -std::log(static_cast<double>(vocab()));
  for (std::size_t i = 1; i < symbols.size(); ++i) lp += std::log(transition_(symbols[i - 1], symbols[i]));
  return lp;
}

ToyEncoder::ToyEncoder(const SyntheticTaskSpec& spec, Rng& rng) : spec_(spec) {
  spec.validate();
  symbols_ = Tensor<double>(gaussian<double>(spec.vocab, spec.d_x, 1.0, rng));
  MatrixX<double> mix = MatrixX<double>::Identity(spec.d_x, spec.d_x);
  if (!spec.identity_mixing) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian<double>(spec.d_x, spec.d_x, 1.0, rng));
    mix = qr.householderQ();
  }
  mixing_ = Tensor<double>(std::move(mix));
  symbols_.freeze();
  mixing_.freeze();
  window_code_ = spec.frame_position_code ? sinusoid_table<double>(spec.window, spec.d_x)
                                          : MatrixX<double>::Zero(spec.window, spec.d_x);
}

MatrixX<double> ToyEncoder::render(const std::vector<int>& symbols, Rng& rng) const {
  const Index r = spec_.r;
  MatrixX<double> frames(static_cast<Index>(symbols.size()) * r, spec_.d_x);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (symbols[i] < 0 || symbols[i] >= spec_.vocab) throw ConfigError("render: symbol out of range");
    for (Index k = 0; k < r; ++k) frames.row(static_cast<Index>(i) * r + k) = symbols_.value().row(symbols[i]);
  }
  if (spec_.noise_sigma > 0.0) {
    for (Index i = 0; i < frames.size(); ++i) frames.data()[i] += spec_.noise_sigma * noise(rng);
  }
  return frames * mixing_.value();
}

MatrixX<double> ToyEncoder::encode(const MatrixX<double>& frames) const {
  if (frames.cols() != spec_.d_x) throw DimensionError("encode: frame width != d_x");
  const Index w = spec_.window;
  const Index windows = std::max<Index>(1, (frames.rows() + w - 1) / w);
  MatrixX<double> out = MatrixX<double>::Zero(windows * w, spec_.d_x);
  out.topRows(frames.rows()) = frames;
  for (Index k = 0; k < windows; ++k) out.middleRows(k * w, w) += window_code_;
  return out;
}

SyntheticUtterance generate_utterance(const SyntheticTaskSpec& spec, const SymbolGrammar& grammar,
                                      const ToyEncoder& encoder, Rng& rng, const std::string& id) {
  SyntheticUtterance u;
  const int len = std::uniform_int_distribution<int>(spec.min_len, spec.max_len)(rng);
  u.symbols = grammar.sample(len, rng);
  u.frames = encoder.render(u.symbols, rng);
  u.record.id = id;
  u.record.source = "synthetic";
  u.record.duration_seconds = static_cast<double>(u.frames.rows()) / spec.frame_rate_hz;
  u.record.transcript = symbols_to_text(u.symbols);
  return u;
}

SyntheticTask::SyntheticTask(const SyntheticTaskSpec& s) : spec(s) {
  s.validate();
  Rng rng(s.seed);
  grammar = SymbolGrammar(s.vocab, s.successors, s.sparse_mass, rng);
  encoder = ToyEncoder(s, rng);
}

}  // namespace bridgekit
