// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#include "bridgekit/datapipe/batching.hpp"

#include <algorithm>
#include <numeric>

namespace bridgekit {

BatchIterator::BatchIterator(std::size_t n, std::size_t batch_size, std::uint64_t seed)
    : batch_size_(batch_size), rng_(seed), order_(n) {
  if (batch_size < 1) throw ConfigError("batches: batch_size must be >= 1");
  if (n < 1) throw ConfigError("batches: no samples");
  reshuffle();
}

void BatchIterator::reshuffle() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
}

std::vector<std::size_t> BatchIterator::next() {
  if (cursor_ == order_.size()) {
    ++epoch_;
    reshuffle();
  }
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  std::vector<std::size_t> batch(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  return batch;
}

PaddedBatch pad_batch(std::span<const Utterance> samples, std::span<const std::size_t> indices) {
  PaddedBatch b;
  b.indices.assign(indices.begin(), indices.end());
  Index max_frames = 0, width = 0;
  std::size_t max_tokens = 0;
  for (std::size_t i : indices) {
    if (i >= samples.size()) throw ConfigError("pad_batch: index out of range");
    max_frames = std::max(max_frames, samples[i].frames.rows());
    width = std::max(width, samples[i].frames.cols());
    max_tokens = std::max(max_tokens, samples[i].symbols.size());
  }
  for (std::size_t i : indices) {
    const Utterance& u = samples[i];
    if (u.frames.rows() > 0 && u.frames.cols() != width) throw DimensionError("pad_batch: frame widths differ");
    MatrixX<double> f = MatrixX<double>::Zero(max_frames, width);
    f.topRows(u.frames.rows()) = u.frames;
    b.frames.push_back(std::move(f));
    b.frame_lengths.push_back(u.frames.rows());
    std::vector<int> tokens(max_tokens, kPadToken);
    std::vector<double> mask(max_tokens, 0.0);
    std::copy(u.symbols.begin(), u.symbols.end(), tokens.begin());
    std::fill_n(mask.begin(), u.symbols.size(), 1.0);
    b.tokens.push_back(std::move(tokens));
    b.token_mask.push_back(std::move(mask));
  }
  return b;
}

}  // namespace bridgekit
