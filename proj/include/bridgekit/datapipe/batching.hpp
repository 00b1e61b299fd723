// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "bridgekit/datapipe/record.hpp"
#include "bridgekit/numcore/layers.hpp"

#include <span>
#include <vector>

namespace bridgekit {

/// Endless stream of index batches over [0, n).
///
/// Each epoch is a fresh shuffle drawn from the iterator's own generator;
/// the last batch of an epoch may be short.
class BatchIterator {
 public:
  BatchIterator(std::size_t n, std::size_t batch_size, std::uint64_t seed);

  std::vector<std::size_t> next();
  long epoch() const { return epoch_; }

 private:
  void reshuffle();

  std::size_t batch_size_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  long epoch_ = 0;
};

inline constexpr int kPadToken = -1;

/// Samples padded to the longest member. Padding frames are zero; padding
/// token slots hold kPadToken with mask 0.
struct PaddedBatch {
  std::vector<std::size_t> indices;
  std::vector<MatrixX<double>> frames;
  std::vector<Index> frame_lengths;
  std::vector<std::vector<int>> tokens;
  std::vector<std::vector<double>> token_mask;
};

PaddedBatch pad_batch(std::span<const Utterance> samples, std::span<const std::size_t> indices);

}  // namespace bridgekit
