// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "bridgekit/datapipe/record.hpp"
#include "bridgekit/numcore/layers.hpp"

#include <functional>
#include <span>
#include <vector>

namespace bridgekit {

/// Random concatenation of training utterances up to T ~ U[0, t_max_upper].
struct ConcatPolicy {
  double t_max_upper = 30.0;  // seconds
  bool enabled = false;

  void validate() const;
};

/// Long-form test set duration limit.
struct LongformSpec {
  double t_test = 60.0;  // seconds

  void validate() const;
};

struct ConcatSample {
  Utterance utterance;
  double limit_seconds = 0.0;  // the drawn T
  std::vector<std::string> part_ids;
};

/// Joins utterances in order: frames and audio are stacked in time,
/// transcripts joined with one space, durations summed. The id is the part
/// ids joined with '+'; chapter metadata is dropped unless all parts share a
/// chapter, in which case the chapter and the first order are kept.
Utterance join_utterances(std::span<const Utterance* const> parts);

/// Deterministic core of random concatenation.
///
/// Starting from `base`, repeatedly takes pool[pick()] and appends it while
/// the total duration stays <= limit; stops at the first candidate that does
/// not fit. A base longer than the limit comes back unmodified.
ConcatSample concat_up_to(std::span<const Utterance> pool, const Utterance& base, double limit_seconds,
                          const std::function<std::size_t()>& pick);

/// Draws T ~ U[0, t_max_upper].
double draw_concat_limit(const ConcatPolicy& policy, Rng& rng);

/// Draws T, then concatenates uniform picks (with replacement) from `pool`.
/// With the policy disabled the base is returned as is and no randomness
/// is consumed. Throws ConfigError on an empty pool.
ConcatSample random_concat_sample(std::span<const Utterance> pool, const Utterance& base, const ConcatPolicy& policy,
                                  Rng& rng);

/// Appends zero rows up to a whole number of windows: the result has
/// max(n, ceil(n / W) * W) rows and the original rows untouched.
template <typename Scalar>
MatrixX<Scalar> pad_to_window(const MatrixX<Scalar>& x, Index window) {
  if (window < 1) throw ConfigError("pad_to_window: window must be >= 1");
  const Index rows = (x.rows() + window - 1) / window * window;
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(std::max(rows, x.rows()), x.cols());
  out.topRows(x.rows()) = x;
  return out;
}

/// A long-form test utterance: indices into the input records, in order.
struct LongformGroup {
  std::string chapter_id;
  std::vector<std::size_t> members;
  double duration_seconds = 0.0;
};

/// Greedy sequential packing within each chapter.
///
/// Chapters are visited in order of first appearance and their records in
/// ascending order_in_chapter. The next record joins the open group while
/// the total stays <= t_test; otherwise the group is closed and a new one
/// starts. A record longer than t_test forms its own group. Throws
/// ConfigError if any record lacks chapter metadata or an order repeats.
std::vector<LongformGroup> build_longform_testset(std::span<const UtteranceRecord> records, const LongformSpec& spec);

/// Materializes groups from the matching utterances.
std::vector<Utterance> join_longform_groups(std::span<const Utterance> utterances,
                                            const std::vector<LongformGroup>& groups);

}  // namespace bridgekit
