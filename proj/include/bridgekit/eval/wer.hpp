// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bridgekit {

/// Word error counts. Rates are percentages of the reference length.
struct WerReport {
  long n_ref_words = 0;
  long substitutions = 0;
  long insertions = 0;
  long deletions = 0;

  long errors() const { return substitutions + insertions + deletions; }
  double wer_percent() const;
  double del_percent() const;

  WerReport& operator+=(const WerReport& other);
  bool operator==(const WerReport&) const = default;
};

/// Lowercases and splits on whitespace.
std::vector<std::string> tokenize_words(const std::string& text);

/// Levenshtein alignment with unit costs.
///
/// Among minimum-cost alignments the one with the most substitutions wins.
/// Cost and lengths then fix I and D, so the split is deterministic and
/// swapping ref and hyp swaps I and D. Throws ConfigError on an empty
/// reference.
WerReport align_and_score(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);
WerReport align_and_score(const std::string& ref, const std::string& hyp);

/// Pooled counts over (reference, hypothesis) pairs.
WerReport corpus_score(const std::vector<std::pair<std::string, std::string>>& pairs);
WerReport corpus_score(const std::vector<WerReport>& reports);

/// One decoded utterance.
///
/// A decode counts as successful when its deletion rate is at most 50% and
/// the decoder did not hit its length limit.
struct DecodeOutcome {
  std::string id;
  std::string reference;
  std::string hypothesis;
  double duration_seconds = 0.0;
  bool truncated = false;
  WerReport report;

  bool success() const;
};

inline constexpr double kSuccessMaxDelPercent = 50.0;

DecodeOutcome score_outcome(std::string id, std::string reference, std::string hypothesis, double duration_seconds,
                            bool truncated);

/// Pooled scores for durations in (lo, hi]. Empty groups stay nullopt.
struct DurationBucket {
  double lo = 0.0;
  double hi = 0.0;
  long n_all = 0;
  long n_success = 0;
  std::optional<WerReport> all;
  std::optional<WerReport> successful;
};

/// `edges` must be strictly increasing with at least two entries; outcomes
/// outside (edges.front(), edges.back()] are ignored.
std::vector<DurationBucket> duration_bucket_report(const std::vector<DecodeOutcome>& outcomes,
                                                   const std::vector<double>& edges);

/// One row of a results table.
struct ResultRow {
  std::string label;
  long tokens = -1;  // -1 = not applicable
  long params = -1;
  WerReport report;
};

std::string format_results_table(const std::vector<ResultRow>& rows);
std::string format_bucket_table(const std::vector<DurationBucket>& buckets);
std::string results_json(const std::vector<ResultRow>& rows, const std::vector<DurationBucket>& buckets = {});

}  // namespace bridgekit
