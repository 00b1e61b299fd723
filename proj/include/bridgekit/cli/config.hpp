// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "bridgekit/connectors/connectors.hpp"
#include "bridgekit/datapipe/concat.hpp"
#include "bridgekit/stubs/pretrain.hpp"
#include "bridgekit/stubs/toy_task.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace bridgekit {

/// Flat "section.key = value" settings.
///
/// '#' starts a comment line; blank lines are ignored. Keys may repeat only
/// through set(). Every key read through a getter is marked used so that
/// typos can be reported with check_all_used().
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& origin = "config");
  static KeyValueConfig parse_string(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value);
  /// Applies "key=value".
  void set_assignment(const std::string& assignment);

  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  /// Throws ConfigError listing keys no getter has read.
  void check_all_used() const;

  const std::map<std::string, std::string>& values() const { return values_; }
  /// Sorted "key = value" lines.
  std::string dump() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

struct DataConfig {
  long n_train = 2000;
  long n_valid = 200;
  long n_test = 400;
  long chapter_size = 40;  // consecutive test utterances per chapter
};

struct DecoderSetup {
  ToyDecoderConfig model;
  LmPretrainConfig pretrain;
  long corpus_size = 20000;
  int corpus_max_len = 96;
  std::string cache;  // empty: no cache
};

struct TrainingConfig {
  long steps = 3000;
  long batch_size = 16;
  double learning_rate = 2e-3;
  long warmup_steps = 200;
  std::uint64_t seed = 0;
  long validate_every = 100;
  std::string init_checkpoint;  // empty: fresh connector
  bool keep_last = false;       // select the final step instead of the best validation step
};

struct EvalConfig {
  std::vector<double> longform;  // T_test values in seconds
  std::vector<double> buckets{0, 10, 20, 30, 45, 60, 90, 120};
  double tokens_per_second = 2.0;  // decode budget per second of audio
  long extra_tokens = 10;
};

struct ExperimentConfig {
  ConnectorConfig connector;
  ConcatPolicy concat;
  SyntheticTaskSpec task;
  DataConfig data;
  DecoderSetup decoder;
  TrainingConfig training;
  EvalConfig eval;
  std::string out_dir = "run";

  /// Reads every known key; unknown keys and a missing training.seed throw
  /// ConfigError.
  static ExperimentConfig from(const KeyValueConfig& kv);
  /// from() plus check_paths().
  static ExperimentConfig load(const std::filesystem::path& path);
  /// The complete setting list, defaults included.
  KeyValueConfig to_kv() const;

  void validate() const;
  /// Referenced input files must exist.
  void check_paths() const;
};

}  // namespace bridgekit
