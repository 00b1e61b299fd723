// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "bridgekit/numcore/tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace bridgekit {

/// One manifest entry.
struct UtteranceRecord {
  std::string id;
  std::string source;  // "synthetic" or a WAV path
  double duration_seconds = 0.0;
  std::string transcript;
  std::optional<std::string> chapter_id;
  std::optional<long> order_in_chapter;

  bool operator==(const UtteranceRecord&) const = default;
};

/// Throws ConfigError unless duration > 0 and the transcript has a word.
void validate_record(const UtteranceRecord& record);

/// A record with its features. `symbols` is empty for real audio; `audio`
/// holds 16 kHz samples when the source is a WAV file.
struct Utterance {
  UtteranceRecord record;
  std::vector<int> symbols;
  MatrixX<double> frames;
  std::vector<float> audio;
};

}  // namespace bridgekit
