// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "bridgekit/numcore/serialize.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace bridgekit {

struct WavAudio {
  int sample_rate = 0;
  std::vector<float> samples;  // mono, scaled to [-1, 1)
};

/// RIFF/WAVE, PCM 16-bit mono. Anything else throws FormatError.
WavAudio parse_wav(const std::string& bytes);
WavAudio read_wav(const std::filesystem::path& path);
std::string encode_wav(std::span<const float> samples, int sample_rate);
void write_wav(const std::filesystem::path& path, std::span<const float> samples, int sample_rate);

struct LogMelConfig {
  int sample_rate = 16000;
  int n_fft = 400;  // 25 ms
  int hop = 160;    // 10 ms
  int n_mels = 80;
  double f_min = 0.0;
  double f_max = 8000.0;
  double floor = 1e-10;
};

/// Triangular HTK-mel filters, n_mels x (n_fft / 2 + 1), unnormalized.
MatrixX<double> mel_filterbank(const LogMelConfig& c);

/// 1 + (n - n_fft) / hop frames (none for clips shorter than one window) of
/// log(max(mel . |STFT|, floor)) with a periodic Hann window and no centering.
/// Throws FormatError if `sample_rate` differs from the configured rate.
MatrixX<double> extract_logmel(std::span<const float> samples, int sample_rate, const LogMelConfig& c = {});

}  // namespace bridgekit
