// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#include "bridgekit/datapipe/audio.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

namespace bridgekit {

namespace {

std::uint32_t le32(const std::string& b, std::size_t at) {
  std::uint32_t v = 0;
  for (int k = 3; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(b[at + static_cast<std::size_t>(k)]);
  return v;
}

std::uint16_t le16(const std::string& b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

void put32(std::string& b, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) b.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

void put16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>(v >> 8));
}

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

WavAudio parse_wav(const std::string& b) {
  if (b.size() < 12 || b.compare(0, 4, "RIFF") != 0 || b.compare(8, 4, "WAVE") != 0) {
    throw FormatError("wav: not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  int rate = 0;
  std::size_t at = 12;
  while (at + 8 <= b.size()) {
    const std::string id = b.substr(at, 4);
    const std::size_t size = le32(b, at + 4);
    const std::size_t body = at + 8;
    if (body + size > b.size()) throw FormatError("wav: chunk '" + id + "' runs past the end");
    if (id == "fmt ") {
      if (size < 16) throw FormatError("wav: short fmt chunk");
      if (le16(b, body) != 1) throw FormatError("wav: only PCM is supported");
      if (le16(b, body + 2) != 1) throw FormatError("wav: only mono is supported");
      if (le16(b, body + 14) != 16) throw FormatError("wav: only 16-bit samples are supported");
      rate = static_cast<int>(le32(b, body + 4));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("wav: data before fmt");
      if (size % 2 != 0) throw FormatError("wav: odd data size");
      WavAudio out;
      out.sample_rate = rate;
      out.samples.resize(size / 2);
      for (std::size_t i = 0; i < out.samples.size(); ++i) {
        out.samples[i] = static_cast<float>(static_cast<std::int16_t>(le16(b, body + 2 * i))) / 32768.0f;
      }
      return out;
    }
    at = body + size + (size & 1);
  }
  throw FormatError("wav: no data chunk");
}

WavAudio read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("wav: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_wav(ss.str());
}

std::string encode_wav(std::span<const float> samples, int sample_rate) {
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::string b = "RIFF";
  put32(b, 36 + data_bytes);
  b += "WAVEfmt ";
  put32(b, 16);
  put16(b, 1);
  put16(b, 1);
  put32(b, static_cast<std::uint32_t>(sample_rate));
  put32(b, static_cast<std::uint32_t>(sample_rate) * 2);
  put16(b, 2);
  put16(b, 16);
  b += "data";
  put32(b, data_bytes);
  for (float s : samples) {
    const double v = std::clamp(std::round(static_cast<double>(s) * 32768.0), -32768.0, 32767.0);
    put16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  return b;
}

void write_wav(const std::filesystem::path& path, std::span<const float> samples, int sample_rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("wav: cannot write " + path.string());
  const auto bytes = encode_wav(samples, sample_rate);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

MatrixX<double> mel_filterbank(const LogMelConfig& c) {
  if (c.n_fft < 2 || c.n_mels < 1 || !(c.f_max > c.f_min) || c.f_max > c.sample_rate / 2.0) {
    throw ConfigError("mel_filterbank: bad configuration");
  }
  const int bins = c.n_fft / 2 + 1;
  std::vector<double> edges(static_cast<std::size_t>(c.n_mels) + 2);
  const double lo = hz_to_mel(c.f_min), hi = hz_to_mel(c.f_max);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    edges[k] = mel_to_hz(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(c.n_mels + 1));
  }
  MatrixX<double> fb = MatrixX<double>::Zero(c.n_mels, bins);
  for (int m = 0; m < c.n_mels; ++m) {
    const double l = edges[static_cast<std::size_t>(m)], mid = edges[static_cast<std::size_t>(m) + 1],
                 r = edges[static_cast<std::size_t>(m) + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * c.sample_rate / c.n_fft;
      fb(m, k) = std::max(0.0, std::min((f - l) / (mid - l), (r - f) / (r - mid)));
    }
  }
  return fb;
}

MatrixX<double> extract_logmel(std::span<const float> samples, int sample_rate, const LogMelConfig& c) {
  if (sample_rate != c.sample_rate) {
    throw FormatError("logmel: sample rate " + std::to_string(sample_rate) + " Hz, expected " +
                      std::to_string(c.sample_rate));
  }
  const MatrixX<double> fb = mel_filterbank(c);
  const auto n = static_cast<long>(samples.size());
  const long frames = n < c.n_fft ? 0 : 1 + (n - c.n_fft) / c.hop;
  MatrixX<double> out(frames, c.n_mels);
  std::vector<double> window(static_cast<std::size_t>(c.n_fft));
  for (int i = 0; i < c.n_fft; ++i) window[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / c.n_fft);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> buf(static_cast<std::size_t>(c.n_fft));
  std::vector<std::complex<double>> spec;
  Eigen::VectorXd mag(c.n_fft / 2 + 1);
  for (long t = 0; t < frames; ++t) {
    for (int i = 0; i < c.n_fft; ++i) {
      buf[static_cast<std::size_t>(i)] = static_cast<double>(samples[static_cast<std::size_t>(t * c.hop + i)]) * window[static_cast<std::size_t>(i)];
    }
    fft.fwd(spec, buf);
    for (Index k = 0; k < mag.size(); ++k) mag(k) = std::abs(spec[static_cast<std::size_t>(k)]);
    out.row(t) = (fb * mag).array().max(c.floor).log().transpose();
  }
  return out;
}

}  // namespace bridgekit
