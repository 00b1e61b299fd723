// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#include "bridgekit/numcore/serialize.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace bridgekit {
namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits = std::bit_cast<U>(value);
  std::array<char, sizeof(T)> buf{};
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(buf.data(), buf.size());
}

template <typename T>
T get_le(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  std::array<unsigned char, sizeof(T)> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!in) throw FormatError("tensor blob truncated");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(buf[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor<double>& tensor) {
  out.write(kTensorMagic, sizeof(kTensorMagic));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
  for (Index d : tensor.shape()) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
  const auto& m = tensor.value();
  for (Index i = 0; i < m.size(); ++i) put_le<double>(out, m.data()[i]);
  if (!out) throw FormatError("failed writing tensor blob");
}

Tensor<double> read_tensor(std::istream& in) {
  char magic[sizeof(kTensorMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kTensorMagic, sizeof(magic)) != 0) throw FormatError("bad tensor magic");
  const auto rank = get_le<std::uint32_t>(in);
  if (rank == 0 || rank > 8) throw FormatError("bad tensor rank " + std::to_string(rank));
  Shape shape;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const auto d = get_le<std::uint64_t>(in);
    if (d == 0 || d > (1ull << 32)) throw FormatError("bad tensor dimension");
    shape.push_back(static_cast<Index>(d));
  }
  Tensor<double> t(shape);
  auto& m = t.value();
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = get_le<double>(in);
  return t;
}

std::string tensor_to_bytes(const Tensor<double>& tensor) {
  std::ostringstream out(std::ios::binary);
  write_tensor(out, tensor);
  return std::move(out).str();
}

Tensor<double> tensor_from_bytes(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_tensor(in);
}

void save_tensor(const std::filesystem::path& path, const Tensor<double>& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_tensor(out, tensor);
}

Tensor<double> load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_tensor(in);
}

}  // namespace bridgekit
