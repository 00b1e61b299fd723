// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "bridgekit/numcore/tensor.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

namespace bridgekit {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat tensor blob: "BKTENSR1", u32 rank, rank x u64 dims, then the
/// row-major payload as little-endian f64. The frozen/requires-grad flags
/// are not part of the blob; containers carry them.
inline constexpr char kTensorMagic[8] = {'B', 'K', 'T', 'E', 'N', 'S', 'R', '1'};

void write_tensor(std::ostream& out, const Tensor<double>& tensor);
Tensor<double> read_tensor(std::istream& in);

std::string tensor_to_bytes(const Tensor<double>& tensor);
Tensor<double> tensor_from_bytes(const std::string& bytes);

void save_tensor(const std::filesystem::path& path, const Tensor<double>& tensor);
Tensor<double> load_tensor(const std::filesystem::path& path);

}  // namespace bridgekit
