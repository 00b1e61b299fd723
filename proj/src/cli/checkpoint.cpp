// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#include "bridgekit/cli/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace bridgekit {

const Checkpoint::Entry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : tensors) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::string Checkpoint::to_bytes() const {
  if (meta.contains("tensors")) throw FormatError("checkpoint: meta may not use the key 'tensors'");
  nlohmann::json header = meta;
  header["tensors"] = nlohmann::json::array();
  std::string blobs;
  for (const auto& e : tensors) {
    const std::string b = tensor_to_bytes(e.tensor);
    header["tensors"].push_back({{"name", e.name}, {"frozen", e.frozen}, {"offset", blobs.size()}, {"length", b.size()}});
    blobs += b;
  }
  const std::string text = header.dump();
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  std::uint64_t n = text.size();
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((n >> (8 * k)) & 0xff));
  out += text;
  out += blobs;
  return out;
}

Checkpoint Checkpoint::from_bytes(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw FormatError("checkpoint: bad magic");
  }
  std::uint64_t n = 0;
  for (int k = 7; k >= 0; --k) n = (n << 8) | static_cast<unsigned char>(bytes[8 + static_cast<std::size_t>(k)]);
  if (n > bytes.size() - 16) throw FormatError("checkpoint: header runs past the end");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, n));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: bad header: ") + e.what());
  }
  if (!header.is_object() || !header.contains("tensors") || !header["tensors"].is_array()) {
    throw FormatError("checkpoint: header has no tensor index");
  }
  const std::size_t base = 16 + n;
  Checkpoint c;
  std::size_t expected = 0;
  try {
    for (const auto& t : header["tensors"]) {
      const std::size_t offset = t.at("offset").get<std::size_t>();
      const std::size_t length = t.at("length").get<std::size_t>();
      if (offset != expected || base + offset + length > bytes.size()) throw FormatError("checkpoint: bad tensor index");
      expected += length;
      c.tensors.push_back({t.at("name").get<std::string>(), t.at("frozen").get<bool>(),
                           tensor_from_bytes(bytes.substr(base + offset, length))});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: bad tensor index: ") + e.what());
  }
  if (base + expected != bytes.size()) throw FormatError("checkpoint: trailing bytes");
  header.erase("tensors");
  c.meta = std::move(header);
  return c;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::string bytes = to_bytes();
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_bytes(ss.str());
}

std::uint64_t hash_tensors(const std::vector<std::pair<std::string, const Tensor<double>*>>& tensors) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& [name, t] : tensors) {
    mix(name.data(), name.size());
    for (Index d : t->shape()) mix(&d, sizeof d);
    mix(t->value().data(), static_cast<std::size_t>(t->size()) * sizeof(double));
  }
  return h;
}

}  // namespace bridgekit
