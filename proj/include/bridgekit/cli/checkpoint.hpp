// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "bridgekit/numcore/serialize.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bridgekit {

/// Checkpoint container.
///
/// Layout: "BKCKPT01", u64 little-endian header length, a JSON header, then
/// the tensor blobs back to back. The header holds `meta` plus a "tensors"
/// index of {name, frozen, offset, length} with offsets relative to the
/// first blob. Serialization is canonical, so load followed by save gives
/// the same bytes.
struct Checkpoint {
  struct Entry {
    std::string name;
    bool frozen = false;
    Tensor<double> tensor;
  };

  nlohmann::json meta = nlohmann::json::object();
  std::vector<Entry> tensors;

  const Entry* find(const std::string& name) const;

  /// Appends every tensor a module visits, cast to double, with its frozen flag.
  template <typename Module>
  void capture(Module& module) {
    module.visit([&](const std::string& name, auto& t) {
      if (find(name)) throw FormatError("checkpoint: duplicate tensor " + name);
      tensors.push_back({name, t.frozen(), Tensor<double>(t.shape(), t.value().template cast<double>())});
    });
  }

  /// Copies stored values into a module by name. Entries flagged frozen
  /// freeze their target, so later gradient attachment throws FrozenError.
  /// Every module tensor must be present with the same shape.
  template <typename Module>
  void restore(Module& module) const {
    module.visit([&](const std::string& name, auto& t) {
      const Entry* e = find(name);
      if (!e) throw FormatError("checkpoint: missing tensor " + name);
      if (e->tensor.shape() != t.shape()) {
        throw FormatError("checkpoint: tensor " + name + " has shape " + shape_string(e->tensor.shape()) +
                          ", expected " + shape_string(t.shape()));
      }
      using S = typename std::decay_t<decltype(t)>::Matrix::Scalar;
      t.value() = e->tensor.value().template cast<S>();
      if (e->frozen) t.freeze();
    });
  }

  std::string to_bytes() const;
  static Checkpoint from_bytes(const std::string& bytes);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

/// Adapts a module whose visit() takes a name prefix (the toy encoder).
template <typename Module>
struct Prefixed {
  Module& module;
  std::string prefix;
  template <typename Visitor>
  void visit(Visitor&& v) {
    module.visit(prefix, v);
  }
};

inline constexpr char kCheckpointMagic[8] = {'B', 'K', 'C', 'K', 'P', 'T', '0', '1'};

/// FNV-1a over the names, shapes and payload bytes of the given tensors.
std::uint64_t hash_tensors(const std::vector<std::pair<std::string, const Tensor<double>*>>& tensors);

/// Hash of everything a module visits, in visit order.
template <typename Module>
std::uint64_t module_hash(Module& module) {
  std::vector<Tensor<double>> copies;
  std::vector<std::string> names;
  module.visit([&](const std::string& name, auto& t) {
    names.push_back(name);
    copies.emplace_back(t.shape(), t.value().template cast<double>());
  });
  std::vector<std::pair<std::string, const Tensor<double>*>> refs;
  for (std::size_t i = 0; i < names.size(); ++i) refs.emplace_back(names[i], &copies[i]);
  return hash_tensors(refs);
}

}  // namespace bridgekit
