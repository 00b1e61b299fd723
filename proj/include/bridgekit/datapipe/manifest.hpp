// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "bridgekit/datapipe/record.hpp"

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace bridgekit {

/// Manifest: UTF-8 text, one record per line, tab-separated
///   id  source  duration  transcript  chapter  order
/// The last two columns may be empty or omitted. Lines starting with '#'
/// and blank lines are skipped. Malformed lines throw ConfigError naming
/// the line number.
std::vector<UtteranceRecord> parse_manifest(std::istream& in);
std::vector<UtteranceRecord> read_manifest(const std::filesystem::path& path);

void write_manifest(std::ostream& out, const std::vector<UtteranceRecord>& records);
void write_manifest(const std::filesystem::path& path, const std::vector<UtteranceRecord>& records);

/// Feature cache: one tensor file per utterance id under `dir`.
std::filesystem::path feature_cache_path(const std::filesystem::path& dir, const std::string& id);
void save_features(const std::filesystem::path& dir, const std::string& id, const MatrixX<double>& frames);
MatrixX<double> load_features(const std::filesystem::path& dir, const std::string& id);

}  // namespace bridgekit
