// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#include "bridgekit/datapipe/manifest.hpp"

#include "bridgekit/numcore/serialize.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace bridgekit {

void validate_record(const UtteranceRecord& r) {
  if (!(r.duration_seconds > 0.0) || !std::isfinite(r.duration_seconds)) {
    throw ConfigError("record " + r.id + ": duration must be positive");
  }
  if (r.transcript.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ConfigError("record " + r.id + ": empty transcript");
  }
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string format_double(double v) {
  // shortest text that reads back to the same double
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::vector<UtteranceRecord> parse_manifest(std::istream& in) {
  std::vector<UtteranceRecord> records;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto where = [&] { return "manifest line " + std::to_string(lineno) + ": "; };
    auto cols = split_tabs(line);
    if (cols.size() < 4 || cols.size() > 6) throw ConfigError(where() + "expected 4 to 6 tab-separated columns");
    UtteranceRecord r;
    r.id = cols[0];
    r.source = cols[1];
    if (r.id.empty()) throw ConfigError(where() + "empty id");
    const auto& d = cols[2];
    auto res = std::from_chars(d.data(), d.data() + d.size(), r.duration_seconds);
    if (res.ec != std::errc() || res.ptr != d.data() + d.size()) throw ConfigError(where() + "bad duration '" + d + "'");
    r.transcript = cols[3];
    if (cols.size() > 4 && !cols[4].empty()) r.chapter_id = cols[4];
    if (cols.size() > 5 && !cols[5].empty()) {
      long order = 0;
      const auto& o = cols[5];
      auto ro = std::from_chars(o.data(), o.data() + o.size(), order);
      if (ro.ec != std::errc() || ro.ptr != o.data() + o.size()) throw ConfigError(where() + "bad order '" + o + "'");
      r.order_in_chapter = order;
    }
    try {
      validate_record(r);
    } catch (const ConfigError& e) {
      throw ConfigError(where() + e.what());
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<UtteranceRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  return parse_manifest(in);
}

void write_manifest(std::ostream& out, const std::vector<UtteranceRecord>& records) {
  out << "# id\tsource\tduration\ttranscript\tchapter\torder\n";
  for (const auto& r : records) {
    validate_record(r);
    for (const auto* field : {&r.id, &r.source, &r.transcript}) {
      if (field->find_first_of("\t\n") != std::string::npos) {
        throw ConfigError("record " + r.id + ": tabs and newlines cannot be written to a manifest");
      }
    }
    out << r.id << '\t' << r.source << '\t' << format_double(r.duration_seconds) << '\t' << r.transcript << '\t'
        << r.chapter_id.value_or("") << '\t' << (r.order_in_chapter ? std::to_string(*r.order_in_chapter) : "")
        << '\n';
  }
}

void write_manifest(const std::filesystem::path& path, const std::vector<UtteranceRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  write_manifest(out, records);
}

std::filesystem::path feature_cache_path(const std::filesystem::path& dir, const std::string& id) {
  if (id.empty() || id.find('/') != std::string::npos || id == "." || id == "..") {
    throw ConfigError("feature cache: unusable id '" + id + "'");
  }
  return dir / (id + ".bkt");
}

void save_features(const std::filesystem::path& dir, const std::string& id, const MatrixX<double>& frames) {
  std::filesystem::create_directories(dir);
  save_tensor(feature_cache_path(dir, id), Tensor<double>(frames));
}

MatrixX<double> load_features(const std::filesystem::path& dir, const std::string& id) {
  return load_tensor(feature_cache_path(dir, id)).value();
}

}  // namespace bridgekit
