// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#include "bridgekit/connectors/connectors.hpp"

#include <algorithm>
#include <cctype>

namespace bridgekit {

std::string to_string(ConnectorKind kind) {
  switch (kind) {
    case ConnectorKind::FC: return "FC";
    case ConnectorKind::CA: return "CA";
    case ConnectorKind::QF: return "QF";
    case ConnectorKind::SegQF: return "SegQF";
  }
  return "?";
}

ConnectorKind parse_connector_kind(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "fc") return ConnectorKind::FC;
  if (lower == "ca") return ConnectorKind::CA;
  if (lower == "qf") return ConnectorKind::QF;
  if (lower == "segqf" || lower == "seg-qf" || lower == "seg_qf") return ConnectorKind::SegQF;
  throw ConfigError("unknown connector kind '" + name + "'");
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("connector config: " + what);
}

std::int64_t linear(std::int64_t in, std::int64_t out) { return in * out + out; }

std::int64_t attention(std::int64_t query, std::int64_t kv, std::int64_t model) {
  return linear(query, model) + kv * model + linear(kv, model) + linear(model, model);
}

}  // namespace

void ConnectorConfig::validate() const {
  require(d_x >= 1 && d_t >= 1, "d_x and d_t must be >= 1");
  switch (kind) {
    case ConnectorKind::FC:
      require(m >= 1, "m must be >= 1");
      require(fc_hidden >= 1, "FC hidden width must be >= 1");
      break;
    case ConnectorKind::CA:
      require(s >= 1, "s must be >= 1");
      require(ca_heads >= 1 && d_t % ca_heads == 0, "CA heads must divide d_t");
      break;
    case ConnectorKind::SegQF:
      require(segment_len >= 1, "segment_len must be >= 1");
      [[fallthrough]];
    case ConnectorKind::QF:
      require(n_q >= 1, "n_q must be >= 1");
      require(d_q >= 0, "d_q must be >= 0");
      require(n_blocks >= 1, "n_blocks must be >= 1");
      require(n_heads >= 1 && query_width() % n_heads == 0, "n_heads must divide d_q");
      break;
  }
}

std::int64_t param_count(const ConnectorConfig& c) {
  c.validate();
  switch (c.kind) {
    case ConnectorKind::FC:
      return linear(c.m * c.d_x, c.fc_hidden) + linear(c.fc_hidden, c.d_t);
    case ConnectorKind::CA:
      return c.d_x * c.d_x * c.s + c.d_x + linear(c.d_x, c.d_t) + attention(c.d_t, c.d_t, c.d_t);
    case ConnectorKind::QF:
    case ConnectorKind::SegQF: {
      const std::int64_t d = c.query_width();
      const std::int64_t block =
          3 * 2 * d + attention(d, d, d) + attention(d, c.d_x, d) + linear(d, 4 * d) + linear(4 * d, d);
      return c.n_q * d + c.n_blocks * block + linear(d, c.d_t);
    }
  }
  return 0;
}

}  // namespace bridgekit
