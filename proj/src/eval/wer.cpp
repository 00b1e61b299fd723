// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#include "bridgekit/eval/wer.hpp"

#include "bridgekit/numcore/tensor.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

namespace bridgekit {

double WerReport::wer_percent() const {
  return n_ref_words > 0 ? 100.0 * static_cast<double>(errors()) / static_cast<double>(n_ref_words) : 0.0;
}

double WerReport::del_percent() const {
  return n_ref_words > 0 ? 100.0 * static_cast<double>(deletions) / static_cast<double>(n_ref_words) : 0.0;
}

WerReport& WerReport::operator+=(const WerReport& o) {
  n_ref_words += o.n_ref_words;
  substitutions += o.substitutions;
  insertions += o.insertions;
  deletions += o.deletions;
  return *this;
}

std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string w;
  while (in >> w) {
    std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    words.push_back(std::move(w));
  }
  return words;
}

WerReport align_and_score(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  if (ref.empty()) throw ConfigError("align_and_score: empty reference");
  const std::size_t n = ref.size(), m = hyp.size();
  // Cell (i, j) aligns ref[:i] with hyp[:j]: least cost, then most
  // substitutions. For a given cost and lengths the substitution count fixes
  // I and D, so this is a total tie-break and symmetric in ref/hyp.
  struct Cell {
    long cost;
    long subs;
    bool better(const Cell& o) const { return cost < o.cost || (cost == o.cost && subs > o.subs); }
  };
  std::vector<Cell> row(m + 1), prev(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = {static_cast<long>(j), 0};
  for (std::size_t i = 1; i <= n; ++i) {
    row[0] = {static_cast<long>(i), 0};
    for (std::size_t j = 1; j <= m; ++j) {
      const bool differ = ref[i - 1] != hyp[j - 1];
      Cell best{prev[j - 1].cost + differ, prev[j - 1].subs + differ};
      const Cell ins{row[j - 1].cost + 1, row[j - 1].subs};
      const Cell del{prev[j].cost + 1, prev[j].subs};
      if (ins.better(best)) best = ins;
      if (del.better(best)) best = del;
      row[j] = best;
    }
    std::swap(row, prev);
  }
  const Cell& end = prev[m];
  WerReport r;
  r.n_ref_words = static_cast<long>(n);
  r.substitutions = end.subs;
  // I + D = cost - S and I - D = m - n
  const long gaps = end.cost - end.subs;
  const long diff = static_cast<long>(m) - static_cast<long>(n);
  r.insertions = (gaps + diff) / 2;
  r.deletions = (gaps - diff) / 2;
  return r;
}

WerReport align_and_score(const std::string& ref, const std::string& hyp) {
  return align_and_score(tokenize_words(ref), tokenize_words(hyp));
}

WerReport corpus_score(const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (pairs.empty()) throw ConfigError("corpus_score: no pairs");
  WerReport total;
  for (const auto& [ref, hyp] : pairs) total += align_and_score(ref, hyp);
  return total;
}

WerReport corpus_score(const std::vector<WerReport>& reports) {
  if (reports.empty()) throw ConfigError("corpus_score: no reports");
  WerReport total;
  for (const auto& r : reports) total += r;
  return total;
}

bool DecodeOutcome::success() const { return !truncated && report.del_percent() <= kSuccessMaxDelPercent; }

DecodeOutcome score_outcome(std::string id, std::string reference, std::string hypothesis, double duration_seconds,
                            bool truncated) {
  DecodeOutcome o;
  o.report = align_and_score(reference, hypothesis);
  o.id = std::move(id);
  o.reference = std::move(reference);
  o.hypothesis = std::move(hypothesis);
  o.duration_seconds = duration_seconds;
  o.truncated = truncated;
  return o;
}

std::vector<DurationBucket> duration_bucket_report(const std::vector<DecodeOutcome>& outcomes,
                                                   const std::vector<double>& edges) {
  if (edges.size() < 2) throw ConfigError("duration_bucket_report: need at least two edges");
  for (std::size_t k = 1; k < edges.size(); ++k) {
    if (!(edges[k] > edges[k - 1])) throw ConfigError("duration_bucket_report: edges must increase");
  }
  std::vector<DurationBucket> buckets(edges.size() - 1);
  for (std::size_t k = 0; k < buckets.size(); ++k) {
    buckets[k].lo = edges[k];
    buckets[k].hi = edges[k + 1];
  }
  for (const auto& o : outcomes) {
    const double d = o.duration_seconds;
    if (d <= edges.front() || d > edges.back()) continue;
    const auto k = static_cast<std::size_t>(std::lower_bound(edges.begin() + 1, edges.end(), d) - (edges.begin() + 1));
    auto& b = buckets[k];
    ++b.n_all;
    if (!b.all) b.all.emplace();
    *b.all += o.report;
    if (o.success()) {
      ++b.n_success;
      if (!b.successful) b.successful.emplace();
      *b.successful += o.report;
    }
  }
  return buckets;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string count_or_dash(long v) { return v < 0 ? "-" : std::to_string(v); }

std::string pad(const std::string& s, std::size_t w, bool right = true) {
  if (s.size() >= w) return s;
  return right ? std::string(w - s.size(), ' ') + s : s + std::string(w - s.size(), ' ');
}

nlohmann::json report_json(const WerReport& r) {
  return {{"n_ref_words", r.n_ref_words}, {"substitutions", r.substitutions}, {"insertions", r.insertions},
          {"deletions", r.deletions},     {"wer_percent", r.wer_percent()},   {"del_percent", r.del_percent()}};
}

}  // namespace

std::string format_results_table(const std::vector<ResultRow>& rows) {
  std::size_t w = 5;
  for (const auto& r : rows) w = std::max(w, r.label.size());
  std::ostringstream out;
  out << pad("point", w, false) << "  " << pad("#tokens", 8) << "  " << pad("#params", 10) << "  " << pad("%WER", 8)
      << "  " << pad("%Del", 8) << "\n";
  for (const auto& r : rows) {
    out << pad(r.label, w, false) << "  " << pad(count_or_dash(r.tokens), 8) << "  " << pad(count_or_dash(r.params), 10)
        << "  " << pad(fmt("%.2f", r.report.wer_percent()), 8) << "  " << pad(fmt("%.2f", r.report.del_percent()), 8)
        << "\n";
  }
  return out.str();
}

std::string format_bucket_table(const std::vector<DurationBucket>& buckets) {
  std::ostringstream out;
  out << pad("duration", 16, false) << "  " << pad("n", 5) << "  " << pad("%WER all", 9) << "  " << pad("n ok", 5)
      << "  " << pad("%WER ok", 9) << "\n";
  for (const auto& b : buckets) {
    const std::string range = "(" + fmt("%g", b.lo) + ", " + fmt("%g", b.hi) + "]";
    out << pad(range, 16, false) << "  " << pad(std::to_string(b.n_all), 5) << "  "
        << pad(b.all ? fmt("%.2f", b.all->wer_percent()) : "absent", 9) << "  " << pad(std::to_string(b.n_success), 5)
        << "  " << pad(b.successful ? fmt("%.2f", b.successful->wer_percent()) : "absent", 9) << "\n";
  }
  out << "success: %Del <= " << fmt("%g", kSuccessMaxDelPercent) << " and not truncated\n";
  return out.str();
}

std::string results_json(const std::vector<ResultRow>& rows, const std::vector<DurationBucket>& buckets) {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row = report_json(r.report);
    row["label"] = r.label;
    row["tokens"] = r.tokens < 0 ? nlohmann::json(nullptr) : nlohmann::json(r.tokens);
    row["params"] = r.params < 0 ? nlohmann::json(nullptr) : nlohmann::json(r.params);
    j["rows"].push_back(row);
  }
  j["success_rule"] = {{"max_del_percent", kSuccessMaxDelPercent}, {"truncated_fails", true}};
  j["buckets"] = nlohmann::json::array();
  for (const auto& b : buckets) {
    j["buckets"].push_back({{"lo", b.lo},
                            {"hi", b.hi},
                            {"n_all", b.n_all},
                            {"n_success", b.n_success},
                            {"all", b.all ? report_json(*b.all) : nlohmann::json(nullptr)},
                            {"successful", b.successful ? report_json(*b.successful) : nlohmann::json(nullptr)}});
  }
  return j.dump(2) + "\n";
}

}  // namespace bridgekit
