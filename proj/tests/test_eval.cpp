// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#include "bridgekit/eval/wer.hpp"
#include "bridgekit/numcore/tensor.hpp"

#include "doctest.h"
#include "json.hpp"

#include <algorithm>
#include <random>

using namespace bridgekit;
using Words = std::vector<std::string>;

namespace {

// Minimum edit cost by trying every alignment move at every position.
long brute_force_cost(const Words& r, std::size_t i, const Words& h, std::size_t j) {
  if (i == r.size()) return static_cast<long>(h.size() - j);
  if (j == h.size()) return static_cast<long>(r.size() - i);
  const long sub = (r[i] == h[j] ? 0 : 1) + brute_force_cost(r, i + 1, h, j + 1);
  const long ins = 1 + brute_force_cost(r, i, h, j + 1);
  const long del = 1 + brute_force_cost(r, i + 1, h, j);
  return std::min({sub, ins, del});
}

std::vector<Words> all_sequences(int max_len) {
  std::vector<Words> out{{}};
  std::vector<Words> frontier{{}};
  for (int len = 1; len <= max_len; ++len) {
    std::vector<Words> next;
    for (const auto& w : frontier) {
      for (const char* s : {"a", "b", "c"}) {
        auto v = w;
        v.push_back(s);
        next.push_back(v);
      }
    }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

}  // namespace

TEST_CASE("align_and_score examples") {
  auto same = align_and_score("a b c", "a b c");
  CHECK(same.errors() == 0);
  CHECK(same.wer_percent() == 0.0);

  auto del = align_and_score("a b c", "a c");
  CHECK(del.deletions == 1);
  CHECK(del.substitutions == 0);
  CHECK(del.insertions == 0);
  CHECK(del.wer_percent() == doctest::Approx(33.333333333333336));
  CHECK(del.del_percent() == doctest::Approx(33.333333333333336));

  auto over = align_and_score("a", "b c");
  CHECK(over.substitutions == 1);
  CHECK(over.insertions == 1);
  CHECK(over.deletions == 0);
  CHECK(over.wer_percent() == doctest::Approx(200.0));

  CHECK(align_and_score("A  b\tC", "a B c").errors() == 0);
  CHECK_THROWS_AS(align_and_score("", "a"), ConfigError);
  CHECK_THROWS_AS(align_and_score("  ", ""), ConfigError);
  CHECK(align_and_score("a b", "").deletions == 2);
}

TEST_CASE("tie-breaking prefers substitution, then insertion, then deletion") {
  // "a b" vs "b a": S+S and D+I (or I+D) all cost 2.
  auto r = align_and_score("a b", "b a");
  CHECK(r.substitutions == 2);
  CHECK(r.insertions == 0);
  CHECK(r.deletions == 0);
  // "a b c" vs "b c d": 2 edits either way (S,S,S costs 3 and loses).
  auto q = align_and_score("a b c", "b c d");
  CHECK(q.errors() == 2);
  CHECK(q.insertions == 1);
  CHECK(q.deletions == 1);
}

TEST_CASE("exhaustive agreement with brute-force alignment") {
  const auto seqs = all_sequences(4);
  REQUIRE(seqs.size() == 121);
  long pairs = 0;
  for (const auto& r : seqs) {
    if (r.empty()) continue;
    for (const auto& h : seqs) {
      const auto rep = align_and_score(r, h);
      const long cost = brute_force_cost(r, 0, h, 0);
      CHECK(rep.errors() == cost);
      // the split must describe a real alignment
      CHECK(static_cast<long>(r.size()) - rep.deletions + rep.insertions == static_cast<long>(h.size()));
      CHECK(rep.substitutions + rep.deletions <= static_cast<long>(r.size()));
      ++pairs;
    }
  }
  CHECK(pairs == 120 * 121);
}

TEST_CASE("swapping reference and hypothesis swaps insertions and deletions") {
  const auto seqs = all_sequences(4);
  for (const auto& r : seqs) {
    if (r.empty()) continue;
    for (const auto& h : seqs) {
      if (h.empty()) continue;
      const auto ab = align_and_score(r, h);
      const auto ba = align_and_score(h, r);
      CHECK(ab.errors() == ba.errors());
      CHECK(ab.substitutions == ba.substitutions);
      CHECK(ab.insertions == ba.deletions);
      CHECK(ab.deletions == ba.insertions);
      CHECK((ab.errors() == 0) == (r == h));
    }
  }
}

TEST_CASE("corpus_score pools counts") {
  CHECK(corpus_score({{"a b c", "a c"}}) == align_and_score("a b c", "a c"));

  std::string long_ref, long_hyp;
  for (int i = 0; i < 99; ++i) {
    long_ref += "w ";
    long_hyp += i == 0 ? "x " : "w ";
  }
  auto pooled = corpus_score({{"a", "b"}, {long_ref, long_hyp}});
  CHECK(pooled.n_ref_words == 100);
  CHECK(pooled.wer_percent() == doctest::Approx(2.0));
  CHECK_THROWS_AS(corpus_score(std::vector<std::pair<std::string, std::string>>{}), ConfigError);

  std::vector<std::pair<std::string, std::string>> pairs{
      {"a b c", "a c"}, {"a", "b c"}, {"c c a b", "c a b b"}, {"b", "b"}, {"a b", ""}};
  const auto base = corpus_score(pairs);
  std::mt19937 rng(4);
  for (int t = 0; t < 20; ++t) {
    std::shuffle(pairs.begin(), pairs.end(), rng);
    CHECK(corpus_score(pairs) == base);
  }
}

TEST_CASE("duration buckets") {
  std::vector<DecodeOutcome> outcomes{
      score_outcome("u1", "a b c d", "a b c d", 5.0, false),
      score_outcome("u2", "a b c d", "a b d d", 8.0, false),
  };
  const std::vector<double> edges{0, 10, 30, 60};
  SUBCASE("all successful gives identical curves") {
    auto b = duration_bucket_report(outcomes, edges);
    REQUIRE(b.size() == 3);
    CHECK(b[0].all == b[0].successful);
    CHECK(b[0].n_all == 2);
    CHECK(b[0].all->wer_percent() == doctest::Approx(12.5));
    CHECK_FALSE(b[1].all.has_value());
    CHECK_FALSE(b[2].successful.has_value());
  }
  SUBCASE("a catastrophic decode lifts only the all curve") {
    outcomes.push_back(score_outcome("u3", "a b c d e f", "", 60.0, false));
    outcomes.push_back(score_outcome("u4", "a b c d", "a b c d", 45.0, false));
    CHECK_FALSE(outcomes[2].success());
    auto b = duration_bucket_report(outcomes, edges);
    REQUIRE(b[2].all.has_value());
    CHECK(b[2].all->wer_percent() == doctest::Approx(60.0));
    CHECK(b[2].successful->wer_percent() == 0.0);
    CHECK(b[2].all->wer_percent() > b[2].successful->wer_percent());
    CHECK(b[2].n_success == 1);
  }
  SUBCASE("success rule") {
    CHECK(score_outcome("x", "a b", "a", 1.0, false).success());       // 50% deletions
    CHECK_FALSE(score_outcome("x", "a b c", "a", 1.0, false).success());
    CHECK_FALSE(score_outcome("x", "a b", "a b", 1.0, true).success());  // truncated
  }
  CHECK_THROWS_AS(duration_bucket_report(outcomes, {1.0}), ConfigError);
  CHECK_THROWS_AS(duration_bucket_report(outcomes, {1.0, 1.0}), ConfigError);
}

TEST_CASE("reports") {
  std::vector<ResultRow> rows{{"qf", 16, 1234, align_and_score("a b c", "a c")}, {"fc", -1, -1, {}}};
  const auto table = format_results_table(rows);
  CHECK(table.find("33.33") != std::string::npos);
  CHECK(table.find("#tokens") != std::string::npos);
  auto buckets = duration_bucket_report({score_outcome("u", "a", "a", 3.0, false)}, {0, 10, 20});
  const auto bt = format_bucket_table(buckets);
  CHECK(bt.find("absent") != std::string::npos);
  auto j = nlohmann::json::parse(results_json(rows, buckets));
  CHECK(j["rows"][0]["deletions"] == 1);
  CHECK(j["rows"][0]["tokens"] == 16);
  CHECK(j["rows"][1]["tokens"].is_null());
  CHECK(j["buckets"][1]["all"].is_null());
  CHECK(j["success_rule"]["max_del_percent"] == 50.0);
}
