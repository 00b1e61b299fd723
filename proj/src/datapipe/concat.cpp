// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#include "bridgekit/datapipe/concat.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace bridgekit {

void ConcatPolicy::validate() const {
  if (enabled && !(t_max_upper > 0.0)) throw ConfigError("concat: t_max_upper must be positive");
}

void LongformSpec::validate() const {
  if (!(t_test > 0.0)) throw ConfigError("longform: t_test must be positive");
}

Utterance join_utterances(std::span<const Utterance* const> parts) {
  if (parts.empty()) throw ConfigError("join_utterances: nothing to join");
  if (parts.size() == 1) return *parts[0];
  const Utterance& first = *parts[0];
  Utterance out;
  out.record.source = first.record.source;
  Index rows = 0;
  for (const auto* p : parts) {
    if (p->frames.cols() != first.frames.cols()) throw DimensionError("join_utterances: frame widths differ");
    rows += p->frames.rows();
  }
  out.frames.resize(rows, first.frames.cols());
  Index at = 0;
  bool same_chapter = first.record.chapter_id.has_value();
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Utterance& p = *parts[k];
    if (k > 0) {
      out.record.id += "+";
      out.record.transcript += " ";
    }
    out.record.id += p.record.id;
    out.record.transcript += p.record.transcript;
    out.record.duration_seconds += p.record.duration_seconds;
    out.symbols.insert(out.symbols.end(), p.symbols.begin(), p.symbols.end());
    out.audio.insert(out.audio.end(), p.audio.begin(), p.audio.end());
    out.frames.middleRows(at, p.frames.rows()) = p.frames;
    at += p.frames.rows();
    same_chapter = same_chapter && p.record.chapter_id == first.record.chapter_id;
  }
  if (same_chapter) {
    out.record.chapter_id = first.record.chapter_id;
    out.record.order_in_chapter = first.record.order_in_chapter;
  }
  return out;
}

ConcatSample concat_up_to(std::span<const Utterance> pool, const Utterance& base, double limit_seconds,
                          const std::function<std::size_t()>& pick) {
  if (pool.empty()) throw ConfigError("random concat: empty pool");
  std::vector<const Utterance*> parts{&base};
  double total = base.record.duration_seconds;
  for (;;) {
    const std::size_t k = pick();
    if (k >= pool.size()) throw ConfigError("random concat: pick out of range");
    const double next = pool[k].record.duration_seconds;
    if (total + next > limit_seconds) break;
    total += next;
    parts.push_back(&pool[k]);
  }
  ConcatSample s;
  s.limit_seconds = limit_seconds;
  for (const auto* p : parts) s.part_ids.push_back(p->record.id);
  s.utterance = join_utterances(parts);
  return s;
}

double draw_concat_limit(const ConcatPolicy& policy, Rng& rng) {
  policy.validate();
  return std::uniform_real_distribution<double>(0.0, policy.t_max_upper)(rng);
}

ConcatSample random_concat_sample(std::span<const Utterance> pool, const Utterance& base, const ConcatPolicy& policy,
                                  Rng& rng) {
  if (!policy.enabled) {
    ConcatSample s;
    s.utterance = base;
    s.limit_seconds = base.record.duration_seconds;
    s.part_ids = {base.record.id};
    return s;
  }
  if (pool.empty()) throw ConfigError("random concat: empty pool");
  const double limit = draw_concat_limit(policy, rng);
  std::uniform_int_distribution<std::size_t> uniform(0, pool.size() - 1);
  return concat_up_to(pool, base, limit, [&] { return uniform(rng); });
}

std::vector<LongformGroup> build_longform_testset(std::span<const UtteranceRecord> records, const LongformSpec& spec) {
  spec.validate();
  std::vector<std::string> chapters;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!r.chapter_id || !r.order_in_chapter) {
      throw ConfigError("longform: record " + r.id + " has no chapter metadata");
    }
    auto [it, inserted] = members.try_emplace(*r.chapter_id);
    if (inserted) chapters.push_back(*r.chapter_id);
    it->second.push_back(i);
  }
  std::vector<LongformGroup> groups;
  for (const auto& chapter : chapters) {
    auto& idx = members[chapter];
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return *records[a].order_in_chapter < *records[b].order_in_chapter; });
    for (std::size_t k = 1; k < idx.size(); ++k) {
      if (*records[idx[k]].order_in_chapter == *records[idx[k - 1]].order_in_chapter) {
        throw ConfigError("longform: chapter " + chapter + " repeats order " +
                          std::to_string(*records[idx[k]].order_in_chapter));
      }
    }
    LongformGroup open{chapter, {}, 0.0};
    for (std::size_t i : idx) {
      const double d = records[i].duration_seconds;
      if (!open.members.empty() && open.duration_seconds + d > spec.t_test) {
        groups.push_back(std::move(open));
        open = LongformGroup{chapter, {}, 0.0};
      }
      open.members.push_back(i);
      open.duration_seconds += d;
    }
    if (!open.members.empty()) groups.push_back(std::move(open));
  }
  return groups;
}

std::vector<Utterance> join_longform_groups(std::span<const Utterance> utterances,
                                            const std::vector<LongformGroup>& groups) {
  std::vector<Utterance> out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    std::vector<const Utterance*> parts;
    for (std::size_t i : g.members) {
      if (i >= utterances.size()) throw ConfigError("longform: group member out of range");
      parts.push_back(&utterances[i]);
    }
    out.push_back(join_utterances(parts));
  }
  return out;
}

}  // namespace bridgekit
