// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "bridgekit/cli/experiment.hpp"
#include "bridgekit/numcore/gradcheck.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace bridgekit {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitRuntime = 2, kExitGradcheck = 3 };

// ---- gradcheck ----

struct GradcheckCase {
  std::string name;
  std::function<GradcheckReport(std::uint64_t seed)> run;
};

/// FC, CA, QF and SegQF at d_x = 8, n_q = 3, n_x = 11, and the decoder
/// loss head (teacher-forced loss w.r.t. the prefix and decoder weights).
std::vector<GradcheckCase> default_gradcheck_cases();

struct GradcheckLine {
  std::string name;
  std::uint64_t seed = 0;
  double max_rel_error = 0.0;
  std::string worst_block;
};

struct GradcheckSummary {
  std::vector<GradcheckLine> lines;
  double tolerance = 1e-4;
  double seconds = 0.0;
  bool passed() const;
  std::string format() const;
};

GradcheckSummary run_gradchecks(const std::vector<GradcheckCase>& cases, const std::vector<std::uint64_t>& seeds,
                                double tolerance = 1e-4);

// ---- train / eval ----

struct TrainRun {
  TrainResult result;
  std::filesystem::path checkpoint;
};

/// Trains one connector and writes best.ckpt, train_log.tsv and config.txt
/// under config.out_dir. The best checkpoint is written even when training
/// stops on a non-finite loss.
TrainRun run_training(const ExperimentConfig& config, const ToyDecoder<double>& decoder, const Datasets& data,
                      const Logger& log = {});

struct EvalSummary {
  std::string label;
  WerReport total;
  std::vector<DecodeOutcome> outcomes;
  std::vector<DurationBucket> buckets;
  long tokens = -1;  // speech tokens for one full encoder window
  long params = -1;  // trainable connector parameters
  ResultRow row() const { return {label, tokens, params, total}; }
};

/// Decodes `set`, pools the scores and buckets them by duration. With
/// `out_dir` set, writes <stem>.txt, <stem>.json and <stem>.hyp.tsv there.
EvalSummary evaluate_model(SpeechModel& model, std::span<const Utterance> set, const std::string& label,
                           const std::optional<std::filesystem::path>& out_dir = {}, const std::string& stem = "eval");

/// Concatenates a chaptered set into long-form utterances of up to t_test seconds.
std::vector<Utterance> longform_set(std::span<const Utterance> set, double t_test);

/// Reads a manifest and the features next to it (<manifest dir>/features/<id>.bkt),
/// falling back to log-mel extraction for WAV sources.
std::vector<Utterance> load_manifest_utterances(const std::filesystem::path& manifest, int vocab);

// ---- command entry points (return an exit code; errors go to `err`) ----

struct CommandContext {
  std::ostream* out;
  std::ostream* err;
  Logger log;
};

int cmd_train(const std::filesystem::path& config, const std::vector<std::string>& overrides, const CommandContext& ctx);
int cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
             std::optional<double> longform, const std::optional<std::filesystem::path>& out_dir,
             const CommandContext& ctx);
/// `axis` is "key=v1,v2,..." over any config key (connector.kind, connector.n_q,
/// connector.segment_len, ...).
int cmd_sweep(const std::filesystem::path& config, const std::string& axis, const std::vector<std::string>& overrides,
              const CommandContext& ctx);
int cmd_gradcheck(const std::vector<std::uint64_t>& seeds, const CommandContext& ctx);
/// Writes train/valid/test manifests and feature files for the synthetic task.
int cmd_make_data(const std::filesystem::path& spec, const std::vector<std::string>& overrides,
                  const CommandContext& ctx);

}  // namespace bridgekit
