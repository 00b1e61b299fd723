// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include "bridgekit/cli/checkpoint.hpp"
#include "bridgekit/cli/config.hpp"
#include "bridgekit/eval/wer.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bridgekit {

using Logger = std::function<void(const std::string&)>;

struct Datasets {
  std::vector<Utterance> train;
  std::vector<Utterance> valid;
  std::vector<Utterance> test;  // carries chapter ids for long-form packing
};

/// Seeded from task.seed; the same config always gives the same data.
Datasets make_datasets(const ExperimentConfig& config, const SyntheticTask& task);

/// Pretrains the toy LM on grammar samples and freezes it. With
/// decoder.cache set, a cached decoder with a matching setup is reused and
/// a fresh one is written back.
ToyDecoder<double> obtain_decoder(const ExperimentConfig& config, const SyntheticTask& task, const Logger& log = {});

/// Connector plus the frozen encoder and decoder it is trained against.
/// Training and inference run in single precision.
struct SpeechModel {
  ExperimentConfig config;
  SyntheticTask task;
  ToyDecoder<float> decoder;
  Connector<float> connector;

  /// Fresh connector drawn from training.seed.
  SpeechModel(const ExperimentConfig& config, ToyDecoder<float> decoder);

  /// Speech tokens for raw frames (encoded and padded here).
  Var<float> prefix(Tape<float>& tape, const MatrixX<double>& frames);
  Var<float> loss(Tape<float>& tape, const Utterance& u, TeacherForcedStats* stats = nullptr);

  /// connector.*, encoder.* and decoder.* tensors with the config snapshot.
  Checkpoint checkpoint(long step, double valid_accuracy);
  /// Rebuilds a model; the stored encoder and decoder stay frozen.
  static SpeechModel from_checkpoint(const Checkpoint& ckpt);
};

struct ValidationStats {
  long correct = 0;
  long positions = 0;
  double loss = 0.0;  // per target
  double accuracy() const { return positions ? static_cast<double>(correct) / static_cast<double>(positions) : 0.0; }
};

/// Teacher-forced next-token accuracy, pooled over `set`.
ValidationStats validate_teacher_forced(SpeechModel& model, std::span<const Utterance> set);

/// Step 0 holds only the validation before any update.
struct TrainLogEntry {
  long step = 0;
  std::optional<double> train_loss;
  double learning_rate = 0.0;
  std::optional<double> valid_loss;
  std::optional<double> valid_accuracy;
};

struct TrainResult {
  Checkpoint best;
  long best_step = 0;
  double best_accuracy = 0.0;
  double initial_accuracy = 0.0;
  std::vector<TrainLogEntry> log;
  std::string failure;  // non-empty when training stopped early
};

/// Trains the connector only. Validation runs at step 0, every
/// validate_every updates and after the last one; the checkpoint with the
/// strictly highest accuracy is kept (the last one with training.keep_last).
/// A non-finite loss stops training with `failure` set and the best
/// checkpoint so far retained.
TrainResult train_connector(SpeechModel& model, const Datasets& data, const Logger& log = {});

std::string format_train_log(const std::vector<TrainLogEntry>& log);

/// Greedy decoding of every utterance. The decode budget is
/// ceil(tokens_per_second * duration) + extra_tokens.
std::vector<DecodeOutcome> decode_all(SpeechModel& model, std::span<const Utterance> set);

/// Token ids to words; ids outside the symbol range become "<unk>".
std::string tokens_to_text(const std::vector<int>& tokens, int vocab);

}  // namespace bridgekit
