// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#include "bridgekit/cli/experiment.hpp"

#include "bridgekit/datapipe/batching.hpp"
#include "bridgekit/numcore/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

namespace bridgekit {

namespace {

std::string split_id(const char* split, long i) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s-%05ld", split, i);
  return buf;
}

std::string decoder_key(const ExperimentConfig& c) {
  std::string key;
  const KeyValueConfig kv = c.to_kv();
  for (const auto& [k, v] : kv.values()) {
    const bool task_key = k == "task.vocab" || k == "task.seed" || k == "task.successors" || k == "task.sparse_mass";
    if (task_key || (k.rfind("decoder.", 0) == 0 && k != "decoder.cache")) key += k + "=" + v + ";";
  }
  return key;
}

void say(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

Datasets make_datasets(const ExperimentConfig& config, const SyntheticTask& task) {
  Rng rng(config.task.seed * 0x9E3779B97F4A7C15ull + 0x1234567ull);
  Datasets d;
  auto fill = [&](std::vector<Utterance>& out, long n, const char* split) {
    out.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
      out.push_back(generate_utterance(task.spec, task.grammar, task.encoder, rng, split_id(split, i)));
    }
  };
  fill(d.train, config.data.n_train, "train");
  fill(d.valid, config.data.n_valid, "valid");
  fill(d.test, config.data.n_test, "test");
  for (std::size_t i = 0; i < d.test.size(); ++i) {
    const long chapter = static_cast<long>(i) / config.data.chapter_size;
    d.test[i].record.chapter_id = split_id("chapter", chapter);
    d.test[i].record.order_in_chapter = static_cast<long>(i) % config.data.chapter_size;
  }
  return d;
}

ToyDecoder<double> obtain_decoder(const ExperimentConfig& config, const SyntheticTask& task, const Logger& log) {
  const std::string key = decoder_key(config);
  const auto& setup = config.decoder;
  if (!setup.cache.empty() && std::filesystem::exists(setup.cache)) {
    Checkpoint c = Checkpoint::load(setup.cache);
    if (c.meta.value("decoder_key", "") == key) {
      Rng unused(0);
      ToyDecoder<double> dec(setup.model, unused);
      c.restore(dec);
      dec.freeze();
      say(log, "decoder: loaded " + setup.cache);
      return dec;
    }
    say(log, "decoder: cache " + setup.cache + " was built for another setup; retraining");
  }

  Rng rng(setup.pretrain.seed);
  ToyDecoder<float> lm(setup.model, rng);
  Rng corpus_rng(setup.pretrain.seed + 1);
  std::uniform_int_distribution<int> length(1, setup.corpus_max_len);
  std::vector<std::vector<int>> corpus, held_out;
  for (long i = 0; i < setup.corpus_size; ++i) corpus.push_back(task.grammar.sample(length(corpus_rng), corpus_rng));
  for (int i = 0; i < 200; ++i) held_out.push_back(task.grammar.sample(length(corpus_rng), corpus_rng));
  say(log, "decoder: pretraining for " + std::to_string(setup.pretrain.steps) + " steps");
  pretrain_toy_lm(lm, corpus, setup.pretrain, [&](const LmPretrainLog& e) {
    say(log, "decoder: step " + std::to_string(e.step) + (e.prompted ? " prompted" : " plain") + " loss " +
                 fixed(e.loss, 4));
  });
  say(log, "decoder: held-out perplexity " + fixed(std::exp(lm_cross_entropy(lm, held_out)), 3) +
               " (uniform " + std::to_string(setup.model.vocab) + ")");
  ToyDecoder<double> dec = lm.cast<double>();
  dec.freeze();
  if (!setup.cache.empty()) {
    Checkpoint c;
    c.meta["decoder_key"] = key;
    c.capture(dec);
    c.save(setup.cache);
  }
  return dec;
}

SpeechModel::SpeechModel(const ExperimentConfig& c, ToyDecoder<float> dec)
    : config(c), task(c.task), decoder(std::move(dec)) {
  if (decoder.config().d_t != c.connector.d_t || decoder.config().vocab != c.task.vocab + 2) {
    throw ConfigError("model: decoder does not match the config (d_t or vocab)");
  }
  Rng rng(c.training.seed);
  connector = Connector<float>(c.connector, rng);
}

Var<float> SpeechModel::prefix(Tape<float>& tape, const MatrixX<double>& frames) {
  MatrixX<float> x = task.encoder.encode(frames).cast<float>();
  return connector.forward(tape, tape.constant(std::move(x)), tape.parameter(decoder.embedding()));
}

Var<float> SpeechModel::loss(Tape<float>& tape, const Utterance& u, TeacherForcedStats* stats) {
  return decoder.teacher_forced_loss(tape, prefix(tape, u.frames), u.symbols, stats);
}

Checkpoint SpeechModel::checkpoint(long step, double valid_accuracy) {
  Checkpoint c;
  c.meta["format"] = "bridgekit";
  c.meta["step"] = step;
  c.meta["valid_accuracy"] = valid_accuracy;
  c.meta["config"] = config.to_kv().values();
  c.capture(connector);
  Prefixed<ToyEncoder> enc{task.encoder, "encoder"};
  c.capture(enc);
  c.capture(decoder);
  return c;
}

SpeechModel SpeechModel::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.meta.value("format", "") != "bridgekit" || !ckpt.meta.contains("config")) {
    throw FormatError("checkpoint: not a model checkpoint");
  }
  KeyValueConfig kv;
  for (const auto& [k, v] : ckpt.meta["config"].items()) kv.set(k, v.get<std::string>());
  const ExperimentConfig config = ExperimentConfig::from(kv);
  Rng unused(0);
  ToyDecoder<float> dec(config.decoder.model, unused);
  ckpt.restore(dec);
  if (!dec.frozen()) throw FormatError("checkpoint: decoder tensors are not flagged frozen");
  SpeechModel model(config, std::move(dec));
  ckpt.restore(model.connector);
  Prefixed<ToyEncoder> enc{model.task.encoder, "encoder"};
  ckpt.restore(enc);
  return model;
}

ValidationStats validate_teacher_forced(SpeechModel& model, std::span<const Utterance> set) {
  std::vector<TeacherForcedStats> stats(set.size());
  parallel_for(set.size(), [&](std::size_t i) {
    Tape<float> tape;
    model.loss(tape, set[i], &stats[i]);
  });
  ValidationStats out;
  double total = 0.0;
  for (const auto& s : stats) {
    out.correct += s.correct;
    out.positions += s.positions;
    total += s.loss * static_cast<double>(s.positions);
  }
  out.loss = out.positions ? total / static_cast<double>(out.positions) : 0.0;
  return out;
}

TrainResult train_connector(SpeechModel& model, const Datasets& data, const Logger& log) {
  const auto& tc = model.config.training;
  if (data.train.empty() || data.valid.empty()) throw ConfigError("train: empty train or validation set");
  if (!tc.init_checkpoint.empty()) {
    Checkpoint::load(tc.init_checkpoint).restore(model.connector);
    say(log, "train: connector initialised from " + tc.init_checkpoint);
  }
  Adam<float> opt(ParameterList<float>::from(model.connector),
                  AdamConfig{tc.learning_rate, 0.9, 0.999, 1e-8, tc.warmup_steps});
  const auto& params = opt.parameters();
  BatchIterator batches(data.train.size(), static_cast<std::size_t>(tc.batch_size), tc.seed);
  Rng concat_rng(tc.seed ^ 0xC0FFEE0DDF00Dull);

  TrainResult result;
  bool have_best = false;
  auto validate = [&](TrainLogEntry& entry) {
    const auto v = validate_teacher_forced(model, data.valid);
    entry.valid_loss = v.loss;
    entry.valid_accuracy = v.accuracy();
    if (entry.step == 0) result.initial_accuracy = v.accuracy();
    if (!have_best || v.accuracy() > result.best_accuracy || tc.keep_last) {
      have_best = true;
      result.best = model.checkpoint(entry.step, v.accuracy());
      result.best_step = entry.step;
      result.best_accuracy = v.accuracy();
    }
    say(log, "train: step " + std::to_string(entry.step) + " valid loss " + fixed(v.loss, 4) + " accuracy " +
                 fixed(v.accuracy(), 4));
  };

  TrainLogEntry first;
  first.learning_rate = opt.learning_rate();
  validate(first);
  result.log.push_back(first);

  for (long step = 1; step <= tc.steps; ++step) {
    const auto idx = batches.next();
    std::vector<Utterance> joined;
    std::vector<const Utterance*> batch;
    if (model.config.concat.enabled) {
      joined.reserve(idx.size());
      for (std::size_t i : idx) {
        joined.push_back(random_concat_sample(data.train, data.train[i], model.config.concat, concat_rng).utterance);
      }
      for (const auto& u : joined) batch.push_back(&u);
    } else {
      for (std::size_t i : idx) batch.push_back(&data.train[i]);
    }
    std::vector<std::vector<MatrixX<float>>> grads(batch.size());
    std::vector<double> losses(batch.size()), targets(batch.size());
    parallel_for(batch.size(), [&](std::size_t b) {
      Tape<float> tape;
      auto loss = model.loss(tape, *batch[b]);
      tape.backward(loss);
      grads[b] = params.zeros();
      params.gather(tape, grads[b]);
      losses[b] = static_cast<double>(loss.value()(0, 0));
      targets[b] = static_cast<double>(batch[b]->symbols.size() + 1);
    });
    const double total = std::accumulate(targets.begin(), targets.end(), 0.0);
    auto sum = params.zeros();
    double mean = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto w = static_cast<float>(targets[b] / total);
      for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += w * grads[b][i];
      mean += losses[b] * targets[b] / total;
    }
    TrainLogEntry entry;
    entry.step = step;
    entry.train_loss = mean;
    entry.learning_rate = opt.learning_rate();
    if (!std::isfinite(mean)) {
      result.failure = "non-finite training loss at step " + std::to_string(step);
      result.log.push_back(entry);
      say(log, "train: " + result.failure);
      break;
    }
    opt.step(sum);
    if (step % tc.validate_every == 0 || step == tc.steps) validate(entry);
    result.log.push_back(entry);
  }
  return result;
}

std::string format_train_log(const std::vector<TrainLogEntry>& log) {
  auto opt = [](const std::optional<double>& v) {
    if (!v) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", *v);
    return std::string(buf);
  };
  std::string out = "step\ttrain_loss\tlr\tvalid_loss\tvalid_accuracy\n";
  for (const auto& e : log) {
    out += std::to_string(e.step) + "\t" + opt(e.train_loss) + "\t" + opt(e.learning_rate) + "\t" + opt(e.valid_loss) +
           "\t" + opt(e.valid_accuracy) + "\n";
  }
  return out;
}

std::string tokens_to_text(const std::vector<int>& tokens, int vocab) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i] >= 0 && tokens[i] < vocab ? symbol_word(tokens[i]) : "<unk>";
  }
  return out;
}

std::vector<DecodeOutcome> decode_all(SpeechModel& model, std::span<const Utterance> set) {
  const auto& e = model.config.eval;
  std::vector<DecodeOutcome> out(set.size());
  parallel_for(set.size(), [&](std::size_t i) {
    const Utterance& u = set[i];
    Tape<float> tape;
    const MatrixX<float> prefix = model.prefix(tape, u.frames).value();
    const auto budget =
        static_cast<Index>(std::ceil(e.tokens_per_second * u.record.duration_seconds)) + static_cast<Index>(e.extra_tokens);
    const auto r = model.decoder.greedy_decode(prefix, budget);
    out[i] = score_outcome(u.record.id, u.record.transcript, tokens_to_text(r.tokens, model.config.task.vocab),
                           u.record.duration_seconds, r.truncated);
  });
  return out;
}

}  // namespace bridgekit
