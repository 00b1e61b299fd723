// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#include "bridgekit/cli/commands.hpp"

#include "bridgekit/datapipe/audio.hpp"
#include "bridgekit/datapipe/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace bridgekit {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

ConnectorConfig gradcheck_connector(ConnectorKind kind) {
  ConnectorConfig c;
  c.kind = kind;
  c.d_x = 8;
  c.d_t = 8;
  c.m = 3;
  c.fc_hidden = 6;
  c.s = 3;
  c.ca_heads = 2;
  c.n_q = 3;
  c.n_heads = 2;
  c.segment_len = 4;
  return c;
}

GradcheckReport check_connector(ConnectorKind kind, std::uint64_t seed) {
  Rng rng(seed);
  Connector<double> con(gradcheck_connector(kind), rng);
  // unit-scale queries keep the query self-attention gradients well above
  // finite-difference roundoff
  con.redraw_queries(rng, 1.0);
  Tensor<double> x(gaussian<double>(11, 8, 1.0, rng));
  x.set_requires_grad(true);
  Tensor<double> embed(gaussian<double>(5, 8, 1.0, rng));
  embed.freeze();
  std::vector<NamedTensor> inputs;
  con.visit([&](const std::string& name, Tensor<double>& t) { inputs.push_back({name, &t}); });
  inputs.push_back({"x", &x});
  return gradcheck([&](Tape<double>& t) { return con.forward(t, t.parameter(x), t.parameter(embed)); }, inputs);
}

GradcheckReport check_loss_head(std::uint64_t seed) {
  Rng rng(seed);
  ToyDecoderConfig c;
  c.vocab = 7;
  c.d_t = 8;
  c.heads = 2;
  c.ffn = 12;
  c.max_context = 32;
  ToyDecoder<double> dec(c, rng);
  Tensor<double> prefix(gaussian<double>(3, 8, 1.0, rng));
  prefix.set_requires_grad(true);
  std::vector<NamedTensor> inputs;
  dec.visit([&](const std::string& name, Tensor<double>& t) {
    if (t.requires_grad()) inputs.push_back({name, &t});
  });
  inputs.push_back({"prefix", &prefix});
  const std::vector<int> transcript{1, 4, 2, 2};
  return gradcheck([&](Tape<double>& t) { return dec.teacher_forced_loss(t, t.parameter(prefix), transcript); }, inputs);
}

std::string fmt_e(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::string fmt_f(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

KeyValueConfig load_with_overrides(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  KeyValueConfig kv = KeyValueConfig::load(path);
  for (const auto& o : overrides) kv.set_assignment(o);
  return kv;
}

template <typename F>
int guarded(const CommandContext& ctx, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    *ctx.err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

std::vector<GradcheckCase> default_gradcheck_cases() {
  std::vector<GradcheckCase> cases;
  for (auto kind : {ConnectorKind::FC, ConnectorKind::CA, ConnectorKind::QF, ConnectorKind::SegQF}) {
    cases.push_back({to_string(kind), [kind](std::uint64_t seed) { return check_connector(kind, seed); }});
  }
  cases.push_back({"loss_head", check_loss_head});
  return cases;
}

bool GradcheckSummary::passed() const {
  for (const auto& l : lines) {
    if (!(l.max_rel_error <= tolerance)) return false;
  }
  return !lines.empty();
}

std::string GradcheckSummary::format() const {
  std::ostringstream out;
  for (const auto& l : lines) {
    out << (l.max_rel_error <= tolerance ? "PASS" : "FAIL") << "  " << l.name << "  seed " << l.seed
        << "  max rel err " << fmt_e(l.max_rel_error) << "  (" << l.worst_block << ")\n";
  }
  out << (passed() ? "gradcheck passed" : "gradcheck FAILED") << ": tolerance " << fmt_e(tolerance) << ", "
      << fmt_f(seconds, 1) << " s\n";
  return out.str();
}

GradcheckSummary run_gradchecks(const std::vector<GradcheckCase>& cases, const std::vector<std::uint64_t>& seeds,
                                double tolerance) {
  const auto t0 = std::chrono::steady_clock::now();
  GradcheckSummary s;
  s.tolerance = tolerance;
  for (const auto& c : cases) {
    for (auto seed : seeds) {
      const auto report = c.run(seed);
      GradcheckLine line{c.name, seed, 0.0, "-"};
      for (const auto& b : report.blocks) {
        if (b.max_rel_error >= line.max_rel_error) {
          line.max_rel_error = b.max_rel_error;
          line.worst_block = b.name;
        }
      }
      s.lines.push_back(line);
    }
  }
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

TrainRun run_training(const ExperimentConfig& config, const ToyDecoder<double>& decoder, const Datasets& data,
                      const Logger& log) {
  ToyDecoder<double> dec = decoder;
  SpeechModel model(config, dec.cast<float>());
  TrainRun run;
  run.result = train_connector(model, data, log);
  const std::filesystem::path out(config.out_dir);
  std::filesystem::create_directories(out);
  run.checkpoint = out / "best.ckpt";
  run.result.best.save(run.checkpoint);
  write_text(out / "train_log.tsv", format_train_log(run.result.log));
  write_text(out / "config.txt", config.to_kv().dump());
  return run;
}

EvalSummary evaluate_model(SpeechModel& model, std::span<const Utterance> set, const std::string& label,
                           const std::optional<std::filesystem::path>& out_dir, const std::string& stem) {
  EvalSummary s;
  s.label = label;
  s.outcomes = decode_all(model, set);
  std::vector<WerReport> reports;
  for (const auto& o : s.outcomes) reports.push_back(o.report);
  s.total = corpus_score(reports);
  s.buckets = duration_bucket_report(s.outcomes, model.config.eval.buckets);
  s.tokens = static_cast<long>(model.connector.output_tokens(model.config.task.window));
  s.params = static_cast<long>(model.connector.trainable_parameters());
  if (out_dir) {
    const std::vector<ResultRow> rows{s.row()};
    write_text(*out_dir / (stem + ".txt"), format_results_table(rows) + "\n" + format_bucket_table(s.buckets));
    write_text(*out_dir / (stem + ".json"), results_json(rows, s.buckets));
    std::string hyp = "id\tduration\ttruncated\tsuccess\treference\thypothesis\n";
    for (const auto& o : s.outcomes) {
      hyp += o.id + "\t" + fmt_f(o.duration_seconds, 1) + "\t" + (o.truncated ? "1" : "0") + "\t" +
             (o.success() ? "1" : "0") + "\t" + o.reference + "\t" + o.hypothesis + "\n";
    }
    write_text(*out_dir / (stem + ".hyp.tsv"), hyp);
  }
  return s;
}

std::vector<Utterance> longform_set(std::span<const Utterance> set, double t_test) {
  std::vector<UtteranceRecord> records;
  records.reserve(set.size());
  for (const auto& u : set) records.push_back(u.record);
  return join_longform_groups(set, build_longform_testset(records, {t_test}));
}

std::vector<Utterance> load_manifest_utterances(const std::filesystem::path& manifest, int vocab) {
  const auto records = read_manifest(manifest);
  const auto features = manifest.parent_path() / "features";
  std::vector<Utterance> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    Utterance u;
    u.record = r;
    if (std::filesystem::exists(feature_cache_path(features, r.id))) {
      u.frames = load_features(features, r.id);
    } else if (r.source.size() > 4 && r.source.substr(r.source.size() - 4) == ".wav") {
      auto wav = read_wav(r.source);
      u.frames = extract_logmel(wav.samples, wav.sample_rate);
      u.audio = std::move(wav.samples);
    } else {
      throw ConfigError("no features for " + r.id + " (looked in " + features.string() + ")");
    }
    try {
      u.symbols = text_to_symbols(r.transcript, vocab);
    } catch (const ConfigError&) {
      u.symbols.clear();  // not a toy transcript; scoring uses the text
    }
    out.push_back(std::move(u));
  }
  return out;
}

namespace {

// The test set plus each eval.longform set, reports written under config.out_dir.
std::vector<ResultRow> evaluate_run(const Checkpoint& best, std::span<const Utterance> test, const std::string& label,
                                    const ExperimentConfig& config) {
  auto model = SpeechModel::from_checkpoint(best);
  std::vector<ResultRow> rows{evaluate_model(model, test, label, config.out_dir, "eval_test").row()};
  for (double t : config.eval.longform) {
    const auto lf = longform_set(test, t);
    rows.push_back(
        evaluate_model(model, lf, label + " @" + fmt_f(t, 0) + "s", config.out_dir, "eval_test_long" + fmt_f(t, 0))
            .row());
  }
  return rows;
}

}  // namespace

int cmd_train(const std::filesystem::path& path, const std::vector<std::string>& overrides, const CommandContext& ctx) {
  return guarded(ctx, [&] {
    const auto config = ExperimentConfig::from(load_with_overrides(path, overrides));
    config.check_paths();
    SyntheticTask task(config.task);
    const auto decoder = obtain_decoder(config, task, ctx.log);
    const auto data = make_datasets(config, task);
    const auto run = run_training(config, decoder, data, ctx.log);
    const auto& r = run.result;
    *ctx.out << "best step " << r.best_step << "  valid accuracy " << fmt_f(r.best_accuracy, 4) << "  (step 0: "
             << fmt_f(r.initial_accuracy, 4) << ")\n"
             << "checkpoint " << run.checkpoint.string() << "\n";
    if (!r.failure.empty()) {
      *ctx.err << "error: " << r.failure << "; kept the best checkpoint so far\n";
      return static_cast<int>(kExitRuntime);
    }
    *ctx.out << format_results_table(evaluate_run(r.best, data.test, to_string(config.connector.kind), config));
    return static_cast<int>(kExitOk);
  });
}

int cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& manifest,
             std::optional<double> longform, const std::optional<std::filesystem::path>& out_dir,
             const CommandContext& ctx) {
  return guarded(ctx, [&] {
    if (!std::filesystem::exists(manifest)) throw ConfigError("manifest " + manifest.string() + " does not exist");
    auto model = SpeechModel::from_checkpoint(Checkpoint::load(checkpoint));
    auto set = load_manifest_utterances(manifest, model.config.task.vocab);
    std::string stem = "eval_" + manifest.stem().string();
    if (longform) {
      set = longform_set(set, *longform);
      stem += "_long" + fmt_f(*longform, 0);
    }
    const auto dir = out_dir.value_or(checkpoint.has_parent_path() ? checkpoint.parent_path() : ".");
    const auto s = evaluate_model(model, set, checkpoint.stem().string(), dir, stem);
    *ctx.out << format_results_table({s.row()}) << "\n" << format_bucket_table(s.buckets)
             << "reports in " << (dir / stem).string() << ".{txt,json,hyp.tsv}\n";
    return static_cast<int>(kExitOk);
  });
}

int cmd_sweep(const std::filesystem::path& path, const std::string& axis, const std::vector<std::string>& overrides,
              const CommandContext& ctx) {
  return guarded(ctx, [&] {
    const auto eq = axis.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == axis.size()) {
      throw ConfigError("sweep: axis must look like key=v1,v2,...");
    }
    const std::string key = axis.substr(0, eq);
    std::vector<std::string> values;
    std::stringstream ss(axis.substr(eq + 1));
    for (std::string v; std::getline(ss, v, ',');) {
      if (!v.empty()) values.push_back(v);
    }
    if (values.empty()) throw ConfigError("sweep: no axis values");

    const KeyValueConfig base_kv = load_with_overrides(path, overrides);
    const auto base = ExperimentConfig::from(base_kv);
    base.check_paths();
    // validate every point before training any of them
    std::vector<ExperimentConfig> points;
    for (const auto& v : values) {
      KeyValueConfig kv = base_kv;
      kv.set(key, v);
      auto c = ExperimentConfig::from(kv);
      c.out_dir = (std::filesystem::path(base.out_dir) / (key + "=" + v)).string();
      points.push_back(c);
    }
    const bool shared_world = key.rfind("task.", 0) != 0 && key.rfind("decoder.", 0) != 0 && key.rfind("data.", 0) != 0;
    std::optional<SyntheticTask> task;
    std::optional<ToyDecoder<double>> decoder;
    std::optional<Datasets> data;

    std::vector<ResultRow> rows;
    auto save = [&] {
      write_text(std::filesystem::path(base.out_dir) / "sweep.txt", format_results_table(rows));
      write_text(std::filesystem::path(base.out_dir) / "sweep.json", results_json(rows));
    };
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& c = points[i];
      try {
        if (!task || !shared_world) {
          task.emplace(c.task);
          decoder = obtain_decoder(c, *task, ctx.log);
          data = make_datasets(c, *task);
        }
        const auto run = run_training(c, *decoder, *data, ctx.log);
        if (!run.result.failure.empty()) throw NonFiniteError(run.result.failure);
        for (auto& row : evaluate_run(run.result.best, data->test, key + "=" + values[i], c)) rows.push_back(row);
      } catch (...) {
        save();
        *ctx.err << "sweep stopped at " << key << "=" << values[i] << "; partial results saved\n";
        throw;
      }
      save();
    }
    *ctx.out << format_results_table(rows);
    return static_cast<int>(kExitOk);
  });
}

int cmd_gradcheck(const std::vector<std::uint64_t>& seeds, const CommandContext& ctx) {
  return guarded(ctx, [&] {
    const auto s = run_gradchecks(default_gradcheck_cases(), seeds);
    *ctx.out << s.format();
    return static_cast<int>(s.passed() ? kExitOk : kExitGradcheck);
  });
}

int cmd_make_data(const std::filesystem::path& spec, const std::vector<std::string>& overrides,
                  const CommandContext& ctx) {
  return guarded(ctx, [&] {
    KeyValueConfig kv = load_with_overrides(spec, overrides);
    if (!kv.has("training.seed")) kv.set("training.seed", "0");
    const auto config = ExperimentConfig::from(kv);
    SyntheticTask task(config.task);
    const auto data = make_datasets(config, task);
    const std::filesystem::path out(config.out_dir);
    const auto features = out / "features";
    auto dump = [&](const std::vector<Utterance>& set, const std::string& name) {
      std::vector<UtteranceRecord> records;
      for (const auto& u : set) {
        records.push_back(u.record);
        save_features(features, u.record.id, u.frames);
      }
      write_manifest(out / (name + ".tsv"), records);
      *ctx.out << name << ": " << set.size() << " utterances -> " << (out / (name + ".tsv")).string() << "\n";
    };
    std::filesystem::create_directories(out);
    dump(data.train, "train");
    dump(data.valid, "valid");
    dump(data.test, "test");
    return static_cast<int>(kExitOk);
  });
}

}  // namespace bridgekit
