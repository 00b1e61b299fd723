// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#include "bridgekit/cli/commands.hpp"
#include "bridgekit/datapipe/manifest.hpp"

#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace bridgekit;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(# tiny end-to-end setup
task.vocab = 6
task.max_len = 5
task.window = 30
task.d_x = 8
task.r = 3
data.train = 40
data.valid = 10
data.test = 12
data.chapter_size = 4
decoder.d_t = 16
decoder.heads = 2
decoder.ffn = 32
decoder.pretrain_steps = 20
decoder.pretrain_batch = 4
decoder.corpus_size = 200
decoder.corpus_max_len = 10
decoder.max_silent = 3
decoder.max_zero_rows = 3
connector.kind = qf
connector.n_q = 4
connector.n_heads = 2
connector.fc_hidden = 16
connector.m = 3
connector.s = 3
connector.ca_heads = 2
training.steps = 12
training.batch_size = 4
training.validate_every = 5
training.warmup_steps = 3
training.seed = 5
eval.longform = 12
)";

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("bridgekit_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig tiny(const fs::path& out) {
  auto kv = KeyValueConfig::parse_string(kTinyConfig);
  kv.set("paths.out", out.string());
  return ExperimentConfig::from(kv);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct World {
  ExperimentConfig config;
  SyntheticTask task;
  ToyDecoder<double> decoder;
  Datasets data;

  explicit World(const ExperimentConfig& c)
      : config(c), task(c.task), decoder(obtain_decoder(c, task)), data(make_datasets(c, task)) {}
};

}  // namespace

TEST_CASE("config parsing") {
  auto c = tiny("out");
  CHECK(c.task.vocab == 6);
  CHECK(c.decoder.model.vocab == 8);
  CHECK(c.connector.d_x == 8);
  CHECK(c.connector.d_t == 16);
  CHECK(c.connector.segment_len == 30);  // follows the window
  CHECK(c.eval.longform == std::vector<double>{12});

  auto again = ExperimentConfig::from(c.to_kv());
  CHECK(again.to_kv().dump() == c.to_kv().dump());

  auto kv = KeyValueConfig::parse_string(kTinyConfig);
  kv.set("connector.nq", "3");
  CHECK_THROWS_WITH_AS(ExperimentConfig::from(kv), doctest::Contains("connector.nq"), ConfigError);
  CHECK_THROWS_WITH_AS(ExperimentConfig::from(KeyValueConfig::parse_string("task.vocab = 6\n")),
                       doctest::Contains("training.seed"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse_string("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse_string("just words\n"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from(KeyValueConfig::parse_string("training.seed = x\n")), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from(KeyValueConfig::parse_string("training.seed = 1\nconcat.enabled = maybe\n")),
                  ConfigError);

  auto missing = KeyValueConfig::parse_string(kTinyConfig);
  missing.set("training.init", "/nonexistent/init.ckpt");
  auto cfg = ExperimentConfig::from(missing);
  CHECK_THROWS_AS(cfg.check_paths(), ConfigError);
}

TEST_CASE("checkpoint container") {
  Checkpoint c;
  c.meta["step"] = 7;
  c.meta["valid_accuracy"] = 0.1 + 0.2;
  Rng rng(1);
  Linear<double> lin(3, 2, rng);
  lin.weight.freeze();
  Checkpoint::Entry a{"w", true, lin.weight};
  Checkpoint::Entry b{"b", false, lin.bias};
  c.tensors = {a, b};
  const auto bytes = c.to_bytes();
  CHECK(bytes.compare(0, 8, "BKCKPT01") == 0);
  auto back = Checkpoint::from_bytes(bytes);
  CHECK(back.to_bytes() == bytes);
  CHECK(back.meta["valid_accuracy"].get<double>() == 0.1 + 0.2);
  CHECK(back.find("w")->frozen);
  CHECK(back.find("w")->tensor.value() == lin.weight.value());

  CHECK_THROWS_AS(Checkpoint::from_bytes("BKCKPT02" + bytes.substr(8)), FormatError);
  CHECK_THROWS_AS(Checkpoint::from_bytes(bytes.substr(0, bytes.size() - 3)), FormatError);
  CHECK_THROWS_AS(Checkpoint::from_bytes(bytes + "x"), FormatError);
}

TEST_CASE("training, checkpoints and evaluation on a tiny setup") {
  const auto dir = fresh_dir("train");
  World w(tiny(dir / "a"));
  auto run = run_training(w.config, w.decoder, w.data);
  REQUIRE(run.result.failure.empty());
  REQUIRE(fs::exists(run.checkpoint));
  CHECK(run.result.log.front().step == 0);
  CHECK(run.result.log.back().step == 12);
  CHECK(run.result.log.back().valid_accuracy.has_value());

  SUBCASE("same seed gives identical checkpoints and logs") {
    const auto first = slurp(run.checkpoint);
    auto run2 = run_training(w.config, w.decoder, w.data);
    CHECK(first == slurp(run2.checkpoint));
    CHECK(format_train_log(run.result.log) == format_train_log(run2.result.log));
  }
  SUBCASE("load then save is byte-stable") {
    const auto bytes = slurp(run.checkpoint);
    auto loaded = Checkpoint::load(run.checkpoint);
    loaded.save(dir / "copy.ckpt");
    CHECK(slurp(dir / "copy.ckpt") == bytes);
    auto model = SpeechModel::from_checkpoint(loaded);
    CHECK(model.checkpoint(loaded.meta["step"].get<long>(), loaded.meta["valid_accuracy"].get<double>()).to_bytes() ==
          bytes);
  }
  SUBCASE("frozen tensors refuse gradients after loading") {
    auto model = SpeechModel::from_checkpoint(Checkpoint::load(run.checkpoint));
    CHECK(model.decoder.frozen());
    CHECK_THROWS_AS(model.decoder.embedding().set_requires_grad(true), FrozenError);
    CHECK_THROWS_AS(model.task.encoder.symbols().set_requires_grad(true), FrozenError);
    bool trainable = false;
    model.connector.visit([&](const std::string&, Tensor<float>& t) { trainable = trainable || t.requires_grad(); });
    CHECK(trainable);
  }
  SUBCASE("validation accuracy is reproduced from the checkpoint") {
    auto model = SpeechModel::from_checkpoint(run.result.best);
    CHECK(validate_teacher_forced(model, w.data.valid).accuracy() == run.result.best_accuracy);
    auto a = evaluate_model(model, w.data.valid, "x");
    auto b = evaluate_model(model, w.data.valid, "x");
    CHECK(a.total == b.total);
  }
  SUBCASE("a learning rate of zero changes nothing") {
    auto c0 = w.config;
    c0.training.learning_rate = 0.0;
    c0.out_dir = (dir / "zero").string();
    SpeechModel fresh(c0, ToyDecoder<double>(w.decoder).cast<float>());
    const auto initial = fresh.checkpoint(0, 0.0);
    auto r0 = run_training(c0, w.decoder, w.data);
    CHECK(r0.result.best_step == 0);
    for (const auto& e : initial.tensors) {
      if (e.name.rfind("connector.", 0) != 0) continue;
      CHECK(r0.result.best.find(e.name)->tensor.value() == e.tensor.value());
    }
  }
  SUBCASE("the frozen encoder, decoder and embedding table are untouched") {
    auto model = SpeechModel::from_checkpoint(run.result.best);
    auto before = ToyDecoder<double>(w.decoder).cast<float>();
    CHECK(module_hash(model.decoder) == module_hash(before));
    SyntheticTask task(w.config.task);
    CHECK(hash_tensors({{"s", &task.encoder.symbols()}, {"m", &task.encoder.mixing()}}) ==
          hash_tensors({{"s", &model.task.encoder.symbols()}, {"m", &model.task.encoder.mixing()}}));
  }
  SUBCASE("a decoder of another width is rejected") {
    auto wide = w.config;
    wide.decoder.model.d_t = 24;
    wide.connector.d_t = 24;
    Rng rng(0);
    ToyDecoder<float> other(wide.decoder.model, rng);
    CHECK_THROWS_AS(Checkpoint::load(run.checkpoint).restore(other), FormatError);
  }
  fs::remove_all(dir);
}

TEST_CASE("every connector kind trains and fine-tunes from a checkpoint") {
  const auto dir = fresh_dir("kinds");
  World w(tiny(dir / "base"));
  fs::path qf_ckpt;
  for (const char* kind : {"fc", "ca", "qf", "segqf"}) {
    CAPTURE(kind);
    auto c = w.config;
    c.connector.kind = parse_connector_kind(kind);
    c.training.steps = 3;
    c.out_dir = (dir / kind).string();
    if (std::string(kind) == "segqf") {
      c.training.init_checkpoint = qf_ckpt.string();
      c.concat = {15.0, true};
    }
    auto run = run_training(c, w.decoder, w.data);
    CHECK(run.result.failure.empty());
    if (std::string(kind) == "qf") qf_ckpt = run.checkpoint;
    if (std::string(kind) == "segqf") {
      // step 0 of the fine-tune runs the QF weights inside the segmented connector
      SpeechModel first(c, ToyDecoder<double>(w.decoder).cast<float>());
      Checkpoint::load(qf_ckpt).restore(first.connector);
      CHECK(run.result.initial_accuracy == doctest::Approx(validate_teacher_forced(first, w.data.valid).accuracy()));
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("commands") {
  const auto dir = fresh_dir("commands");
  std::ostringstream out, err;
  CommandContext ctx{&out, &err, {}};
  const auto config = dir / "tiny.cfg";
  {
    std::ofstream f(config);
    f << kTinyConfig << "paths.out = " << (dir / "run").string() << "\n"
      << "decoder.cache = " << (dir / "decoder.ckpt").string() << "\n";
  }

  SUBCASE("train, make-data and eval agree") {
    REQUIRE(cmd_train(config, {}, ctx) == kExitOk);
    CHECK(fs::exists(dir / "decoder.ckpt"));
    CHECK(fs::exists(dir / "run" / "train_log.tsv"));
    REQUIRE(cmd_make_data(config, {"paths.out=" + (dir / "data").string()}, ctx) == kExitOk);
    auto records = read_manifest(dir / "data" / "test.tsv");
    CHECK(records.size() == 12);
    CHECK(records[5].chapter_id.has_value());

    REQUIRE(cmd_eval(dir / "run" / "best.ckpt", dir / "data" / "test.tsv", std::nullopt, dir / "reports", ctx) == kExitOk);
    CHECK(fs::exists(dir / "reports" / "eval_test.json"));
    // the manifest path gives the same numbers as the in-memory set
    auto model = SpeechModel::from_checkpoint(Checkpoint::load(dir / "run" / "best.ckpt"));
    World w(ExperimentConfig::load(config));
    auto direct = evaluate_model(model, w.data.test, "x");
    auto via_manifest = evaluate_model(model, load_manifest_utterances(dir / "data" / "test.tsv", 6), "x");
    CHECK(direct.total == via_manifest.total);

    REQUIRE(cmd_eval(dir / "run" / "best.ckpt", dir / "data" / "test.tsv", 12.0, dir / "reports", ctx) == kExitOk);
    CHECK(fs::exists(dir / "reports" / "eval_test_long12.txt"));
  }
  SUBCASE("missing inputs fail cleanly") {
    CHECK(cmd_eval(dir / "none.ckpt", dir / "none.tsv", std::nullopt, std::nullopt, ctx) == kExitRuntime);
    CHECK(err.str().find("none.tsv") != std::string::npos);
    CHECK(cmd_train(dir / "missing.cfg", {}, ctx) == kExitRuntime);
    CHECK(cmd_train(config, {"training.bogus=1"}, ctx) == kExitRuntime);
  }
  SUBCASE("single-point sweep equals train plus eval") {
    REQUIRE(cmd_sweep(config, "connector.n_q=3", {"eval.longform="}, ctx) == kExitOk);
    CHECK(fs::exists(dir / "run" / "sweep.json"));
    const auto point = dir / "run" / "connector.n_q=3";
    World w(ExperimentConfig::load(config));
    auto c = w.config;
    c.connector.n_q = 3;
    c.out_dir = (dir / "manual").string();
    auto run = run_training(c, w.decoder, w.data);
    CHECK(slurp(run.checkpoint) != "");
    auto a = Checkpoint::load(point / "best.ckpt");
    auto b = Checkpoint::load(run.checkpoint);
    CHECK(a.tensors.size() == b.tensors.size());
    for (std::size_t i = 0; i < a.tensors.size(); ++i) CHECK(a.tensors[i].tensor.value() == b.tensors[i].tensor.value());
    CHECK(out.str().find("connector.n_q=3") != std::string::npos);
    CHECK(cmd_sweep(config, "connector.n_q", {}, ctx) == kExitRuntime);
  }
  fs::remove_all(dir);
}

TEST_CASE("gradcheck suite") {
  auto s = run_gradchecks(default_gradcheck_cases(), {1});
  CHECK(s.passed());
  CHECK(s.lines.size() == 5);
  // negative control: a backward that claims d/dx x^3 = 2x
  GradcheckCase broken{"broken", [](std::uint64_t) {
                         Tensor<double> x(MatrixX<double>{{0.5, 1.5}});
                         x.set_requires_grad(true);
                         return gradcheck(
                             [&](Tape<double>& t) {
                               auto v = t.parameter(x);
                               const Index id = v.id();
                               return sum(t.record("cube", MatrixX<double>(v.value().array().cube()), {v},
                                                   [id](Tape<double>& tp, const MatrixX<double>& g) {
                                                     tp.accumulate(id, g.cwiseProduct(tp.value(id)) * 2.0);
                                                   }));
                             },
                             {{"x", &x}});
                       }};
  auto bad = run_gradchecks({broken}, {1});
  CHECK_FALSE(bad.passed());
  CHECK(bad.format().find("FAIL") != std::string::npos);
}
