// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.
//
//   bridgekit_acceptance [--work DIR] [--only 1,6,...] [--finetune-steps N]

#include "bridgekit/cli/commands.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace bridgekit;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- criteria 1-5: properties ----

Verdict gradients() {
  const std::clock_t c0 = std::clock();
  auto s = run_gradchecks(default_gradcheck_cases(), {1, 2, 3});
  const double cpu = static_cast<double>(std::clock() - c0) / CLOCKS_PER_SEC;
  double worst = 0.0;
  for (const auto& l : s.lines) worst = std::max(worst, l.max_rel_error);
  return {s.passed() && s.lines.size() == 15 && cpu < 60.0,
          fmt("%zu checks, worst rel err %.2e (bound 1e-4), %.1f s CPU (bound 60)", s.lines.size(), worst, cpu)};
}

Verdict fixed_length() {
  ConnectorConfig c;  // n_q = 16
  Rng rng(101);
  Connector<double> qf(c, rng);
  std::uniform_int_distribution<Index> nx(1, 600);
  MatrixX<double> embed = MatrixX<double>::Zero(26, c.d_t);
  int ok = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Tape<double> tape;
    const Index n = nx(rng);
    auto y = qf.forward(tape, tape.constant(gaussian<double>(n, c.d_x, 1.0, rng)), tape.reference(embed));
    ok += y.rows() == c.n_q && qf.output_tokens(n) == c.n_q;
  }
  return {ok == 200, fmt("%d/200 trials gave n_q = %ld tokens", ok, static_cast<long>(c.n_q))};
}

Verdict segment_length() {
  Rng rng(202);
  std::uniform_int_distribution<Index> nx(1, 1200);
  MatrixX<double> embed = MatrixX<double>::Zero(26, 64);
  int ok = 0, trials = 0;
  for (Index L : {50, 150, 300}) {
    ConnectorConfig c;
    c.kind = ConnectorKind::SegQF;
    c.segment_len = L;
    Connector<double> seg(c, rng);
    const int n_trials = L == 300 ? 66 : 67;
    for (int t = 0; t < n_trials; ++t, ++trials) {
      Tape<double> tape;
      const Index n = nx(rng);
      auto y = seg.forward(tape, tape.constant(gaussian<double>(n, c.d_x, 1.0, rng)), tape.reference(embed));
      ok += y.rows() == ceil_div(n, L) * c.n_q;
    }
  }
  return {ok == trials && trials == 200, fmt("%d/%d trials matched ceil(n_x/L)*n_q over L in {50,150,300}", ok, trials)};
}

Verdict conv_equivalence() {
  Rng rng(303);
  std::uniform_int_distribution<Index> pick(1, 12);
  double worst = 0.0;
  int shape_ok = 0;
  for (int t = 0; t < 50; ++t) {
    const Index m = pick(rng), d = pick(rng), out = pick(rng), n = 1 + pick(rng) * pick(rng);
    const MatrixX<double> x = gaussian<double>(n, d, 1.0, rng);
    const MatrixX<double> w = gaussian<double>(m * d, out, 1.0, rng);
    const MatrixX<double> b = gaussian<double>(1, out, 1.0, rng);
    Tape<double> tape;
    auto lin = affine(stack_frames(tape.reference(x), m), tape.reference(w), tape.reference(b));
    auto conv = conv1d_downsample(tape.reference(x), m, tape.constant(stacked_linear_as_conv(w, m, d)),
                                  tape.reference(b));
    if (lin.rows() != conv.rows() || lin.cols() != conv.cols()) continue;
    ++shape_ok;
    worst = std::max(worst, (lin.value() - conv.value()).cwiseAbs().maxCoeff());
  }
  return {shape_ok == 50 && worst <= 1e-10, fmt("50 instances, max abs diff %.3e (bound 1e-10)", worst)};
}

long brute_cost(const std::vector<std::string>& r, std::size_t i, const std::vector<std::string>& h, std::size_t j) {
  if (i == r.size()) return static_cast<long>(h.size() - j);
  if (j == h.size()) return static_cast<long>(r.size() - i);
  return std::min({(r[i] == h[j] ? 0L : 1L) + brute_cost(r, i + 1, h, j + 1), 1 + brute_cost(r, i, h, j + 1),
                   1 + brute_cost(r, i + 1, h, j)});
}

Verdict wer_oracle() {
  std::vector<std::vector<std::string>> seqs{{}}, frontier{{}};
  for (int len = 1; len <= 4; ++len) {
    std::vector<std::vector<std::string>> next;
    for (const auto& w : frontier)
      for (const char* s : {"a", "b", "c"}) {
        auto v = w;
        v.push_back(s);
        next.push_back(v);
      }
    seqs.insert(seqs.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  long pairs = 0, agree = 0;
  for (const auto& r : seqs) {
    if (r.empty()) continue;
    for (const auto& h : seqs) {
      const auto rep = align_and_score(r, h);
      ++pairs;
      agree += rep.errors() == brute_cost(r, 0, h, 0) &&
               static_cast<long>(r.size()) - rep.deletions + rep.insertions == static_cast<long>(h.size());
    }
  }
  const auto ex = align_and_score("a b c", "a c");
  const bool hand = ex.deletions == 1 && ex.errors() == 1 && std::abs(ex.wer_percent() - 100.0 / 3.0) < 1e-9 &&
                    fmt("%.2f", ex.wer_percent()) == std::string("33.33");
  return {agree == pairs && pairs == 120 * 121 && hand,
          fmt("%ld/%ld pairs agree with brute force; \"a b c\" vs \"a c\" gives %.2f%% with D=%ld", agree, pairs,
              ex.wer_percent(), ex.deletions)};
}

// ---- criteria 6-10: training runs ----

struct Run {
  fs::path checkpoint;
  double seconds = 0.0;
  double best_accuracy = 0.0;
  std::string failure;
};

class Lab {
 public:
  Lab(fs::path work, long finetune_steps)
      : work_(std::move(work)), finetune_steps_(finetune_steps), base_(base_config(work_)), task_(base_.task) {
    decoder_ = obtain_decoder(base_, task_, log_);
    data_ = make_datasets(base_, task_);
    test_30_ = longform_set(data_.test, 30.0);
    test_90_ = longform_set(data_.test, 90.0);
  }

  static ExperimentConfig base_config(const fs::path& work) {
    KeyValueConfig kv;
    kv.set("training.seed", "1");
    kv.set("connector.d_q", "64");
    kv.set("connector.fc_hidden", "512");
    kv.set("decoder.cache", (work / "decoder.ckpt").string());
    return ExperimentConfig::from(kv);
  }

  const ExperimentConfig& base() const { return base_; }
  const Datasets& data() const { return data_; }
  const ToyDecoder<double>& decoder() const { return decoder_; }
  const SyntheticTask& task() const { return task_; }
  std::span<const Utterance> near_window() const { return test_30_; }
  std::span<const Utterance> three_windows() const { return test_90_; }
  const fs::path& work() const { return work_; }
  long finetune_steps() const { return finetune_steps_; }
  const std::map<std::string, Run>& runs() const { return runs_; }

  /// Trains once per name within this process.
  const Run& train(const std::string& name, ExperimentConfig c) {
    if (auto it = runs_.find(name); it != runs_.end()) return it->second;
    c.out_dir = (work_ / name).string();
    std::cerr << "[acceptance] training " << name << "\n";
    const auto t0 = std::chrono::steady_clock::now();
    auto r = run_training(c, decoder_, data_, log_);
    Run run{r.checkpoint, seconds_since(t0), r.result.best_accuracy, r.result.failure};
    std::cerr << fmt("[acceptance] %s: best valid accuracy %.4f at step %ld, %.0f s\n", name.c_str(),
                     r.result.best_accuracy, r.result.best_step, run.seconds);
    return runs_.emplace(name, run).first->second;
  }

  WerReport score(const Run& run, std::span<const Utterance> set, const std::string& stem) {
    auto model = SpeechModel::from_checkpoint(Checkpoint::load(run.checkpoint));
    auto s = evaluate_model(model, set, stem, run.checkpoint.parent_path(), stem);
    return s.total;
  }

  // The named setups used by several criteria.
  const Run& qf(std::uint64_t seed, bool concat) {
    auto c = base_;
    c.training.seed = seed;
    c.concat = {static_cast<double>(c.task.window) / c.task.frame_rate_hz, concat};
    return train(fmt("qf_seed%llu_%s", static_cast<unsigned long long>(seed), concat ? "concat" : "plain"), c);
  }
  const Run& fc(std::uint64_t seed) {
    auto c = base_;
    c.training.seed = seed;
    c.connector.kind = ConnectorKind::FC;
    return train(fmt("fc_seed%llu_plain", static_cast<unsigned long long>(seed)), c);
  }
  /// Fine-tunes on concatenations of up to 3 windows, starting from `init`.
  const Run& finetune(ConnectorKind kind, std::uint64_t seed, const Run& init) {
    auto c = base_;
    c.training.seed = seed;
    c.connector.kind = kind;
    c.training.init_checkpoint = init.checkpoint.string();
    c.training.steps = finetune_steps_;
    c.training.keep_last = true;  // validation holds short utterances only
    c.concat = {3.0 * static_cast<double>(c.task.window) / c.task.frame_rate_hz, true};
    return train(fmt("finetune_%s_seed%llu", to_string(kind).c_str(), static_cast<unsigned long long>(seed)), c);
  }

 private:
  fs::path work_;
  long finetune_steps_;
  ExperimentConfig base_;
  SyntheticTask task_;
  ToyDecoder<double> decoder_;
  Datasets data_;
  std::vector<Utterance> test_30_, test_90_;
  std::map<std::string, Run> runs_;
  Logger log_ = [](const std::string& s) { std::cerr << "  " << s << "\n"; };
};

Verdict toy_end_to_end(Lab& lab) {
  const auto& qf = lab.qf(1, false);
  const auto& fc = lab.fc(1);
  const auto qw = lab.score(qf, lab.data().test, "test");
  const auto fw = lab.score(fc, lab.data().test, "test");
  const bool pass = qf.failure.empty() && fc.failure.empty() && qw.wer_percent() <= 5.0 && fw.wer_percent() <= 8.0 &&
                    qf.seconds <= 600.0 && fc.seconds <= 600.0;
  return {pass, fmt("QF WER %.2f%% (bound 5) in %.0f s; FC WER %.2f%% (bound 8) in %.0f s; %ld steps, seed 1",
                    qw.wer_percent(), qf.seconds, fw.wer_percent(), fc.seconds, lab.base().training.steps)};
}

Verdict concat_direction(Lab& lab) {
  bool pass = true;
  std::string detail = "%Del on near-window inputs, plain -> concat:";
  for (std::uint64_t seed : {1, 2}) {
    const double plain = lab.score(lab.qf(seed, false), lab.near_window(), "long30").del_percent();
    const double concat = lab.score(lab.qf(seed, true), lab.near_window(), "long30").del_percent();
    pass = pass && plain > concat;
    detail += fmt(" seed %llu %.2f -> %.2f;", static_cast<unsigned long long>(seed), plain, concat);
  }
  return {pass, detail + fmt(" %zu inputs", lab.near_window().size())};
}

Verdict segment_direction(Lab& lab) {
  bool pass = true;
  std::string detail = "WER on 3-window inputs after fine-tuning (SegQF / QF / FC):";
  for (std::uint64_t seed : {1, 2}) {
    const auto& qf_base = lab.qf(1, true);
    const auto& fc_base = lab.fc(1);
    const double seg = lab.score(lab.finetune(ConnectorKind::SegQF, seed, qf_base), lab.three_windows(), "long90")
                           .wer_percent();
    const double qf =
        lab.score(lab.finetune(ConnectorKind::QF, seed, qf_base), lab.three_windows(), "long90").wer_percent();
    const double fc =
        lab.score(lab.finetune(ConnectorKind::FC, seed, fc_base), lab.three_windows(), "long90").wer_percent();
    pass = pass && seg < qf && seg < fc;
    detail += fmt(" seed %llu %.2f / %.2f / %.2f;", static_cast<unsigned long long>(seed), seg, qf, fc);
  }
  return {pass, detail + fmt(" %ld fine-tune steps, %zu inputs", lab.finetune_steps(), lab.three_windows().size())};
}

Verdict determinism(Lab& lab) {
  const auto dir = lab.work() / "determinism";
  fs::create_directories(dir);
  const auto config = dir / "run.cfg";
  {
    std::ofstream f(config);
    f << "training.seed = 9\ntraining.steps = 60\ntraining.validate_every = 20\nconnector.d_q = 64\n"
      << "decoder.cache = " << (lab.work() / "decoder.ckpt").string() << "\n"
      << "paths.out = " << (dir / "out").string() << "\n";
  }
  std::ostringstream sink;
  CommandContext ctx{&sink, &sink, {}};
  const int a = cmd_train(config, {}, ctx);
  const auto first = slurp(dir / "out" / "best.ckpt");
  const int b = cmd_train(config, {}, ctx);
  const auto second = slurp(dir / "out" / "best.ckpt");
  const bool identical = a == kExitOk && b == kExitOk && !first.empty() && first == second;

  // round trip every checkpoint written so far
  int stable = 0, total = 0;
  for (const auto& [name, run] : lab.runs()) {
    ++total;
    const auto bytes = slurp(run.checkpoint);
    auto loaded = Checkpoint::load(run.checkpoint);
    loaded.save(dir / "roundtrip.ckpt");
    stable += slurp(dir / "roundtrip.ckpt") == bytes && Checkpoint::from_bytes(bytes).to_bytes() == bytes;
  }
  ++total;
  stable += Checkpoint::from_bytes(first).to_bytes() == first;
  return {identical && stable == total,
          fmt("two cmd_train runs %s (%zu bytes); %d/%d checkpoints round-trip byte-identical",
              identical ? "bitwise identical" : "DIFFER", first.size(), stable, total)};
}

Verdict frozen_contract(Lab& lab) {
  auto reference_decoder = ToyDecoder<double>(lab.decoder()).cast<float>();
  const auto dec_hash = module_hash(reference_decoder);
  const auto emb_hash = hash_tensors({{"embed", &lab.decoder().embedding()}});
  SyntheticTask fresh(lab.base().task);
  Prefixed<ToyEncoder> fresh_enc{fresh.encoder, "encoder"};
  const auto enc_hash = module_hash(fresh_enc);

  // an in-memory run, checked on the live objects
  auto c = lab.base();
  c.training.steps = 20;
  c.training.validate_every = 10;
  SpeechModel live(c, ToyDecoder<double>(lab.decoder()).cast<float>());
  Prefixed<ToyEncoder> live_enc{live.task.encoder, "encoder"};
  const auto live_before = std::make_pair(module_hash(live.decoder), module_hash(live_enc));
  train_connector(live, lab.data());
  bool ok = live_before == std::make_pair(module_hash(live.decoder), module_hash(live_enc)) &&
            live_before.first == dec_hash && live_before.second == enc_hash;
  int runs_ok = 0, total = 0;
  for (const auto& [name, run] : lab.runs()) {
    ++total;
    auto m = SpeechModel::from_checkpoint(Checkpoint::load(run.checkpoint));
    Prefixed<ToyEncoder> enc{m.task.encoder, "encoder"};
    Tensor<double> embed(m.decoder.embedding().value().cast<double>());
    Tensor<double> embed_ref(lab.decoder().embedding().value().cast<float>().cast<double>());
    runs_ok += module_hash(m.decoder) == dec_hash && module_hash(enc) == enc_hash &&
               hash_tensors({{"embed", &embed}}) == hash_tensors({{"embed", &embed_ref}});
  }
  ok = ok && runs_ok == total;
  return {ok, fmt("encoder %016llx, decoder %016llx, embedding %016llx unchanged in %d/%d runs plus a live run",
                  static_cast<unsigned long long>(enc_hash), static_cast<unsigned long long>(dec_hash),
                  static_cast<unsigned long long>(emb_hash), runs_ok, total)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bridgekit acceptance run"};
  std::string work = (fs::temp_directory_path() / "bridgekit_acceptance").string();
  std::vector<int> only;
  long finetune_steps = 1000;
  app.add_option("--work", work, "directory for checkpoints and reports");
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_option("--finetune-steps", finetune_steps, "fine-tuning steps for the long-form comparison");
  CLI11_PARSE(app, argc, argv);

  const std::set<int> selected(only.begin(), only.end());
  auto wanted = [&](int n) { return selected.empty() || selected.count(n) > 0; };
  fs::create_directories(work);

  std::vector<std::pair<int, Verdict>> verdicts;
  std::ofstream summary(fs::path(work) / "summary.txt");
  auto report = [&](int n, const std::string& title, auto&& fn) {
    if (!wanted(n)) return;
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const auto line = fmt("criterion %2d: %s  %s: %s [%.0f s]", n, v.pass ? "PASS" : "FAIL", title.c_str(),
                          v.detail.c_str(), seconds_since(t0));
    std::cout << line << std::endl;
    summary << line << std::endl;
    verdicts.emplace_back(n, v);
  };

  report(1, "gradient check", gradients);
  report(2, "QF fixed output length", fixed_length);
  report(3, "SegQF output length", segment_length);
  report(4, "stacked linear equals strided conv", conv_equivalence);
  report(5, "WER against brute force", wer_oracle);

  if (wanted(6) || wanted(7) || wanted(8) || wanted(9) || wanted(10)) {
    std::unique_ptr<Lab> lab;
    try {
      lab = std::make_unique<Lab>(work, finetune_steps);
    } catch (const std::exception& e) {
      std::cerr << "setup failed: " << e.what() << "\n";
      return 2;
    }
    report(6, "toy end-to-end", [&] { return toy_end_to_end(*lab); });
    report(7, "concatenation lowers deletions", [&] { return concat_direction(*lab); });
    report(8, "segmented QF wins on long inputs", [&] { return segment_direction(*lab); });
    report(9, "determinism", [&] { return determinism(*lab); });
    report(10, "frozen contract", [&] { return frozen_contract(*lab); });
  }

  int failed = 0;
  for (const auto& [n, v] : verdicts) failed += !v.pass;
  const auto tail = fmt("%zu criteria run, %d failed", verdicts.size(), failed);
  std::cout << tail << std::endl;
  summary << tail << std::endl;
  return failed == 0 ? 0 : 1;
}
