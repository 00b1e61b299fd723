// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#include "bridgekit/cli/commands.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
  using namespace bridgekit;
  CLI::App app{"bridgekit: speech-to-LLM connector experiments on a synthetic task"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only print results");

  std::string config, ckpt, manifest, axis, spec, out_dir;
  std::vector<std::string> overrides;
  std::optional<double> longform;
  std::vector<std::uint64_t> seeds{1, 2, 3};

  auto* train = app.add_subcommand("train", "Train a connector");
  train->add_option("--config", config, "Config file (key = value)")->required()->check(CLI::ExistingFile);
  train->add_option("--set", overrides, "Override a setting, key=value");

  auto* eval = app.add_subcommand("eval", "Decode and score a manifest");
  eval->add_option("--ckpt", ckpt, "Checkpoint")->required();
  eval->add_option("--manifest", manifest, "Manifest (TSV)")->required();
  eval->add_option("--longform", longform, "Concatenate chapters up to T seconds first");
  eval->add_option("--out", out_dir, "Report directory (default: next to the checkpoint)");

  auto* sweep = app.add_subcommand("sweep", "Train and evaluate along one config axis");
  sweep->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--axis", axis, "key=v1,v2,... e.g. connector.n_q=4,8,16,32")->required();
  sweep->add_option("--set", overrides, "Override a setting, key=value");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every connector and the loss head");
  gradcheck->add_option("--seeds", seeds, "Seeds");

  auto* make_data = app.add_subcommand("make-data", "Write synthetic manifests and features");
  make_data->add_option("--spec", spec, "Spec file (task.*, data.*, paths.out)")->required()->check(CLI::ExistingFile);
  make_data->add_option("--set", overrides, "Override a setting, key=value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  CommandContext ctx{&std::cout, &std::cerr, {}};
  if (!quiet) ctx.log = [](const std::string& line) { std::cerr << line << "\n"; };

  if (*train) return cmd_train(config, overrides, ctx);
  if (*eval) {
    std::optional<std::filesystem::path> dir;
    if (!out_dir.empty()) dir = out_dir;
    return cmd_eval(ckpt, manifest, longform, dir, ctx);
  }
  if (*sweep) return cmd_sweep(config, axis, overrides, ctx);
  if (*gradcheck) return cmd_gradcheck(seeds, ctx);
  if (*make_data) return cmd_make_data(spec, overrides, ctx);
  return kExitUsage;
}
