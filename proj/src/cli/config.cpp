// Copyright 2026 The bridgekit Authors
//
// Licensed under the Apache License, Version 2.0

#include "bridgekit/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace bridgekit {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string num(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string num(long v) { return std::to_string(v); }
std::string num(std::uint64_t v) { return std::to_string(v); }
std::string flag(bool v) { return v ? "true" : "false"; }

std::string list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + num(v[i]);
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) throw ConfigError("config: " + key + ": bad number '" + text + "'");
  return v;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& origin) {
  KeyValueConfig kv;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (kv.values_.count(key)) throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key " + key);
    kv.values_[key] = trim(t.substr(eq + 1));
  }
  return kv;
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse(in, path.string());
}

void KeyValueConfig::set(const std::string& key, const std::string& value) { values_[key] = value; }

void KeyValueConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || trim(assignment.substr(0, eq)).empty()) {
    throw ConfigError("expected key=value, got '" + assignment + "'");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  used_.insert(key);
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  return v ? parse_number<double>(key, *v) : fallback;
}

long KeyValueConfig::get_long(const std::string& key, long fallback) const {
  auto v = get(key);
  return v ? parse_number<long>(key, *v) : fallback;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto v = get(key);
  return v ? parse_number<std::uint64_t>(key, *v) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("config: " + key + ": expected true or false, got '" + *v + "'");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::vector<double> out;
  std::stringstream ss(*v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<double>(key, item));
  }
  return out;
}

void KeyValueConfig::check_all_used() const {
  std::string unknown;
  for (const auto& [k, v] : values_) {
    if (!used_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
  }
  if (!unknown.empty()) throw ConfigError("config: unknown keys: " + unknown);
}

std::string KeyValueConfig::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

ExperimentConfig ExperimentConfig::from(const KeyValueConfig& kv) {
  ExperimentConfig c;
  c.out_dir = kv.get_string("paths.out", c.out_dir);

  auto& t = c.task;
  t.vocab = static_cast<int>(kv.get_long("task.vocab", t.vocab));
  t.min_len = static_cast<int>(kv.get_long("task.min_len", t.min_len));
  t.max_len = static_cast<int>(kv.get_long("task.max_len", t.max_len));
  t.r = kv.get_long("task.r", t.r);
  t.noise_sigma = kv.get_double("task.noise", t.noise_sigma);
  t.frame_rate_hz = kv.get_double("task.frame_rate", t.frame_rate_hz);
  t.d_x = kv.get_long("task.d_x", t.d_x);
  t.window = kv.get_long("task.window", t.window);
  t.seed = kv.get_u64("task.seed", t.seed);
  t.successors = static_cast<int>(kv.get_long("task.successors", t.successors));
  t.sparse_mass = kv.get_double("task.sparse_mass", t.sparse_mass);
  t.identity_mixing = kv.get_bool("task.identity_mixing", t.identity_mixing);
  t.frame_position_code = kv.get_bool("task.frame_position_code", t.frame_position_code);

  auto& d = c.data;
  d.n_train = kv.get_long("data.train", d.n_train);
  d.n_valid = kv.get_long("data.valid", d.n_valid);
  d.n_test = kv.get_long("data.test", d.n_test);
  d.chapter_size = kv.get_long("data.chapter_size", d.chapter_size);

  auto& dec = c.decoder;
  dec.model.vocab = t.vocab + 2;
  dec.model.d_t = kv.get_long("decoder.d_t", dec.model.d_t);
  dec.model.layers = kv.get_long("decoder.layers", dec.model.layers);
  dec.model.heads = kv.get_long("decoder.heads", dec.model.heads);
  dec.model.ffn = kv.get_long("decoder.ffn", dec.model.ffn);
  dec.model.max_context = kv.get_long("decoder.max_context", dec.model.max_context);
  auto& p = dec.pretrain;
  p.steps = kv.get_long("decoder.pretrain_steps", p.steps);
  p.batch_size = kv.get_long("decoder.pretrain_batch", p.batch_size);
  p.adam.learning_rate = kv.get_double("decoder.pretrain_lr", p.adam.learning_rate);
  p.prompt_noise = kv.get_double("decoder.prompt_noise", p.prompt_noise);
  p.max_silent = static_cast<int>(kv.get_long("decoder.max_silent", p.max_silent));
  p.max_distractors = static_cast<int>(kv.get_long("decoder.max_distractors", p.max_distractors));
  p.max_zero_rows = static_cast<int>(kv.get_long("decoder.max_zero_rows", p.max_zero_rows));
  p.seed = kv.get_u64("decoder.seed", p.seed);
  dec.corpus_size = kv.get_long("decoder.corpus_size", dec.corpus_size);
  dec.corpus_max_len = static_cast<int>(kv.get_long("decoder.corpus_max_len", dec.corpus_max_len));
  dec.cache = kv.get_string("decoder.cache", dec.cache);

  auto& k = c.connector;
  k.kind = parse_connector_kind(kv.get_string("connector.kind", to_string(k.kind)));
  k.d_x = t.d_x;
  k.d_t = dec.model.d_t;
  k.m = kv.get_long("connector.m", k.m);
  k.fc_hidden = kv.get_long("connector.fc_hidden", k.fc_hidden);
  k.s = kv.get_long("connector.s", k.s);
  k.ca_heads = kv.get_long("connector.ca_heads", k.ca_heads);
  k.n_q = kv.get_long("connector.n_q", k.n_q);
  k.d_q = kv.get_long("connector.d_q", k.d_q);
  k.n_blocks = kv.get_long("connector.n_blocks", k.n_blocks);
  k.n_heads = kv.get_long("connector.n_heads", k.n_heads);
  k.segment_len = kv.get_long("connector.segment_len", t.window);

  c.concat.enabled = kv.get_bool("concat.enabled", c.concat.enabled);
  c.concat.t_max_upper = kv.get_double("concat.t_max", c.concat.t_max_upper);

  auto& tr = c.training;
  tr.steps = kv.get_long("training.steps", tr.steps);
  tr.batch_size = kv.get_long("training.batch_size", tr.batch_size);
  tr.learning_rate = kv.get_double("training.learning_rate", tr.learning_rate);
  tr.warmup_steps = kv.get_long("training.warmup_steps", tr.warmup_steps);
  if (!kv.has("training.seed")) throw ConfigError("config: training.seed is required");
  tr.seed = kv.get_u64("training.seed", 0);
  tr.validate_every = kv.get_long("training.validate_every", tr.validate_every);
  tr.init_checkpoint = kv.get_string("training.init", tr.init_checkpoint);
  tr.keep_last = kv.get_bool("training.keep_last", tr.keep_last);

  auto& e = c.eval;
  e.longform = kv.get_doubles("eval.longform", e.longform);
  e.buckets = kv.get_doubles("eval.buckets", e.buckets);
  e.tokens_per_second = kv.get_double("eval.tokens_per_second", e.tokens_per_second);
  e.extra_tokens = kv.get_long("eval.extra_tokens", e.extra_tokens);

  kv.check_all_used();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  auto c = from(KeyValueConfig::load(path));
  c.check_paths();
  return c;
}

void ExperimentConfig::check_paths() const {
  if (!training.init_checkpoint.empty() && !std::filesystem::exists(training.init_checkpoint)) {
    throw ConfigError("training: init checkpoint " + training.init_checkpoint + " does not exist");
  }
}

KeyValueConfig ExperimentConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("paths.out", out_dir);
  kv.set("task.vocab", num(static_cast<long>(task.vocab)));
  kv.set("task.min_len", num(static_cast<long>(task.min_len)));
  kv.set("task.max_len", num(static_cast<long>(task.max_len)));
  kv.set("task.r", num(static_cast<long>(task.r)));
  kv.set("task.noise", num(task.noise_sigma));
  kv.set("task.frame_rate", num(task.frame_rate_hz));
  kv.set("task.d_x", num(static_cast<long>(task.d_x)));
  kv.set("task.window", num(static_cast<long>(task.window)));
  kv.set("task.seed", num(task.seed));
  kv.set("task.successors", num(static_cast<long>(task.successors)));
  kv.set("task.sparse_mass", num(task.sparse_mass));
  kv.set("task.identity_mixing", flag(task.identity_mixing));
  kv.set("task.frame_position_code", flag(task.frame_position_code));
  kv.set("data.train", num(data.n_train));
  kv.set("data.valid", num(data.n_valid));
  kv.set("data.test", num(data.n_test));
  kv.set("data.chapter_size", num(data.chapter_size));
  kv.set("decoder.d_t", num(static_cast<long>(decoder.model.d_t)));
  kv.set("decoder.layers", num(static_cast<long>(decoder.model.layers)));
  kv.set("decoder.heads", num(static_cast<long>(decoder.model.heads)));
  kv.set("decoder.ffn", num(static_cast<long>(decoder.model.ffn)));
  kv.set("decoder.max_context", num(static_cast<long>(decoder.model.max_context)));
  kv.set("decoder.pretrain_steps", num(decoder.pretrain.steps));
  kv.set("decoder.pretrain_batch", num(decoder.pretrain.batch_size));
  kv.set("decoder.pretrain_lr", num(decoder.pretrain.adam.learning_rate));
  kv.set("decoder.prompt_noise", num(decoder.pretrain.prompt_noise));
  kv.set("decoder.max_silent", num(static_cast<long>(decoder.pretrain.max_silent)));
  kv.set("decoder.max_distractors", num(static_cast<long>(decoder.pretrain.max_distractors)));
  kv.set("decoder.max_zero_rows", num(static_cast<long>(decoder.pretrain.max_zero_rows)));
  kv.set("decoder.seed", num(decoder.pretrain.seed));
  kv.set("decoder.corpus_size", num(decoder.corpus_size));
  kv.set("decoder.corpus_max_len", num(static_cast<long>(decoder.corpus_max_len)));
  kv.set("decoder.cache", decoder.cache);
  kv.set("connector.kind", to_string(connector.kind));
  kv.set("connector.m", num(static_cast<long>(connector.m)));
  kv.set("connector.fc_hidden", num(static_cast<long>(connector.fc_hidden)));
  kv.set("connector.s", num(static_cast<long>(connector.s)));
  kv.set("connector.ca_heads", num(static_cast<long>(connector.ca_heads)));
  kv.set("connector.n_q", num(static_cast<long>(connector.n_q)));
  kv.set("connector.d_q", num(static_cast<long>(connector.d_q)));
  kv.set("connector.n_blocks", num(static_cast<long>(connector.n_blocks)));
  kv.set("connector.n_heads", num(static_cast<long>(connector.n_heads)));
  kv.set("connector.segment_len", num(static_cast<long>(connector.segment_len)));
  kv.set("concat.enabled", flag(concat.enabled));
  kv.set("concat.t_max", num(concat.t_max_upper));
  kv.set("training.steps", num(training.steps));
  kv.set("training.batch_size", num(training.batch_size));
  kv.set("training.learning_rate", num(training.learning_rate));
  kv.set("training.warmup_steps", num(training.warmup_steps));
  kv.set("training.seed", num(training.seed));
  kv.set("training.validate_every", num(training.validate_every));
  kv.set("training.init", training.init_checkpoint);
  kv.set("training.keep_last", flag(training.keep_last));
  kv.set("eval.longform", list(eval.longform));
  kv.set("eval.buckets", list(eval.buckets));
  kv.set("eval.tokens_per_second", num(eval.tokens_per_second));
  kv.set("eval.extra_tokens", num(eval.extra_tokens));
  return kv;
}

void ExperimentConfig::validate() const {
  task.validate();
  decoder.model.validate();
  connector.validate();
  concat.validate();
  if (data.n_train < 1 || data.n_valid < 1 || data.n_test < 1) throw ConfigError("data: split sizes must be >= 1");
  if (data.chapter_size < 1) throw ConfigError("data: chapter_size must be >= 1");
  if (decoder.corpus_size < 1 || decoder.corpus_max_len < 1) throw ConfigError("decoder: corpus settings must be >= 1");
  if (decoder.pretrain.steps < 0 || decoder.pretrain.batch_size < 1) throw ConfigError("decoder: bad pretraining schedule");
  if (training.steps < 0 || training.batch_size < 1) throw ConfigError("training: steps >= 0 and batch_size >= 1");
  if (training.learning_rate < 0.0 || training.warmup_steps < 0) throw ConfigError("training: bad learning rate or warmup");
  if (training.validate_every < 1) throw ConfigError("training: validate_every must be >= 1");
  for (double t : eval.longform) LongformSpec{t}.validate();
  if (eval.buckets.size() < 2 || !std::is_sorted(eval.buckets.begin(), eval.buckets.end()) ||
      std::adjacent_find(eval.buckets.begin(), eval.buckets.end()) != eval.buckets.end()) {
    throw ConfigError("eval: buckets need at least two increasing edges");
  }
  if (!(eval.tokens_per_second > 0.0) || eval.extra_tokens < 0) throw ConfigError("eval: bad decode budget");
}

}  // namespace bridgekit
