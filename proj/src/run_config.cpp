#include "hehr/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hehr/errors.hpp"

namespace hehr {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': '" + v + "' is not a valid integer");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': '" + v + "' is not a valid number");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key '" + key + "': '" + v + "' is not a boolean");
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt(bool b) { return b ? "true" : "false"; }

bool set_model_key(ModelConfig& m, const std::string& key, const std::string& value) {
  auto& e = m.encoder;
  if (key == "embedding_dim") e.embedding_dim = parse_int<std::size_t>(key, value);
  else if (key == "num_layers") e.num_layers = parse_int<std::size_t>(key, value);
  else if (key == "activation") e.activation = parse_activation(value);
  else if (key == "mode") m.mode = parse_mode(value);
  else if (key == "inductive_init_value") e.inductive_init_value = parse_double(key, value);
  else if (key == "batch_norm") e.batch_norm = parse_bool(key, value);
  else if (key == "self_residual") e.self_residual = parse_bool(key, value);
  else if (key == "use_qualifiers") e.use_qualifiers = parse_bool(key, value);
  else if (key == "relation_update") {
    if (value == "edge_instances") e.relation_update = RelationUpdate::edge_instances;
    else if (value == "direct_transform") e.relation_update = RelationUpdate::direct_transform;
    else throw ConfigError("unknown relation_update '" + value + "'");
  }
  else if (key == "decoder") m.decoder = parse_decoder(value);
  else if (key == "hype_filters") m.hype.num_filters = parse_int<std::size_t>(key, value);
  else if (key == "hype_width") m.hype.width = parse_int<std::size_t>(key, value);
  else if (key == "hype_stride") m.hype.stride = parse_int<std::size_t>(key, value);
  else if (key == "hype_max_arity") m.hype.max_arity = parse_int<std::size_t>(key, value);
  else return false;
  return true;
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = {
      "train", "valid", "test", "checkpoint", "report", "log", "resume",
      "embedding_dim", "num_layers", "activation", "mode", "inductive_init_value", "batch_norm",
      "self_residual", "use_qualifiers", "relation_update", "decoder", "hype_filters", "hype_width",
      "hype_stride", "hype_max_arity", "negative_ratio", "batch_size", "epochs", "learning_rate",
      "adam_beta1", "adam_beta2", "adam_epsilon", "seed", "corrupt_qualifiers", "validate_every",
      "filtered", "ties", "workers"};
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "train") train_path = value;
  else if (key == "valid") valid_path = value;
  else if (key == "test") test_path = value;
  else if (key == "checkpoint") checkpoint_path = value;
  else if (key == "report") report_path = value;
  else if (key == "log") log_path = value;
  else if (key == "resume") resume_path = value;
  else if (set_model_key(model, key, value)) {}
  else if (key == "negative_ratio") train.negative_ratio = parse_int<std::size_t>(key, value);
  else if (key == "batch_size") train.batch_size = parse_int<std::size_t>(key, value);
  else if (key == "epochs") train.epochs = parse_int<std::size_t>(key, value);
  else if (key == "learning_rate") train.learning_rate = parse_double(key, value);
  else if (key == "adam_beta1") train.adam_beta1 = parse_double(key, value);
  else if (key == "adam_beta2") train.adam_beta2 = parse_double(key, value);
  else if (key == "adam_epsilon") train.adam_epsilon = parse_double(key, value);
  else if (key == "seed") train.seed = parse_int<std::uint64_t>(key, value);
  else if (key == "corrupt_qualifiers") train.corrupt_qualifiers = parse_bool(key, value);
  else if (key == "validate_every") train.validate_every = parse_int<std::size_t>(key, value);
  else if (key == "filtered") rank.filtered = parse_bool(key, value);
  else if (key == "ties") {
    if (value == "pessimistic") rank.ties = TieBreak::pessimistic;
    else if (value == "optimistic") rank.ties = TieBreak::optimistic;
    else throw ConfigError("unknown ties '" + value + "'");
  }
  else if (key == "workers") workers = parse_int<std::size_t>(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

ConfigMap model_config_to_map(const ModelConfig& m) {
  const auto& e = m.encoder;
  return {
      {"embedding_dim", std::to_string(e.embedding_dim)},
      {"num_layers", std::to_string(e.num_layers)},
      {"activation", to_string(e.activation)},
      {"mode", to_string(m.mode)},
      {"inductive_init_value", fmt(e.inductive_init_value)},
      {"batch_norm", fmt(e.batch_norm)},
      {"self_residual", fmt(e.self_residual)},
      {"use_qualifiers", fmt(e.use_qualifiers)},
      {"relation_update",
       e.relation_update == RelationUpdate::edge_instances ? "edge_instances" : "direct_transform"},
      {"decoder", to_string(m.decoder)},
      {"hype_filters", std::to_string(m.hype.num_filters)},
      {"hype_width", std::to_string(m.hype.width)},
      {"hype_stride", std::to_string(m.hype.stride)},
      {"hype_max_arity", std::to_string(m.hype.max_arity)},
  };
}

ModelConfig model_config_from_map(const ConfigMap& values) {
  ModelConfig m;
  for (const auto& [k, v] : values) set_model_key(m, k, v);
  m.hype.dim = m.dim();
  return m;
}

std::map<std::string, std::string> RunConfig::to_map() const {
  ConfigMap out = model_config_to_map(model);
  auto put = [&](const char* k, const std::string& v) {
    if (!v.empty()) out[k] = v;
  };
  put("train", train_path);
  put("valid", valid_path);
  put("test", test_path);
  put("checkpoint", checkpoint_path);
  put("report", report_path);
  put("log", log_path);
  put("resume", resume_path);
  out["negative_ratio"] = std::to_string(train.negative_ratio);
  out["batch_size"] = std::to_string(train.batch_size);
  out["epochs"] = std::to_string(train.epochs);
  out["learning_rate"] = fmt(train.learning_rate);
  out["adam_beta1"] = fmt(train.adam_beta1);
  out["adam_beta2"] = fmt(train.adam_beta2);
  out["adam_epsilon"] = fmt(train.adam_epsilon);
  out["seed"] = std::to_string(train.seed);
  out["corrupt_qualifiers"] = fmt(train.corrupt_qualifiers);
  out["validate_every"] = std::to_string(train.validate_every);
  out["filtered"] = fmt(rank.filtered);
  out["ties"] = rank.ties == TieBreak::pessimistic ? "pessimistic" : "optimistic";
  out["workers"] = std::to_string(workers);
  return out;
}

void RunConfig::validate(bool require_train) const {
  model.validate();
  train.validate();
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (require_train && train_path.empty()) throw ConfigError("no training file configured (key 'train')");
  for (const auto* p : {&train_path, &valid_path, &test_path, &resume_path}) {
    if (!p->empty() && !std::filesystem::exists(*p)) throw ConfigError("input file '" + *p + "' does not exist");
  }
}

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(n) + ": expected 'key = value'");
    }
    const auto key = trim(t.substr(0, eq));
    const auto value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(n) + ": empty key");
    out[key] = value;
  }
  return out;
}

ConfigMap read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

RunConfig make_run_config(const ConfigMap& values) {
  RunConfig cfg;
  for (const auto& [k, v] : values) cfg.set(k, v);
  return cfg;
}

}  // namespace hehr
