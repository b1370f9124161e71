#include "tspra/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace tspra {

namespace {

using nlohmann::json;

// JSON has no infinity; an absent wall-clock limit is written as null.
json seconds_to_json(double s) { return std::isfinite(s) ? json(s) : json(nullptr); }

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::batch: return "batch";
    case TrainMode::stochastic: return "stochastic";
    case TrainMode::online: return "online";
  }
  return "?";
}

TrainMode parse_mode(const std::string& name) {
  if (name == "batch") return TrainMode::batch;
  if (name == "stochastic") return TrainMode::stochastic;
  if (name == "online") return TrainMode::online;
  throw ConfigError("unknown mode '" + name + "' (expected batch, stochastic or online)");
}

ExpectationMode parse_prediction_expectation(const std::string& name) {
  if (name == "plugin") return ExpectationMode::plugin;
  if (name == "ratio") return ExpectationMode::ratio;
  throw ConfigError("unknown prediction expectation '" + name + "' (expected plugin or ratio)");
}

void RunConfig::validate() const {
  try {
    hp.validate();
    online_config().validate();
    ForgettingSchedule{parse_schedule_kind(schedule), schedule_value}.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  if (window < 1) throw ConfigError("window must be at least 1");
  if (!(max_seconds > 0.0)) throw ConfigError("max_seconds must be positive");
  if (!(predict_tolerance > 0.0)) throw ConfigError("predict_tolerance must be positive");
  if (predict_iters < 1) throw ConfigError("predict_iters must be at least 1");
  parse_prediction_expectation(predict_expectation);
  if (!(local_tolerance > 0.0)) throw ConfigError("local_tolerance must be positive");
  if (local_rounds < 1) throw ConfigError("local_rounds must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
}

TrainOptions RunConfig::train_options() const {
  TrainOptions o;
  o.stop = {tolerance, window, max_iters, max_seconds};
  o.seed = seed;
  o.threads = threads;
  o.inner_sweeps = inner_sweeps;
  o.probe_size = probe_size;
  o.predict = predict_options();
  return o;
}

PredictOptions RunConfig::predict_options() const {
  return {predict_iters, predict_tolerance, seed, threads, parse_prediction_expectation(predict_expectation)};
}

StochasticOptions RunConfig::stochastic_options(std::size_t num_docs) const {
  StochasticOptions o;
  o.seed = seed;
  o.max_steps = max_steps > 0 ? max_steps : max_iters * num_docs;
  o.max_seconds = max_seconds;
  o.schedule = {parse_schedule_kind(schedule), schedule_value};
  o.with_replacement = with_replacement;
  o.local = {local_tolerance, local_rounds};
  o.probe_every = probe_every;
  o.probe_size = probe_size;
  o.predict = predict_options();
  return o;
}

OnlineConfig RunConfig::online_config() const {
  OnlineConfig c;
  c.base_size = base;
  c.batch_cap = batch_cap;
  c.tolerance = online_tolerance;
  c.schedule = {parse_schedule_kind(online_schedule), online_schedule_value};
  c.local = {local_tolerance, local_rounds};
  return c;
}

OnlineOptions RunConfig::online_options() const {
  OnlineOptions o;
  o.seed = seed;
  o.threads = threads;
  o.base = train_options();
  return o;
}

std::string RunConfig::to_json() const {
  json j;
  j["alpha"] = hp.alpha;
  j["beta"] = hp.beta;
  j["theta"] = hp.theta;
  j["lambda"] = hp.lambda;
  j["eta"] = hp.eta;
  j["K"] = hp.K;
  j["T"] = hp.T;
  j["mc_samples"] = hp.mc_samples;
  j["epsilon"] = hp.epsilon;
  j["sentiment_levels"] = hp.levels.sentiment;
  j["preference_levels"] = hp.levels.preference;
  j["perturbation"] = hp.perturbation;
  j["mode"] = to_string(mode);
  j["seed"] = seed;
  j["threads"] = threads;
  j["max_iters"] = max_iters;
  j["max_seconds"] = seconds_to_json(max_seconds);
  j["tolerance"] = tolerance;
  j["window"] = window;
  j["inner_sweeps"] = inner_sweeps;
  j["probe_size"] = probe_size;
  j["predict_iters"] = predict_iters;
  j["predict_tolerance"] = predict_tolerance;
  j["predict_expectation"] = predict_expectation;
  j["max_steps"] = max_steps;
  j["schedule"] = schedule;
  j["schedule_value"] = schedule_value;
  j["with_replacement"] = with_replacement;
  j["probe_every"] = probe_every;
  j["local_tolerance"] = local_tolerance;
  j["local_rounds"] = local_rounds;
  j["base"] = base;
  j["batch_size"] = batch_size;
  j["batch_cap"] = batch_cap;
  j["online_tolerance"] = online_tolerance;
  j["online_schedule"] = online_schedule;
  j["online_schedule_value"] = online_schedule_value;
  j["corpus"] = corpus;
  j["checkpoint"] = checkpoint;
  j["log"] = log;
  j["trend"] = trend;
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text, const RunConfig& base_cfg) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const json known = json::parse(base_cfg.to_json());
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  RunConfig c = base_cfg;
  read(j, "alpha", c.hp.alpha);
  read(j, "beta", c.hp.beta);
  read(j, "theta", c.hp.theta);
  read(j, "lambda", c.hp.lambda);
  read(j, "eta", c.hp.eta);
  read(j, "K", c.hp.K);
  read(j, "T", c.hp.T);
  read(j, "mc_samples", c.hp.mc_samples);
  read(j, "epsilon", c.hp.epsilon);
  read(j, "sentiment_levels", c.hp.levels.sentiment);
  read(j, "preference_levels", c.hp.levels.preference);
  read(j, "perturbation", c.hp.perturbation);
  if (j.contains("mode")) {
    std::string m;
    read(j, "mode", m);
    c.mode = parse_mode(m);
  }
  read(j, "seed", c.seed);
  read(j, "threads", c.threads);
  read(j, "max_iters", c.max_iters);
  if (j.contains("max_seconds")) {
    if (j["max_seconds"].is_null()) c.max_seconds = std::numeric_limits<double>::infinity();
    else read(j, "max_seconds", c.max_seconds);
  }
  read(j, "tolerance", c.tolerance);
  read(j, "window", c.window);
  read(j, "inner_sweeps", c.inner_sweeps);
  read(j, "probe_size", c.probe_size);
  read(j, "predict_iters", c.predict_iters);
  read(j, "predict_tolerance", c.predict_tolerance);
  read(j, "predict_expectation", c.predict_expectation);
  read(j, "max_steps", c.max_steps);
  read(j, "schedule", c.schedule);
  read(j, "schedule_value", c.schedule_value);
  read(j, "with_replacement", c.with_replacement);
  read(j, "probe_every", c.probe_every);
  read(j, "local_tolerance", c.local_tolerance);
  read(j, "local_rounds", c.local_rounds);
  read(j, "base", c.base);
  read(j, "batch_size", c.batch_size);
  read(j, "batch_cap", c.batch_cap);
  read(j, "online_tolerance", c.online_tolerance);
  read(j, "online_schedule", c.online_schedule);
  read(j, "online_schedule_value", c.online_schedule_value);
  read(j, "corpus", c.corpus);
  read(j, "checkpoint", c.checkpoint);
  read(j, "log", c.log);
  read(j, "trend", c.trend);
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path, const RunConfig& base_cfg) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str(), base_cfg);
}

RunConfig RunConfig::from_json(const std::string& text) { return from_json(text, RunConfig{}); }

RunConfig RunConfig::load(const std::filesystem::path& path) { return load(path, RunConfig{}); }

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file: " + path.string());
  out << to_json() << '\n';
}

}  // namespace tspra
