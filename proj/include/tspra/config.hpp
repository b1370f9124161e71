#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>

#include "tspra/inference.hpp"
#include "tspra/state.hpp"
#include "tspra/svi.hpp"

namespace tspra {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TrainMode { batch, stochastic, online };

std::string to_string(TrainMode mode);
TrainMode parse_mode(const std::string& name);

/// "plugin" or "ratio"; digamma is reserved for training.
ExpectationMode parse_prediction_expectation(const std::string& name);

/// Everything a training or prediction run depends on.
struct RunConfig {
  Hyperparams hp;
  TrainMode mode = TrainMode::batch;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  // stop rules
  std::size_t max_iters = 200;
  double max_seconds = std::numeric_limits<double>::infinity();
  double tolerance = 1e-4;
  std::size_t window = 3;
  std::size_t inner_sweeps = 1;
  std::size_t probe_size = 1000;

  // prediction
  std::size_t predict_iters = 30;
  double predict_tolerance = 1e-4;
  std::string predict_expectation = "plugin";

  // stochastic
  std::size_t max_steps = 0;  // 0 = one pass over the corpus per max_iters
  std::string schedule = "inverse_t";
  double schedule_value = 1.0;
  bool with_replacement = false;
  std::size_t probe_every = 0;
  double local_tolerance = 1e-4;
  std::size_t local_rounds = 20;

  // online
  std::size_t base = 1000;
  std::size_t batch_size = 100;
  std::size_t batch_cap = 20;
  double online_tolerance = 1e-4;
  std::string online_schedule = "fixed_ratio";
  double online_schedule_value = 1.0;

  // paths
  std::string corpus;
  std::string checkpoint;
  std::string log;
  std::string trend;

  /// Throws ConfigError describing the first invalid field.
  void validate() const;

  TrainOptions train_options() const;
  PredictOptions predict_options() const;
  StochasticOptions stochastic_options(std::size_t num_docs) const;
  OnlineConfig online_config() const;
  OnlineOptions online_options() const;

  std::string to_json() const;
  /// Starts from `base` and overrides the keys present; unknown keys throw ConfigError.
  static RunConfig from_json(const std::string& text, const RunConfig& base);
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::filesystem::path& path, const RunConfig& base);
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

}  // namespace tspra
