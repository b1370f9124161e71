#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tspra/analytics.hpp"
#include "tspra/corpus.hpp"
#include "tspra/inference.hpp"
#include "tspra/state.hpp"

namespace tspra {

struct ForgettingSchedule {
  enum class Kind { inverse_t, fixed_ratio, constant };
  Kind kind = Kind::inverse_t;
  /// inverse_t: offset added to t (r_t = 1 / (t + value)); fixed_ratio: multiplier on
  /// D_{t+1} / D_0; constant: the rate itself.
  double value = 1.0;

  /// r_t in (0, 1] for step t >= 1 and a batch of `batch_size` against base size `base_size`.
  double rate(std::size_t t, std::size_t batch_size = 1, std::size_t base_size = 1) const;
  void validate() const;

  static ForgettingSchedule inverse(double offset = 1.0) { return {Kind::inverse_t, offset}; }
  static ForgettingSchedule ratio(double multiplier = 1.0) { return {Kind::fixed_ratio, multiplier}; }
  static ForgettingSchedule fixed(double r) { return {Kind::constant, r}; }
};

std::string to_string(ForgettingSchedule::Kind kind);
ForgettingSchedule::Kind parse_schedule_kind(const std::string& name);

/// The four global updates over `docs` only, each document's contribution multiplied by
/// `scale`, priors counted once.
GlobalState intermediate_globals(std::span<const DocRef> docs, double scale, const Hyperparams& hp,
                                 std::size_t V, std::size_t C, std::size_t threads = 1);

/// (1 - r) old + r intermediate, componentwise. r = 0 and r = 1 return exact copies.
GlobalState merge(const GlobalState& old, const GlobalState& intermediate, double r);

struct LocalConvergence {
  double tolerance = 1e-4;
  std::size_t max_rounds = 20;
};

struct StochasticOptions {
  std::uint64_t seed = 0;
  std::size_t max_steps = std::numeric_limits<std::size_t>::max();
  /// Budget on training time; probe evaluations are not counted.
  double max_seconds = std::numeric_limits<double>::infinity();
  ForgettingSchedule schedule;
  bool with_replacement = false;
  LocalConvergence local;
  /// Steps between probe MAE evaluations; 0 disables them.
  std::size_t probe_every = 0;
  std::size_t probe_size = 1000;
  PredictOptions predict;
  std::function<bool(const IterationRecord&, const GlobalState&)> on_probe;
};

struct StochasticResult {
  GlobalState globals;
  std::size_t steps = 0;
  double train_seconds = 0.0;
  /// iteration = step of each probe evaluation.
  std::vector<IterationRecord> history;
};

/// Single-document stochastic training from the perturbed-prior initialization.
StochasticResult train_stochastic(const Corpus& corpus, const Hyperparams& hp,
                                  const StochasticOptions& opts);

/// Continues stochastic training from `start` for the steps t = first_step, first_step + 1, ...
StochasticResult continue_stochastic(const Corpus& corpus, const Hyperparams& hp,
                                     const GlobalState& start, std::size_t first_step,
                                     const StochasticOptions& opts);

struct OnlineConfig {
  std::size_t base_size = 1000;  // D_0
  /// Inner intermediate/merge rounds per batch: min(batch_cap, D_{t+1}).
  std::size_t batch_cap = 20;
  double tolerance = 1e-4;
  ForgettingSchedule schedule = ForgettingSchedule::ratio();
  LocalConvergence local;
  void validate() const;
};

struct OnlineOptions {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  TrainOptions base;  // batch training on the base corpus; seed/threads overridden
};

struct OnlineResult {
  GlobalState globals;
  TrendSeries trend;
  std::vector<std::string> diagnostics;
  /// Inner rounds used per processed batch.
  std::vector<std::size_t> rounds;
};

/// Batch-trains on `base`, then folds in each batch in order. Batches may carry larger
/// registries than the base; new rows start at the priors.
OnlineResult train_online(const Corpus& base, std::span<const Corpus> batches,
                          const OnlineConfig& cfg, const Hyperparams& hp, const OnlineOptions& opts);

/// Splits a time-ordered corpus into the first `base_size` reviews and consecutive batches
/// of `batch_size`.
struct StreamSplit {
  Corpus base;
  std::vector<Corpus> batches;
};
StreamSplit split_stream(const Corpus& corpus, std::size_t base_size, std::size_t batch_size);

}  // namespace tspra
