#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "tspra/corpus.hpp"
#include "tspra/state.hpp"

namespace tspra {

/// Coefficients multiplying E[h1] and E[h2] in the rho/nu rating term. In training they
/// are (log r_d, log(1 - r_d)); in prediction the digamma expectations under r~_d.
struct RatingCoefficients {
  double on_h1;
  double on_h2;
};

inline RatingCoefficients coefficients_of(RatingLogs logs) {
  return {logs.log_r, logs.log_one_minus_r};
}

// ---- local (per-document) coordinate updates ------------------------------------------

/// xi_{d,t}(k) from the stick term plus the phi-weighted topic, preference and sentiment
/// expectations. `include_stick = false` drops the corpus stick term (initial pass).
void update_xi(const Review& doc, DocState& st, const DocExpectations& ex, bool include_stick = true);

/// phi_{d,j}(t) from the document stick (always digamma form) and the xi-weighted terms.
void update_phi(const Review& doc, DocState& st, const DocExpectations& ex);

/// beta~_{d,t} = (1 + sum_j phi_j(t), beta + sum_j sum_{t' > t} phi_j(t')).
void update_beta_doc(DocState& st, double beta);

/// rho~ then nu~ for each word in order; samples are drawn once from the current rows and
/// each word is redrawn after its update.
void update_rho_nu(const Review& doc, DocState& st, const DocExpectations& ex,
                   RatingCoefficients rating, const Hyperparams& hp, Rng& rng);

/// omega_{j,k} = sum_t phi_j(t) xi_t(k), the word's effective topic responsibility.
void topic_responsibilities(const DocState& st, std::span<double> omega);

/// One local sweep in the order xi, phi, rho/nu, beta.
void local_sweep(const Review& doc, DocState& st, const DocExpectations& ex,
                 RatingCoefficients rating, const Hyperparams& hp, Rng& rng);

/// Initial xi (without the stick term) and phi for uniform phi/rho/nu rows.
void init_local(const Review& doc, DocState& st, const DocExpectations& ex);

// ---- global updates ------------------------------------------------------------------

struct DocRef {
  const Review* review;
  const DocState* state;
};

std::vector<DocRef> doc_refs(const Corpus& corpus, const std::vector<DocState>& states);

/// Priors plus `scale` times the summed document contributions for all four blocks.
/// Reduction order is by document then word for every entry, independent of `threads`.
GlobalState accumulate_globals(std::span<const DocRef> docs, const Hyperparams& hp,
                               std::size_t V, std::size_t C, double scale = 1.0,
                               std::size_t threads = 1);

std::vector<double> update_theta(std::span<const DocRef> docs, const Hyperparams& hp,
                                 std::size_t V, std::size_t C);
std::vector<double> update_lambda(std::span<const DocRef> docs, const Hyperparams& hp,
                                  std::size_t V, std::size_t C);
std::vector<double> update_eta(std::span<const DocRef> docs, const Hyperparams& hp,
                               std::size_t V, std::size_t C);
std::vector<double> update_alpha(std::span<const DocRef> docs, const Hyperparams& hp);

// ---- initialization and batch training -----------------------------------------------

struct InitState {
  GlobalState globals;
  std::vector<DocState> docs;
};

/// Priors with a uniform perturbation of theta~, then one xi/phi pass per document.
InitState init_state(const Corpus& corpus, const Hyperparams& hp, std::uint64_t seed,
                     std::size_t threads = 1);

/// Prior globals with the symmetry-breaking perturbation on theta~.
GlobalState init_globals(const Hyperparams& hp, std::size_t V, std::size_t C, std::uint64_t seed);

struct StopRule {
  double relative_tolerance = 1e-4;
  std::size_t window = 3;
  std::size_t max_iterations = 200;
  double max_seconds = std::numeric_limits<double>::infinity();  // training time, probes excluded
};

struct PredictOptions {
  std::size_t max_iterations = 30;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  ExpectationMode expectation = ExpectationMode::plugin;
};

struct IterationRecord {
  std::size_t iteration;
  double mae;          // on the probe set, original rating scale
  double seconds;      // wall time of the sweep + global update only
  double elapsed;      // total wall time since training began
};

struct TrainOptions {
  StopRule stop;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::size_t inner_sweeps = 1;
  /// Documents used for the per-iteration training MAE; 0 = whole corpus.
  std::size_t probe_size = 1000;
  bool track_mae = true;
  PredictOptions predict;
  /// Called after each iteration; return false to stop early.
  std::function<bool(const IterationRecord&, const GlobalState&)> on_iteration;
};

struct TrainResult {
  GlobalState globals;
  std::vector<DocState> docs;
  std::vector<IterationRecord> history;
  std::size_t iterations = 0;
};

/// One batch iteration: local sweeps over every document against `globals`, then all
/// four global blocks recomputed from scratch.
GlobalState batch_iteration(const Corpus& corpus, std::vector<DocState>& docs,
                            const GlobalState& globals, const Hyperparams& hp,
                            std::uint64_t seed, std::size_t sweep, std::size_t threads,
                            std::size_t inner_sweeps = 1);

TrainResult train_batch(const Corpus& corpus, const Hyperparams& hp, const TrainOptions& opts);

/// Evenly spaced document indices, at most `size` of them (all when size == 0).
std::vector<std::size_t> probe_indices(std::size_t num_docs, std::size_t size);

/// Mean absolute error of predictions with frozen globals against the raw ratings.
double training_error(const GlobalState& globals, const Corpus& corpus, const Hyperparams& hp,
                      const PredictOptions& opts, std::span<const std::size_t> docs = {});

}  // namespace tspra
