#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tspra/corpus.hpp"
#include "tspra/regression.hpp"

namespace tspra {

struct Hyperparams {
  double alpha = 1.0 + 1e-10;  // corpus-level stick concentration
  double beta = 1.0 + 1e-10;   // document-level stick concentration
  double theta = 0.1;          // symmetric topic-word Dirichlet
  std::vector<double> lambda{1.0, 1.0, 1.0};
  std::vector<double> eta{1.0, 1.0};
  std::size_t K = 100;
  std::size_t T = 10;
  std::size_t mc_samples = 50;
  double epsilon = 1e-300;
  Levels levels;
  /// theta_t starts at theta + U[0, perturbation * theta].
  double perturbation = 0.1;

  std::size_t S() const { return levels.num_sentiment(); }
  std::size_t U() const { return levels.num_preference(); }
  void validate() const;
};

/// Corpus-level variational parameters, all in standard (not natural) parameterization.
struct GlobalState {
  std::size_t K = 0, V = 0, C = 0, S = 0, U = 0;
  std::vector<double> alpha_t;   // K x 2
  std::vector<double> theta_t;   // K x V
  std::vector<double> lambda_t;  // K x V x S
  std::vector<double> eta_t;     // K x C x U

  /// Every block at its prior, no perturbation.
  static GlobalState priors(const Hyperparams& hp, std::size_t V, std::size_t C);

  std::span<double> theta_row(std::size_t k) { return {theta_t.data() + k * V, V}; }
  std::span<const double> theta_row(std::size_t k) const { return {theta_t.data() + k * V, V}; }
  std::span<double> lambda_cell(std::size_t k, std::size_t v) {
    return {lambda_t.data() + (k * V + v) * S, S};
  }
  std::span<const double> lambda_cell(std::size_t k, std::size_t v) const {
    return {lambda_t.data() + (k * V + v) * S, S};
  }
  std::span<double> eta_cell(std::size_t k, std::size_t c) {
    return {eta_t.data() + (k * C + c) * U, U};
  }
  std::span<const double> eta_cell(std::size_t k, std::size_t c) const {
    return {eta_t.data() + (k * C + c) * U, U};
  }

  bool same_shape(const GlobalState& o) const {
    return K == o.K && V == o.V && C == o.C && S == o.S && U == o.U;
  }
  /// Extends the vocabulary / user dimensions; new rows start at the priors.
  void grow(std::size_t new_V, std::size_t new_C, const Hyperparams& hp);

  bool operator==(const GlobalState&) const = default;
};

/// Per-document variational parameters.
struct DocState {
  std::size_t n = 0, T = 0, K = 0, S = 0, U = 0;
  std::vector<double> beta_t;  // T x 2
  std::vector<double> xi_t;    // T x K
  std::vector<double> phi_t;   // n x T
  std::vector<double> rho_t;   // n x S
  std::vector<double> nu_t;    // n x U
  /// Nonempty when some rho rows are pinned (lexicon override); 1 = pinned.
  std::vector<std::uint8_t> rho_fixed;

  /// Uniform rows, sticks at (1, beta).
  static DocState uniform(std::size_t n, const Hyperparams& hp);

  std::span<double> xi_row(std::size_t t) { return {xi_t.data() + t * K, K}; }
  std::span<const double> xi_row(std::size_t t) const { return {xi_t.data() + t * K, K}; }
  std::span<double> phi_row(std::size_t j) { return {phi_t.data() + j * T, T}; }
  std::span<const double> phi_row(std::size_t j) const { return {phi_t.data() + j * T, T}; }
  std::span<double> rho_row(std::size_t j) { return {rho_t.data() + j * S, S}; }
  std::span<const double> rho_row(std::size_t j) const { return {rho_t.data() + j * S, S}; }
  std::span<double> nu_row(std::size_t j) { return {nu_t.data() + j * U, U}; }
  std::span<const double> nu_row(std::size_t j) const { return {nu_t.data() + j * U, U}; }
  bool is_rho_fixed(std::size_t j) const { return !rho_fixed.empty() && rho_fixed[j] != 0; }
};

/// How E[log x] of a Dirichlet/beta global is evaluated: digamma form during training;
/// for prediction either log of the posterior mean (plugin) or the bare mean ratio x / |x|_1.
enum class ExpectationMode { digamma, ratio, plugin };

/// Expectations of the global factors for one document's words and author.
struct DocExpectations {
  std::size_t n = 0, K = 0, S = 0, U = 0;
  std::vector<double> stick;  // K:        E[log pi_k(b)]
  std::vector<double> word;   // n x K:     E[log phi_{k, w_j}]
  std::vector<double> sent;   // n x K x S: E[log sigma_{k, w_j}(s)]
  std::vector<double> pref;   // K x U:     E[log mu_{k, a_d}(u)]
};

/// Dense expectation tables for every (k, v) and (k, c); built once per global iteration.
class GlobalExpectations {
 public:
  GlobalExpectations(const GlobalState& g, ExpectationMode mode, std::size_t threads = 1);

  void gather(const Review& doc, DocExpectations& out) const;
  ExpectationMode mode() const { return mode_; }

 private:
  std::size_t K_, V_, C_, S_, U_;
  ExpectationMode mode_;
  std::vector<double> stick_, word_, sent_, pref_;
};

/// Computes a document's expectations directly from the globals, touching only the rows
/// it needs. Used by the single-document stochastic trainer.
void gather_direct(const GlobalState& g, ExpectationMode mode, const Review& doc,
                   std::span<const double> theta_row_sums, DocExpectations& out);
std::vector<double> theta_row_sums(const GlobalState& g);

}  // namespace tspra
