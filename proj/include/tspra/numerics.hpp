#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tspra {

/// Streaming mean / sum-of-squared-deviations accumulator (Welford).
/// Variance uses the population convention m2 / count.
struct RunningMoments {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x);
  double variance() const { return count == 0 ? 0.0 : m2 / static_cast<double>(count); }

  static RunningMoments of(std::span<const double> xs);
};

/// Psi(x) by upward recurrence past 6 followed by the asymptotic series.
/// Throws std::domain_error for x <= 0.
double digamma(double x);

/// log Gamma(x), thread safe.
double log_gamma(double x);

/// log B(a, b) = log Gamma(a) + log Gamma(b) - log Gamma(a + b).
double log_beta(double a, double b);

double log_sum_exp(std::span<const double> scores);

/// exp(scores - logsumexp(scores)). Entries may be -inf, at least one must be finite.
std::vector<double> normalize_log(std::span<const double> scores);

/// In-place variant used by the inference hot loops.
void normalize_log_inplace(std::span<double> scores);

/// E[log x_i] = Psi(params_i) - Psi(sum params) for x ~ Dirichlet(params).
std::vector<double> expected_log_dirichlet(std::span<const double> params);

/// Replace `old_value` (currently part of the moments) with `new_value` in O(1).
RunningMoments swap_moments(const RunningMoments& rm, double old_value, double new_value);

/// Truncated GEM weights: pi_k = b_k prod_{l<k}(1 - b_l) for k < K - 1 and the final
/// component takes the remaining stick so the result sums to one.
std::vector<double> stick_weights(std::span<const double> fractions, std::size_t K);

/// Digamma-form expected log stick weights E[log pi_k] for beta(a_k, b_k) sticks stored
/// as interleaved pairs (a_0, b_0, a_1, b_1, ...).
std::vector<double> expected_log_sticks(std::span<const double> pairs);

}  // namespace tspra
