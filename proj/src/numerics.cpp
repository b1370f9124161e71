#include "tspra/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace tspra {

void RunningMoments::push(double x) {
  ++count;
  const double delta = x - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta * (x - mean);
}

RunningMoments RunningMoments::of(std::span<const double> xs) {
  RunningMoments rm;
  for (double x : xs) rm.push(x);
  return rm;
}

double digamma(double x) {
  if (!(x > 0.0)) {
    throw std::domain_error("digamma: argument must be positive, got " + std::to_string(x));
  }
  double result = 0.0;
  while (x < 6.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double r = 1.0 / x;
  const double r2 = r * r;
  // Bernoulli series: 1/12, 1/120, 1/252, 1/240, 1/132, 691/32760, 1/12.
  const double series =
      r2 * (1.0 / 12 -
            r2 * (1.0 / 120 -
                  r2 * (1.0 / 252 -
                        r2 * (1.0 / 240 - r2 * (1.0 / 132 - r2 * (691.0 / 32760 - r2 * (1.0 / 12)))))));
  return result + std::log(x) - 0.5 * r - series;
}

double log_gamma(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

double log_beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw std::domain_error("log_beta: arguments must be positive");
  }
  return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

double log_sum_exp(std::span<const double> scores) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double s : scores) hi = std::max(hi, s);
  if (!std::isfinite(hi)) {
    throw std::domain_error("log_sum_exp: no finite score");
  }
  double acc = 0.0;
  for (double s : scores) acc += std::exp(s - hi);
  return hi + std::log(acc);
}

void normalize_log_inplace(std::span<double> scores) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double s : scores) hi = std::max(hi, s);
  if (!std::isfinite(hi)) {
    throw std::domain_error("normalize_log: no finite score");
  }
  double total = 0.0;
  for (double& s : scores) {
    s = std::exp(s - hi);
    total += s;
  }
  for (double& s : scores) s /= total;
}

std::vector<double> normalize_log(std::span<const double> scores) {
  std::vector<double> out(scores.begin(), scores.end());
  normalize_log_inplace(out);
  return out;
}

std::vector<double> expected_log_dirichlet(std::span<const double> params) {
  double total = 0.0;
  for (double p : params) {
    if (!(p > 0.0)) throw std::domain_error("expected_log_dirichlet: parameters must be positive");
    total += p;
  }
  const double psi_total = digamma(total);
  std::vector<double> out;
  out.reserve(params.size());
  for (double p : params) out.push_back(digamma(p) - psi_total);
  return out;
}

RunningMoments swap_moments(const RunningMoments& rm, double old_value, double new_value) {
  if (rm.count == 0) throw std::invalid_argument("swap_moments: empty moments");
  RunningMoments out = rm;
  const double diff = new_value - old_value;
  out.mean = rm.mean + diff / static_cast<double>(rm.count);
  out.m2 = rm.m2 + diff * (new_value - out.mean + old_value - rm.mean);
  if (out.m2 < 0.0) out.m2 = 0.0;
  return out;
}

std::vector<double> stick_weights(std::span<const double> fractions, std::size_t K) {
  if (K == 0) return {};
  if (fractions.size() + 1 < K) {
    throw std::invalid_argument("stick_weights: need at least K-1 stick fractions");
  }
  std::vector<double> pi(K, 0.0);
  double rest = 1.0;
  double used = 0.0;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    const double b = fractions[k];
    if (!(b > 0.0 && b <= 1.0)) {
      throw std::domain_error("stick_weights: fraction outside (0,1]");
    }
    pi[k] = b * rest;
    used += pi[k];
    rest *= 1.0 - b;
  }
  pi[K - 1] = std::max(0.0, 1.0 - used);
  return pi;
}

std::vector<double> expected_log_sticks(std::span<const double> pairs) {
  const std::size_t K = pairs.size() / 2;
  std::vector<double> out(K);
  double tail = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double a = pairs[2 * k];
    const double b = pairs[2 * k + 1];
    const double psi_ab = digamma(a + b);
    out[k] = digamma(a) - psi_ab + tail;
    tail += digamma(b) - psi_ab;
  }
  return out;
}

}  // namespace tspra
