#include "tspra/state.hpp"

#include <cmath>
#include <stdexcept>

#include "tspra/numerics.hpp"
#include "tspra/parallel.hpp"

namespace tspra {

void Hyperparams::validate() const {
  levels.validate();
  if (!(alpha > 0.0) || !(beta > 0.0) || !(theta > 0.0)) {
    throw std::invalid_argument("concentration parameters must be positive");
  }
  if (lambda.size() != S()) throw std::invalid_argument("lambda must have one entry per sentiment level");
  if (eta.size() != U()) throw std::invalid_argument("eta must have one entry per preference level");
  for (double x : lambda)
    if (!(x > 0.0)) throw std::invalid_argument("lambda entries must be positive");
  for (double x : eta)
    if (!(x > 0.0)) throw std::invalid_argument("eta entries must be positive");
  if (T < 1 || K < T) throw std::invalid_argument("truncations must satisfy K >= T >= 1");
  if (mc_samples < 1) throw std::invalid_argument("mc_samples must be at least 1");
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw std::invalid_argument("epsilon must lie in (0, 0.5)");
  if (!(perturbation >= 0.0)) throw std::invalid_argument("perturbation must be nonnegative");
}

GlobalState GlobalState::priors(const Hyperparams& hp, std::size_t V, std::size_t C) {
  GlobalState g;
  g.K = hp.K;
  g.V = V;
  g.C = C;
  g.S = hp.S();
  g.U = hp.U();
  g.alpha_t.resize(2 * g.K);
  for (std::size_t k = 0; k < g.K; ++k) {
    g.alpha_t[2 * k] = 1.0;
    g.alpha_t[2 * k + 1] = hp.alpha;
  }
  g.theta_t.assign(g.K * V, hp.theta);
  g.lambda_t.resize(g.K * V * g.S);
  for (std::size_t i = 0; i < g.K * V; ++i)
    for (std::size_t s = 0; s < g.S; ++s) g.lambda_t[i * g.S + s] = hp.lambda[s];
  g.eta_t.resize(g.K * C * g.U);
  for (std::size_t i = 0; i < g.K * C; ++i)
    for (std::size_t u = 0; u < g.U; ++u) g.eta_t[i * g.U + u] = hp.eta[u];
  return g;
}

void GlobalState::grow(std::size_t new_V, std::size_t new_C, const Hyperparams& hp) {
  if (new_V < V || new_C < C) throw std::invalid_argument("GlobalState::grow cannot shrink");
  if (new_V == V && new_C == C) return;
  GlobalState g = priors(hp, new_V, new_C);
  g.alpha_t = alpha_t;
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t v = 0; v < V; ++v) {
      g.theta_t[k * new_V + v] = theta_t[k * V + v];
      for (std::size_t s = 0; s < S; ++s)
        g.lambda_t[(k * new_V + v) * S + s] = lambda_t[(k * V + v) * S + s];
    }
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t u = 0; u < U; ++u)
        g.eta_t[(k * new_C + c) * U + u] = eta_t[(k * C + c) * U + u];
  }
  *this = std::move(g);
}

DocState DocState::uniform(std::size_t n, const Hyperparams& hp) {
  DocState d;
  d.n = n;
  d.T = hp.T;
  d.K = hp.K;
  d.S = hp.S();
  d.U = hp.U();
  d.beta_t.resize(2 * d.T);
  for (std::size_t t = 0; t < d.T; ++t) {
    d.beta_t[2 * t] = 1.0;
    d.beta_t[2 * t + 1] = hp.beta;
  }
  d.xi_t.assign(d.T * d.K, 1.0 / static_cast<double>(d.K));
  d.phi_t.assign(n * d.T, 1.0 / static_cast<double>(d.T));
  d.rho_t.assign(n * d.S, 1.0 / static_cast<double>(d.S));
  d.nu_t.assign(n * d.U, 1.0 / static_cast<double>(d.U));
  return d;
}

namespace {

std::vector<double> stick_expectations(std::span<const double> pairs, ExpectationMode mode) {
  if (mode == ExpectationMode::digamma) return expected_log_sticks(pairs);
  const std::size_t K = pairs.size() / 2;
  std::vector<double> out(K);
  double tail = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double total = pairs[2 * k] + pairs[2 * k + 1];
    if (mode == ExpectationMode::plugin) {
      out[k] = std::log(pairs[2 * k] / total) + tail;
      tail += std::log(pairs[2 * k + 1] / total);
    } else {
      out[k] = pairs[2 * k] / total + tail;
      tail += pairs[2 * k + 1] / total;
    }
  }
  return out;
}

// E[log x_i] (or x_i / |x|) for one small Dirichlet cell.
inline void cell_expectation(std::span<const double> params, ExpectationMode mode, double* out) {
  double total = 0.0;
  for (double p : params) total += p;
  if (mode == ExpectationMode::digamma) {
    const double psi_total = digamma(total);
    for (std::size_t i = 0; i < params.size(); ++i) out[i] = digamma(params[i]) - psi_total;
  } else if (mode == ExpectationMode::plugin) {
    for (std::size_t i = 0; i < params.size(); ++i) out[i] = std::log(params[i] / total);
  } else {
    for (std::size_t i = 0; i < params.size(); ++i) out[i] = params[i] / total;
  }
}

inline double word_expectation(double param, double row_sum, double psi_row_sum,
                               ExpectationMode mode) {
  if (mode == ExpectationMode::digamma) return digamma(param) - psi_row_sum;
  if (mode == ExpectationMode::plugin) return std::log(param / row_sum);
  return param / row_sum;
}

}  // namespace

std::vector<double> theta_row_sums(const GlobalState& g) {
  std::vector<double> sums(g.K, 0.0);
  for (std::size_t k = 0; k < g.K; ++k)
    for (double x : g.theta_row(k)) sums[k] += x;
  return sums;
}

GlobalExpectations::GlobalExpectations(const GlobalState& g, ExpectationMode mode,
                                       std::size_t threads)
    : K_(g.K), V_(g.V), C_(g.C), S_(g.S), U_(g.U), mode_(mode) {
  stick_ = stick_expectations(g.alpha_t, mode);
  word_.resize(K_ * V_);
  sent_.resize(K_ * V_ * S_);
  pref_.resize(K_ * C_ * U_);
  parallel_for(K_, threads, [&](std::size_t k) {
    double row_sum = 0.0;
    for (double x : g.theta_row(k)) row_sum += x;
    const double psi_row = mode == ExpectationMode::digamma ? digamma(row_sum) : 0.0;
    for (std::size_t v = 0; v < V_; ++v) {
      word_[k * V_ + v] = word_expectation(g.theta_t[k * V_ + v], row_sum, psi_row, mode);
      cell_expectation(g.lambda_cell(k, v), mode, &sent_[(k * V_ + v) * S_]);
    }
    for (std::size_t c = 0; c < C_; ++c) cell_expectation(g.eta_cell(k, c), mode, &pref_[(k * C_ + c) * U_]);
  });
}

void GlobalExpectations::gather(const Review& doc, DocExpectations& out) const {
  const std::size_t n = doc.size();
  out.n = n;
  out.K = K_;
  out.S = S_;
  out.U = U_;
  out.stick = stick_;
  out.word.resize(n * K_);
  out.sent.resize(n * K_ * S_);
  out.pref.resize(K_ * U_);
  if (doc.author >= C_) throw std::out_of_range("author index outside the global state");
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t v = doc.tokens[j];
    if (v >= V_) throw std::out_of_range("word index outside the global state");
    for (std::size_t k = 0; k < K_; ++k) {
      out.word[j * K_ + k] = word_[k * V_ + v];
      for (std::size_t s = 0; s < S_; ++s) out.sent[(j * K_ + k) * S_ + s] = sent_[(k * V_ + v) * S_ + s];
    }
  }
  for (std::size_t k = 0; k < K_; ++k)
    for (std::size_t u = 0; u < U_; ++u) out.pref[k * U_ + u] = pref_[(k * C_ + doc.author) * U_ + u];
}

void gather_direct(const GlobalState& g, ExpectationMode mode, const Review& doc,
                   std::span<const double> row_sums, DocExpectations& out) {
  const std::size_t n = doc.size();
  out.n = n;
  out.K = g.K;
  out.S = g.S;
  out.U = g.U;
  out.stick = stick_expectations(g.alpha_t, mode);
  out.word.resize(n * g.K);
  out.sent.resize(n * g.K * g.S);
  out.pref.resize(g.K * g.U);
  if (doc.author >= g.C) throw std::out_of_range("author index outside the global state");
  for (std::size_t k = 0; k < g.K; ++k) {
    const double psi_row = mode == ExpectationMode::digamma ? digamma(row_sums[k]) : 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t v = doc.tokens[j];
      if (v >= g.V) throw std::out_of_range("word index outside the global state");
      out.word[j * g.K + k] = word_expectation(g.theta_t[k * g.V + v], row_sums[k], psi_row, mode);
      cell_expectation(g.lambda_cell(k, v), mode, &out.sent[(j * g.K + k) * g.S]);
    }
    cell_expectation(g.eta_cell(k, doc.author), mode, &out.pref[k * g.U]);
  }
}

}  // namespace tspra
