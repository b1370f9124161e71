#pragma once

#include <random>
#include <vector>

#include "tspra/corpus.hpp"
#include "tspra/state.hpp"

namespace fixture {

inline void random_simplex(std::vector<double>& v, std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  v.resize(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0;
    for (std::size_t c = 0; c < cols; ++c) sum += v[r * cols + c] = unif(rng);
    for (std::size_t c = 0; c < cols; ++c) v[r * cols + c] /= sum;
  }
}

inline tspra::DocState random_state(std::size_t n, const tspra::Hyperparams& hp, std::mt19937_64& rng) {
  auto st = tspra::DocState::uniform(n, hp);
  random_simplex(st.xi_t, st.T, st.K, rng);
  random_simplex(st.phi_t, n, st.T, rng);
  random_simplex(st.rho_t, n, st.S, rng);
  random_simplex(st.nu_t, n, st.U, rng);
  std::uniform_real_distribution<double> unif(0.5, 4.0);
  for (double& x : st.beta_t) x = unif(rng);
  return st;
}

inline tspra::GlobalState random_globals(const tspra::Hyperparams& hp, std::size_t V, std::size_t C,
                                         std::mt19937_64& rng) {
  auto g = tspra::GlobalState::priors(hp, V, C);
  std::uniform_real_distribution<double> unif(0.2, 5.0);
  for (auto* block : {&g.alpha_t, &g.theta_t, &g.lambda_t, &g.eta_t})
    for (double& x : *block) x = unif(rng);
  return g;
}

/// D=2, V=3, C=2 with documents of 3 and 2 tokens.
inline tspra::Corpus tiny_corpus() {
  tspra::Corpus c;
  for (const char* w : {"alpha", "bravo", "charlie"}) c.vocab.intern(w);
  c.users.intern("ann");
  c.users.intern("bob");
  tspra::Review a;
  a.doc_id = 0;
  a.author = 0;
  a.tokens = {0, 2, 0};
  a.raw_rating = 5;
  a.time = 1;
  tspra::Review b;
  b.doc_id = 1;
  b.author = 1;
  b.tokens = {1, 2};
  b.raw_rating = 2;
  b.time = 2;
  for (auto* r : {&a, &b}) r->norm_rating = tspra::normalize_rating(r->raw_rating, c.scale, c.epsilon);
  c.reviews = {a, b};
  return c;
}

inline tspra::Hyperparams tiny_hp() {
  tspra::Hyperparams hp;
  hp.K = 2;
  hp.T = 2;
  hp.mc_samples = 40;
  return hp;
}

}  // namespace fixture
