#include "tspra/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "tspra/numerics.hpp"
#include "tspra/parallel.hpp"
#include "tspra/predict.hpp"

namespace tspra {

namespace {

// Stream tags so the init, sweep and prediction RNG streams never collide.
constexpr std::uint64_t kInitStream = 0x5eed0001ULL << 32;

// wk[j, k] = E[log phi_{k,w_j}] + sum_u nu_j(u) E[log mu_{k,a}(u)] + sum_s rho_j(s) E[log sigma_{k,w_j}(s)]
void word_topic_terms(const DocState& st, const DocExpectations& ex, std::vector<double>& wk) {
  const std::size_t n = st.n, K = st.K, S = st.S, U = st.U;
  wk.resize(n * K);
  for (std::size_t j = 0; j < n; ++j) {
    const double* rho = st.rho_t.data() + j * S;
    const double* nu = st.nu_t.data() + j * U;
    for (std::size_t k = 0; k < K; ++k) {
      double acc = ex.word[j * K + k];
      const double* pref = ex.pref.data() + k * U;
      for (std::size_t u = 0; u < U; ++u) acc += nu[u] * pref[u];
      const double* sent = ex.sent.data() + (j * K + k) * S;
      for (std::size_t s = 0; s < S; ++s) acc += rho[s] * sent[s];
      wk[j * K + k] = acc;
    }
  }
}

void check_shapes(const Review& doc, const DocState& st, const DocExpectations& ex) {
  if (st.n != doc.size() || ex.n != doc.size() || ex.K != st.K) {
    throw std::invalid_argument("document state does not match document / expectations");
  }
}

}  // namespace

void update_xi(const Review& doc, DocState& st, const DocExpectations& ex, bool include_stick) {
  check_shapes(doc, st, ex);
  const std::size_t n = st.n, K = st.K, T = st.T;
  std::vector<double> wk;
  word_topic_terms(st, ex, wk);
  std::vector<double> score(K);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < K; ++k) score[k] = include_stick ? ex.stick[k] : 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double p = st.phi_t[j * T + t];
      if (p == 0.0) continue;
      const double* w = wk.data() + j * K;
      for (std::size_t k = 0; k < K; ++k) score[k] += p * w[k];
    }
    normalize_log_inplace(score);
    std::copy(score.begin(), score.end(), st.xi_row(t).begin());
  }
}

void update_phi(const Review& doc, DocState& st, const DocExpectations& ex) {
  check_shapes(doc, st, ex);
  const std::size_t n = st.n, K = st.K, T = st.T;
  std::vector<double> wk;
  word_topic_terms(st, ex, wk);
  const auto doc_stick = expected_log_sticks(st.beta_t);
  std::vector<double> score(T);
  for (std::size_t j = 0; j < n; ++j) {
    const double* w = wk.data() + j * K;
    for (std::size_t t = 0; t < T; ++t) {
      const double* xi = st.xi_t.data() + t * K;
      double acc = doc_stick[t];
      for (std::size_t k = 0; k < K; ++k) acc += xi[k] * w[k];
      score[t] = acc;
    }
    normalize_log_inplace(score);
    std::copy(score.begin(), score.end(), st.phi_row(j).begin());
  }
}

void update_beta_doc(DocState& st, double beta) {
  const std::size_t T = st.T;
  std::vector<double> counts(T, 0.0);
  for (std::size_t j = 0; j < st.n; ++j)
    for (std::size_t t = 0; t < T; ++t) counts[t] += st.phi_t[j * T + t];
  double tail = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    st.beta_t[2 * t] = 1.0 + counts[t];
    st.beta_t[2 * t + 1] = beta + tail;
    tail += counts[t];
  }
}

void topic_responsibilities(const DocState& st, std::span<double> omega) {
  const std::size_t K = st.K, T = st.T;
  std::fill(omega.begin(), omega.end(), 0.0);
  for (std::size_t j = 0; j < st.n; ++j) {
    double* om = omega.data() + j * K;
    for (std::size_t t = 0; t < T; ++t) {
      const double p = st.phi_t[j * T + t];
      if (p == 0.0) continue;
      const double* xi = st.xi_t.data() + t * K;
      for (std::size_t k = 0; k < K; ++k) om[k] += p * xi[k];
    }
  }
}

void update_rho_nu(const Review& doc, DocState& st, const DocExpectations& ex,
                   RatingCoefficients rating, const Hyperparams& hp, Rng& rng) {
  check_shapes(doc, st, ex);
  const std::size_t n = st.n, K = st.K, S = st.S, U = st.U;
  std::vector<double> omega(n * K);
  topic_responsibilities(st, omega);

  DocSampler sampler(hp.levels, n, hp.mc_samples);
  sampler.draw(st.rho_t, st.nu_t, rng);
  std::vector<McEstimate> grid(S * U);
  std::vector<double> f(S * U), score_s(S), score_u(U);

  for (std::size_t j = 0; j < n; ++j) {
    const double* om = omega.data() + j * K;
    sampler.held_grid(j, hp.epsilon, grid);
    for (std::size_t i = 0; i < S * U; ++i) {
      f[i] = grid[i].log_density_term(rating.on_h1, rating.on_h2);
    }
    auto rho = st.rho_row(j);
    auto nu = st.nu_row(j);
    if (!st.is_rho_fixed(j)) {
      for (std::size_t s = 0; s < S; ++s) {
        double data = 0.0;
        for (std::size_t k = 0; k < K; ++k) data += ex.sent[(j * K + k) * S + s] * om[k];
        double reg = 0.0;
        for (std::size_t u = 0; u < U; ++u) reg += nu[u] * f[s * U + u];
        score_s[s] = reg + data;
      }
      normalize_log_inplace(score_s);
      std::copy(score_s.begin(), score_s.end(), rho.begin());
    }
    for (std::size_t u = 0; u < U; ++u) {
      double data = 0.0;
      for (std::size_t k = 0; k < K; ++k) data += ex.pref[k * U + u] * om[k];
      double reg = 0.0;
      for (std::size_t s = 0; s < S; ++s) reg += rho[s] * f[s * U + u];
      score_u[u] = reg + data;
    }
    normalize_log_inplace(score_u);
    std::copy(score_u.begin(), score_u.end(), nu.begin());
    sampler.redraw_word(j, rho, nu, rng);
  }
}

void local_sweep(const Review& doc, DocState& st, const DocExpectations& ex,
                 RatingCoefficients rating, const Hyperparams& hp, Rng& rng) {
  update_xi(doc, st, ex);
  update_phi(doc, st, ex);
  update_rho_nu(doc, st, ex, rating, hp, rng);
  update_beta_doc(st, hp.beta);
}

void init_local(const Review& doc, DocState& st, const DocExpectations& ex) {
  update_xi(doc, st, ex, /*include_stick=*/false);
  update_phi(doc, st, ex);
}

std::vector<DocRef> doc_refs(const Corpus& corpus, const std::vector<DocState>& states) {
  if (states.size() != corpus.num_docs()) throw std::invalid_argument("one state per document required");
  std::vector<DocRef> refs;
  refs.reserve(states.size());
  for (std::size_t d = 0; d < states.size(); ++d) refs.push_back({&corpus.reviews[d], &states[d]});
  return refs;
}

GlobalState accumulate_globals(std::span<const DocRef> docs, const Hyperparams& hp,
                               std::size_t V, std::size_t C, double scale, std::size_t threads) {
  GlobalState g = GlobalState::priors(hp, V, C);
  const std::size_t K = g.K, S = g.S, U = g.U;
  // Threads own disjoint topic ranges; each entry sums documents in order.
  parallel_ranges(K, threads, [&](std::size_t kb, std::size_t ke) {
    std::vector<double> counts(K);
    for (const auto& ref : docs) {
      const Review& doc = *ref.review;
      const DocState& st = *ref.state;
      const std::size_t T = st.T;
      if (st.K != K) throw std::invalid_argument("document state truncation differs from hyperparams");
      if (doc.author >= C) throw std::out_of_range("author index outside the global state");
      std::fill(counts.begin(), counts.end(), 0.0);
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t k = 0; k < K; ++k) counts[k] += st.xi_t[t * K + k];
      double tail = 0.0;
      for (std::size_t k = K; k-- > 0;) {
        if (k >= kb && k < ke) {
          g.alpha_t[2 * k] += scale * counts[k];
          g.alpha_t[2 * k + 1] += scale * tail;
        }
        tail += counts[k];
      }
      for (std::size_t j = 0; j < st.n; ++j) {
        const std::size_t w = doc.tokens[j];
        if (w >= V) throw std::out_of_range("word index outside the global state");
        const double* phi = st.phi_t.data() + j * T;
        const double* rho = st.rho_t.data() + j * S;
        const double* nu = st.nu_t.data() + j * U;
        for (std::size_t k = kb; k < ke; ++k) {
          double om = 0.0;
          for (std::size_t t = 0; t < T; ++t) om += phi[t] * st.xi_t[t * K + k];
          om *= scale;
          g.theta_t[k * V + w] += om;
          double* lam = g.lambda_t.data() + (k * V + w) * S;
          for (std::size_t s = 0; s < S; ++s) lam[s] += om * rho[s];
          double* eta = g.eta_t.data() + (k * C + doc.author) * U;
          for (std::size_t u = 0; u < U; ++u) eta[u] += om * nu[u];
        }
      }
    }
  });
  return g;
}

std::vector<double> update_theta(std::span<const DocRef> docs, const Hyperparams& hp,
                                 std::size_t V, std::size_t C) {
  return accumulate_globals(docs, hp, V, C).theta_t;
}

std::vector<double> update_lambda(std::span<const DocRef> docs, const Hyperparams& hp,
                                  std::size_t V, std::size_t C) {
  return accumulate_globals(docs, hp, V, C).lambda_t;
}

std::vector<double> update_eta(std::span<const DocRef> docs, const Hyperparams& hp,
                               std::size_t V, std::size_t C) {
  return accumulate_globals(docs, hp, V, C).eta_t;
}

std::vector<double> update_alpha(std::span<const DocRef> docs, const Hyperparams& hp) {
  std::size_t V = 0, C = 0;
  for (const auto& d : docs) {
    C = std::max(C, d.review->author + 1);
    for (auto w : d.review->tokens) V = std::max<std::size_t>(V, w + 1);
  }
  return accumulate_globals(docs, hp, V, C).alpha_t;
}

GlobalState init_globals(const Hyperparams& hp, std::size_t V, std::size_t C, std::uint64_t seed) {
  hp.validate();
  GlobalState g = GlobalState::priors(hp, V, C);
  if (hp.perturbation > 0.0) {
    Rng rng = make_rng(seed, kInitStream);
    const double width = hp.perturbation * hp.theta;
    for (double& x : g.theta_t) x += width * uniform01(rng);
  }
  return g;
}

InitState init_state(const Corpus& corpus, const Hyperparams& hp, std::uint64_t seed,
                     std::size_t threads) {
  if (corpus.empty()) throw std::invalid_argument("init_state: empty corpus");
  InitState s;
  s.globals = init_globals(hp, corpus.vocab_size(), corpus.num_users(), seed);
  s.docs.resize(corpus.num_docs());
  const GlobalExpectations ex(s.globals, ExpectationMode::digamma, threads);
  parallel_ranges(corpus.num_docs(), threads, [&](std::size_t b, std::size_t e) {
    DocExpectations dex;
    for (std::size_t d = b; d < e; ++d) {
      const auto& doc = corpus.reviews[d];
      s.docs[d] = DocState::uniform(doc.size(), hp);
      ex.gather(doc, dex);
      init_local(doc, s.docs[d], dex);
    }
  });
  return s;
}

GlobalState batch_iteration(const Corpus& corpus, std::vector<DocState>& docs,
                            const GlobalState& globals, const Hyperparams& hp,
                            std::uint64_t seed, std::size_t sweep, std::size_t threads,
                            std::size_t inner_sweeps) {
  const GlobalExpectations ex(globals, ExpectationMode::digamma, threads);
  parallel_ranges(corpus.num_docs(), threads, [&](std::size_t b, std::size_t e) {
    DocExpectations dex;
    for (std::size_t d = b; d < e; ++d) {
      const auto& doc = corpus.reviews[d];
      ex.gather(doc, dex);
      Rng rng = make_rng(seed, d, sweep);
      const auto coeffs = coefficients_of(corpus.rating_logs(doc));
      for (std::size_t r = 0; r < std::max<std::size_t>(1, inner_sweeps); ++r) {
        local_sweep(doc, docs[d], dex, coeffs, hp, rng);
      }
    }
  });
  const auto refs = doc_refs(corpus, docs);
  return accumulate_globals(refs, hp, corpus.vocab_size(), corpus.num_users(), 1.0, threads);
}

std::vector<std::size_t> probe_indices(std::size_t num_docs, std::size_t size) {
  std::vector<std::size_t> out;
  if (size == 0 || size >= num_docs) {
    out.resize(num_docs);
    for (std::size_t i = 0; i < num_docs; ++i) out[i] = i;
    return out;
  }
  out.reserve(size);
  for (std::size_t i = 0; i < size; ++i) out.push_back(i * num_docs / size);
  return out;
}

TrainResult train_batch(const Corpus& corpus, const Hyperparams& hp, const TrainOptions& opts) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - start).count(); };

  auto init = init_state(corpus, hp, opts.seed, opts.threads);
  double train_time = elapsed();
  TrainResult res;
  res.globals = std::move(init.globals);
  res.docs = std::move(init.docs);
  const auto probe = probe_indices(corpus.num_docs(), opts.probe_size);
  PredictOptions popts = opts.predict;
  popts.threads = opts.threads;

  std::size_t calm = 0;
  for (std::size_t it = 1; it <= opts.stop.max_iterations; ++it) {
    if (train_time >= opts.stop.max_seconds) break;
    const auto t0 = clock::now();
    res.globals = batch_iteration(corpus, res.docs, res.globals, hp, opts.seed, it, opts.threads,
                                  opts.inner_sweeps);
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    train_time += secs;
    const double mae = opts.track_mae ? training_error(res.globals, corpus, hp, popts, probe)
                                      : std::nan("");
    res.history.push_back({it, mae, secs, elapsed()});
    res.iterations = it;
    if (opts.on_iteration && !opts.on_iteration(res.history.back(), res.globals)) break;
    if (opts.track_mae && res.history.size() >= 2) {
      const double prev = res.history[res.history.size() - 2].mae;
      const double rel = std::abs(mae - prev) / std::max(prev, 1e-12);
      calm = rel < opts.stop.relative_tolerance ? calm + 1 : 0;
      if (calm >= opts.stop.window) break;
    }
  }
  return res;
}

double training_error(const GlobalState& globals, const Corpus& corpus, const Hyperparams& hp,
                      const PredictOptions& opts, std::span<const std::size_t> docs) {
  if (corpus.empty()) throw std::invalid_argument("training_error: empty corpus");
  const auto report = predict_corpus(globals, corpus, hp, opts, nullptr, docs);
  return report.mae;
}

}  // namespace tspra
