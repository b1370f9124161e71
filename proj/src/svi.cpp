#include "tspra/svi.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "tspra/parallel.hpp"
#include "tspra/predict.hpp"

namespace tspra {

namespace {

constexpr std::uint64_t kSviStream = 0x5710c000ULL << 32;
constexpr std::uint64_t kShuffleStream = 0x5710c001ULL << 32;
constexpr std::uint64_t kOnlineStream = 0x0a11e000ULL << 32;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]) / std::abs(b[i]));
  return m;
}

// Local updates against fixed expectations until the largest entry change falls below the
// tolerance. Every round replays the same random stream.
std::size_t converge_local(const Review& doc, DocState& st, const DocExpectations& dex,
                           RatingCoefficients coeffs, const Hyperparams& hp,
                           const LocalConvergence& lc, std::uint64_t seed, std::uint64_t a,
                           std::uint64_t b) {
  std::size_t rounds = 0;
  for (std::size_t i = 0; i < std::max<std::size_t>(1, lc.max_rounds); ++i) {
    const auto xi0 = st.xi_t, phi0 = st.phi_t, rho0 = st.rho_t, nu0 = st.nu_t;
    Rng rng = make_rng(seed, a, b);
    local_sweep(doc, st, dex, coeffs, hp, rng);
    ++rounds;
    const double change = std::max({max_abs_diff(st.xi_t, xi0), max_abs_diff(st.phi_t, phi0),
                                    max_abs_diff(st.rho_t, rho0), max_abs_diff(st.nu_t, nu0)});
    if (change < lc.tolerance) break;
  }
  return rounds;
}

// Globals stored as value = c * x + p * prior for the theta, lambda and eta blocks, so a
// merge with a one-document intermediate touches only that document's entries.
class LazyGlobals {
 public:
  LazyGlobals(const GlobalState& g, const Hyperparams& hp)
      : K_(g.K), V_(g.V), C_(g.C), S_(g.S), U_(g.U), hp_(hp), alpha_(g.alpha_t),
        theta_(g.theta_t), lambda_(g.lambda_t), eta_(g.eta_t), sum_(theta_row_sums(g)) {}

  double theta(std::size_t i) const { return c_ * theta_[i] + p_ * hp_.theta; }
  double lambda(std::size_t i) const { return c_ * lambda_[i] + p_ * hp_.lambda[i % S_]; }
  double eta(std::size_t i) const { return c_ * eta_[i] + p_ * hp_.eta[i % U_]; }
  double row_sum(std::size_t k) const {
    return c_ * sum_[k] + p_ * hp_.theta * static_cast<double>(V_);
  }

  // Digamma expectations for one document from a compact copy holding only its rows.
  void gather(const Review& doc, DocExpectations& out) {
    local_index_.clear();
    mini_doc_.tokens.resize(doc.size());
    words_.clear();
    for (std::size_t j = 0; j < doc.size(); ++j) {
      auto [it, fresh] = local_index_.try_emplace(doc.tokens[j], static_cast<std::uint32_t>(words_.size()));
      if (fresh) words_.push_back(doc.tokens[j]);
      mini_doc_.tokens[j] = it->second;
    }
    mini_doc_.author = 0;
    GlobalState& m = mini_;
    m.K = K_;
    m.V = words_.size();
    m.C = 1;
    m.S = S_;
    m.U = U_;
    m.alpha_t = alpha_;
    m.theta_t.resize(K_ * m.V);
    m.lambda_t.resize(K_ * m.V * S_);
    m.eta_t.resize(K_ * U_);
    sums_.resize(K_);
    for (std::size_t k = 0; k < K_; ++k) {
      sums_[k] = row_sum(k);
      for (std::size_t i = 0; i < m.V; ++i) {
        const std::size_t v = words_[i];
        m.theta_t[k * m.V + i] = theta(k * V_ + v);
        for (std::size_t s = 0; s < S_; ++s) m.lambda_t[(k * m.V + i) * S_ + s] = lambda((k * V_ + v) * S_ + s);
      }
      for (std::size_t u = 0; u < U_; ++u) m.eta_t[k * U_ + u] = eta((k * C_ + doc.author) * U_ + u);
    }
    gather_direct(m, ExpectationMode::digamma, mini_doc_, sums_, out);
  }

  // value <- (1 - r) value + r (prior + scale * contribution of `st`).
  void merge_doc(const Review& doc, const DocState& st, double r, double scale) {
    if (r >= 1.0) {
      reset_to_priors();
    } else {
      const double c_new = (1.0 - r) * c_;
      p_ = (1.0 - r) * p_ + r;
      c_ = c_new;
    }
    for (std::size_t k = 0; k < K_; ++k) {
      alpha_[2 * k] = (1.0 - r) * alpha_[2 * k] + r * 1.0;
      alpha_[2 * k + 1] = (1.0 - r) * alpha_[2 * k + 1] + r * hp_.alpha;
    }
    std::vector<double> counts(K_, 0.0);
    for (std::size_t t = 0; t < st.T; ++t)
      for (std::size_t k = 0; k < K_; ++k) counts[k] += st.xi_t[t * K_ + k];
    double tail = 0.0;
    for (std::size_t k = K_; k-- > 0;) {
      alpha_[2 * k] += r * scale * counts[k];
      alpha_[2 * k + 1] += r * scale * tail;
      tail += counts[k];
    }
    const double w = r * scale / c_;
    for (std::size_t j = 0; j < st.n; ++j) {
      const std::size_t v = doc.tokens[j];
      for (std::size_t k = 0; k < K_; ++k) {
        double om = 0.0;
        for (std::size_t t = 0; t < st.T; ++t) om += st.phi_t[j * st.T + t] * st.xi_t[t * K_ + k];
        om *= w;
        theta_[k * V_ + v] += om;
        sum_[k] += om;
        for (std::size_t s = 0; s < S_; ++s) lambda_[(k * V_ + v) * S_ + s] += om * st.rho_t[j * S_ + s];
        for (std::size_t u = 0; u < U_; ++u) eta_[(k * C_ + doc.author) * U_ + u] += om * st.nu_t[j * U_ + u];
      }
    }
    if (c_ < 1e-150) fold();
  }

  GlobalState materialize() const {
    GlobalState g;
    g.K = K_;
    g.V = V_;
    g.C = C_;
    g.S = S_;
    g.U = U_;
    g.alpha_t = alpha_;
    g.theta_t.resize(theta_.size());
    g.lambda_t.resize(lambda_.size());
    g.eta_t.resize(eta_.size());
    for (std::size_t i = 0; i < theta_.size(); ++i) g.theta_t[i] = theta(i);
    for (std::size_t i = 0; i < lambda_.size(); ++i) g.lambda_t[i] = lambda(i);
    for (std::size_t i = 0; i < eta_.size(); ++i) g.eta_t[i] = eta(i);
    return g;
  }

 private:
  void reset_to_priors() {
    std::fill(theta_.begin(), theta_.end(), hp_.theta);
    for (std::size_t i = 0; i < lambda_.size(); ++i) lambda_[i] = hp_.lambda[i % S_];
    for (std::size_t i = 0; i < eta_.size(); ++i) eta_[i] = hp_.eta[i % U_];
    std::fill(sum_.begin(), sum_.end(), hp_.theta * static_cast<double>(V_));
    c_ = 1.0;
    p_ = 0.0;
  }

  void fold() {
    for (std::size_t i = 0; i < theta_.size(); ++i) theta_[i] = theta(i);
    for (std::size_t i = 0; i < lambda_.size(); ++i) lambda_[i] = lambda(i);
    for (std::size_t i = 0; i < eta_.size(); ++i) eta_[i] = eta(i);
    for (std::size_t k = 0; k < K_; ++k) sum_[k] = row_sum(k);
    c_ = 1.0;
    p_ = 0.0;
  }

  std::size_t K_, V_, C_, S_, U_;
  const Hyperparams& hp_;
  std::vector<double> alpha_, theta_, lambda_, eta_, sum_;
  double c_ = 1.0, p_ = 0.0;

  std::unordered_map<std::uint32_t, std::uint32_t> local_index_;
  std::vector<std::uint32_t> words_;
  Review mini_doc_;
  GlobalState mini_;
  std::vector<double> sums_;
};

std::int64_t last_time(const Corpus& c) {
  std::int64_t t = std::numeric_limits<std::int64_t>::min();
  for (const auto& r : c.reviews) t = std::max(t, r.time);
  return c.empty() ? 0 : t;
}

}  // namespace

double ForgettingSchedule::rate(std::size_t t, std::size_t batch_size, std::size_t base_size) const {
  if (t == 0) throw std::invalid_argument("forgetting schedule steps start at 1");
  switch (kind) {
    case Kind::inverse_t:
      return std::min(1.0, 1.0 / (static_cast<double>(t) + value));
    case Kind::fixed_ratio:
      if (base_size == 0) throw std::invalid_argument("fixed_ratio schedule needs a base size");
      return std::clamp(value * static_cast<double>(batch_size) / static_cast<double>(base_size),
                        std::numeric_limits<double>::min(), 1.0);
    case Kind::constant:
      return value;
  }
  return value;
}

void ForgettingSchedule::validate() const {
  switch (kind) {
    case Kind::inverse_t:
      if (!(value >= 0.0)) throw std::invalid_argument("inverse_t offset must be nonnegative");
      break;
    case Kind::fixed_ratio:
      if (!(value > 0.0)) throw std::invalid_argument("fixed_ratio multiplier must be positive");
      break;
    case Kind::constant:
      if (!(value > 0.0 && value <= 1.0)) throw std::invalid_argument("constant rate must lie in (0, 1]");
      break;
  }
}

std::string to_string(ForgettingSchedule::Kind kind) {
  switch (kind) {
    case ForgettingSchedule::Kind::inverse_t: return "inverse_t";
    case ForgettingSchedule::Kind::fixed_ratio: return "fixed_ratio";
    case ForgettingSchedule::Kind::constant: return "constant";
  }
  return "?";
}

ForgettingSchedule::Kind parse_schedule_kind(const std::string& name) {
  if (name == "inverse_t") return ForgettingSchedule::Kind::inverse_t;
  if (name == "fixed_ratio") return ForgettingSchedule::Kind::fixed_ratio;
  if (name == "constant") return ForgettingSchedule::Kind::constant;
  throw std::invalid_argument("unknown forgetting schedule '" + name + "'");
}

GlobalState intermediate_globals(std::span<const DocRef> docs, double scale, const Hyperparams& hp,
                                 std::size_t V, std::size_t C, std::size_t threads) {
  if (!(scale > 0.0)) throw std::invalid_argument("intermediate scale must be positive");
  return accumulate_globals(docs, hp, V, C, scale, threads);
}

GlobalState merge(const GlobalState& old, const GlobalState& intermediate, double r) {
  if (!old.same_shape(intermediate)) throw std::invalid_argument("merge: global state shapes differ");
  if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("merge: rate outside [0, 1]");
  if (r == 0.0) return old;
  if (r == 1.0) return intermediate;
  GlobalState out = old;
  auto mix = [r](std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = (1.0 - r) * a[i] + r * b[i];
  };
  mix(out.alpha_t, intermediate.alpha_t);
  mix(out.theta_t, intermediate.theta_t);
  mix(out.lambda_t, intermediate.lambda_t);
  mix(out.eta_t, intermediate.eta_t);
  return out;
}

StochasticResult train_stochastic(const Corpus& corpus, const Hyperparams& hp,
                                  const StochasticOptions& opts) {
  if (corpus.empty()) throw std::invalid_argument("train_stochastic: empty corpus");
  const auto start = init_globals(hp, corpus.vocab_size(), corpus.num_users(), opts.seed);
  return continue_stochastic(corpus, hp, start, 1, opts);
}

StochasticResult continue_stochastic(const Corpus& corpus, const Hyperparams& hp,
                                     const GlobalState& start, std::size_t first_step,
                                     const StochasticOptions& opts) {
  if (corpus.empty()) throw std::invalid_argument("train_stochastic: empty corpus");
  if (first_step == 0) throw std::invalid_argument("stochastic steps start at 1");
  hp.validate();
  opts.schedule.validate();
  if (start.V != corpus.vocab_size() || start.C != corpus.num_users() || start.K != hp.K) {
    throw std::invalid_argument("starting globals do not match the corpus");
  }
  const std::size_t D = corpus.num_docs();
  const double scale = static_cast<double>(D);
  LazyGlobals lazy(start, hp);
  const auto probe = probe_indices(D, opts.probe_size);
  PredictOptions popts = opts.predict;

  StochasticResult res;
  std::vector<std::size_t> order;
  std::size_t epoch = std::numeric_limits<std::size_t>::max();
  Rng pick = make_rng(opts.seed, kShuffleStream ^ 1, first_step);
  DocExpectations dex;
  const auto t0 = Clock::now();
  double probe_time = 0.0;
  auto train_time = [&] { return seconds_since(t0) - probe_time; };

  for (std::size_t i = 0; i < opts.max_steps; ++i) {
    if (train_time() >= opts.max_seconds) break;
    const std::size_t t = first_step + i;
    std::size_t d;
    if (opts.with_replacement) {
      d = static_cast<std::size_t>(uniform01(pick) * static_cast<double>(D));
    } else {
      const std::size_t e = (t - 1) / D;
      if (e != epoch) {
        epoch = e;
        order.resize(D);
        for (std::size_t j = 0; j < D; ++j) order[j] = j;
        Rng shuffle = make_rng(opts.seed, kShuffleStream, epoch);
        for (std::size_t j = D; j-- > 1;) {
          const auto k = static_cast<std::size_t>(uniform01(shuffle) * static_cast<double>(j + 1));
          std::swap(order[j], order[k]);
        }
      }
      d = order[(t - 1) % D];
    }
    d = std::min(d, D - 1);
    const auto& doc = corpus.reviews[d];
    DocState st = DocState::uniform(doc.size(), hp);
    lazy.gather(doc, dex);
    init_local(doc, st, dex);
    converge_local(doc, st, dex, coefficients_of(corpus.rating_logs(doc)), hp, opts.local,
                   opts.seed, kSviStream ^ d, t);
    lazy.merge_doc(doc, st, opts.schedule.rate(t, 1, 1), scale);
    res.steps = i + 1;

    if (opts.probe_every > 0 && res.steps % opts.probe_every == 0) {
      const auto p0 = Clock::now();
      const double elapsed = train_time();
      const auto g = lazy.materialize();
      const double mae = training_error(g, corpus, hp, popts, probe);
      probe_time += seconds_since(p0);
      res.history.push_back({t, mae, elapsed, seconds_since(t0)});
      if (opts.on_probe && !opts.on_probe(res.history.back(), g)) break;
    }
  }
  res.train_seconds = train_time();
  res.globals = lazy.materialize();
  return res;
}

void OnlineConfig::validate() const {
  if (base_size < 1) throw std::invalid_argument("online base size must be at least 1");
  if (batch_cap < 1) throw std::invalid_argument("online batch cap must be at least 1");
  if (!(tolerance > 0.0)) throw std::invalid_argument("online tolerance must be positive");
  schedule.validate();
}

OnlineResult train_online(const Corpus& base, std::span<const Corpus> batches,
                          const OnlineConfig& cfg, const Hyperparams& hp, const OnlineOptions& opts) {
  if (base.empty()) throw std::invalid_argument("train_online: empty base corpus");
  cfg.validate();
  for (std::size_t b = 1; b < batches.size(); ++b) {
    if (!batches[b].empty() && !batches[b - 1].empty() &&
        batches[b].reviews.front().time < last_time(batches[b - 1])) {
      throw std::invalid_argument("online batches must be time ordered");
    }
  }
  TrainOptions base_opts = opts.base;
  base_opts.seed = opts.seed;
  base_opts.threads = opts.threads;
  auto trained = train_batch(base, hp, base_opts);

  OnlineResult res;
  res.globals = std::move(trained.globals);
  res.trend.snapshot(res.globals, hp.levels, 0, last_time(base));
  const std::size_t D0 = base.num_docs();

  for (std::size_t t = 1; t <= batches.size(); ++t) {
    const Corpus& batch = batches[t - 1];
    if (batch.empty()) {
      res.diagnostics.push_back("batch " + std::to_string(t) + " is empty; skipped");
      continue;
    }
    const std::size_t V = std::max(res.globals.V, batch.vocab_size());
    const std::size_t C = std::max(res.globals.C, batch.num_users());
    res.globals.grow(V, C, hp);
    const GlobalState old = res.globals;
    const std::size_t Db = batch.num_docs();
    const double scale = static_cast<double>(D0) / static_cast<double>(Db);
    const double r = cfg.schedule.rate(t, Db, D0);
    const std::size_t cap = std::min(cfg.batch_cap, Db);

    std::vector<DocState> states(Db);
    GlobalState current = old;
    std::size_t rounds = 0;
    for (std::size_t i = 1; i <= cap; ++i) {
      const GlobalExpectations ex(current, ExpectationMode::digamma, opts.threads);
      parallel_ranges(Db, opts.threads, [&](std::size_t b, std::size_t e) {
        DocExpectations dex;
        for (std::size_t d = b; d < e; ++d) {
          const auto& doc = batch.reviews[d];
          ex.gather(doc, dex);
          if (i == 1) {
            states[d] = DocState::uniform(doc.size(), hp);
            init_local(doc, states[d], dex);
          }
          converge_local(doc, states[d], dex, coefficients_of(batch.rating_logs(doc)), hp, cfg.local,
                         opts.seed, kOnlineStream ^ t, d);
        }
      });
      const auto refs = doc_refs(batch, states);
      const auto inter = intermediate_globals(refs, scale, hp, V, C, opts.threads);
      GlobalState next = merge(old, inter, r);
      rounds = i;
      const double change = std::max({max_rel_diff(next.alpha_t, current.alpha_t),
                                      max_rel_diff(next.theta_t, current.theta_t),
                                      max_rel_diff(next.lambda_t, current.lambda_t),
                                      max_rel_diff(next.eta_t, current.eta_t)});
      current = std::move(next);
      if (change < cfg.tolerance) break;
    }
    res.globals = std::move(current);
    res.rounds.push_back(rounds);
    res.trend.snapshot(res.globals, hp.levels, t, last_time(batch));
  }
  return res;
}

StreamSplit split_stream(const Corpus& corpus, std::size_t base_size, std::size_t batch_size) {
  if (base_size == 0 || base_size > corpus.num_docs()) {
    throw std::invalid_argument("base size must lie in [1, number of reviews]");
  }
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  StreamSplit out;
  out.base = corpus.subset(0, base_size);
  for (std::size_t b = base_size; b < corpus.num_docs(); b += batch_size) {
    out.batches.push_back(corpus.subset(b, std::min(corpus.num_docs(), b + batch_size)));
  }
  return out;
}

}  // namespace tspra
