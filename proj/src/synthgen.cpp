#include "tspra/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "tspra/numerics.hpp"
#include "tspra/regression.hpp"

namespace tspra {

namespace {

constexpr std::uint64_t kTruthStream = 0x7a07f000ULL << 32;
constexpr std::uint64_t kDocStream = 0x7a07f001ULL << 32;

// Truncated GEM over n components from beta(1, conc) fractions; the last takes the rest.
void draw_sticks(double conc, std::size_t n, Rng& rng, std::vector<double>& fractions,
                 std::vector<double>& weights) {
  fractions.resize(n);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    // Floor keeps every fraction inside (0, 1] for stick_weights.
    fractions[k] = std::max(sample_beta(1.0, conc, rng), 1e-300);
  }
  fractions[n - 1] = 1.0;
  weights = stick_weights(fractions, n);
}

}  // namespace

void GenPriors::validate() const {
  levels.validate();
  if (!(alpha > 0.0 && beta > 0.0 && theta > 0.0)) throw std::invalid_argument("generator concentrations must be positive");
  if (lambda.size() != levels.num_sentiment() || eta.size() != levels.num_preference()) {
    throw std::invalid_argument("generator lambda / eta sizes do not match the levels");
  }
  for (double x : lambda)
    if (!(x > 0.0)) throw std::invalid_argument("generator lambda entries must be positive");
  for (const auto& row : topic_lambda) {
    if (row.size() != levels.num_sentiment()) throw std::invalid_argument("topic lambda size does not match the levels");
    for (double x : row)
      if (!(x > 0.0)) throw std::invalid_argument("generator lambda entries must be positive");
  }
  for (double x : eta)
    if (!(x > 0.0)) throw std::invalid_argument("generator eta entries must be positive");
  if (T < 1) throw std::invalid_argument("generator needs at least one table");
  if (scale.high <= scale.low) throw std::invalid_argument("rating scale must span at least two values");
}

double GroundTruth::planted_sentiment(std::size_t k, std::size_t v, const Levels& levels) const {
  double acc = 0.0;
  for (std::size_t s = 0; s < S; ++s) acc += levels.sentiment[s] * sigma[(k * V + v) * S + s];
  return acc;
}

double sample_beta(double a, double b, Rng& rng) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng), y = gb(rng);
  if (x + y > 0.0) return x / (x + y);
  return uniform01(rng) < a / (a + b) ? 1.0 : 0.0;
}

std::vector<double> sample_dirichlet(std::span<const double> params, Rng& rng) {
  std::vector<double> out(params.size());
  double total = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::gamma_distribution<double> g(params[i], 1.0);
    out[i] = g(rng);
    total += out[i];
  }
  if (total > 0.0) {
    for (double& x : out) x /= total;
    return out;
  }
  double psum = 0.0;
  for (double x : params) psum += x;
  std::vector<double> probs(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) probs[i] = params[i] / psum;
  std::fill(out.begin(), out.end(), 0.0);
  out[sample_categorical(probs, rng)] = 1.0;
  return out;
}

GroundTruth sample_truth(const GenPriors& priors, const GenSizes& sizes, std::uint64_t seed) {
  priors.validate();
  if (sizes.K < 1 || sizes.V < 1 || sizes.C < 1) throw std::invalid_argument("generator sizes must be positive");
  if (!(sizes.mean_length > 0.0)) throw std::invalid_argument("mean review length must be positive");
  GroundTruth t;
  t.K = sizes.K;
  t.V = sizes.V;
  t.C = sizes.C;
  t.S = priors.levels.num_sentiment();
  t.U = priors.levels.num_preference();
  Rng rng = make_rng(seed, kTruthStream);
  draw_sticks(priors.alpha, t.K, rng, t.b, t.pi);
  const std::vector<double> theta(t.V, priors.theta);
  t.topics.reserve(t.K * t.V);
  for (std::size_t k = 0; k < t.K; ++k) {
    const auto row = sample_dirichlet(theta, rng);
    t.topics.insert(t.topics.end(), row.begin(), row.end());
  }
  t.sigma.reserve(t.K * t.V * t.S);
  if (!priors.topic_lambda.empty() && priors.topic_lambda.size() != t.K) {
    throw std::invalid_argument("topic lambda needs one vector per planted topic");
  }
  for (std::size_t i = 0; i < t.K * t.V; ++i) {
    const auto& lam = priors.topic_lambda.empty() ? priors.lambda : priors.topic_lambda[i / t.V];
    const auto cell = sample_dirichlet(lam, rng);
    t.sigma.insert(t.sigma.end(), cell.begin(), cell.end());
  }
  t.mu.reserve(t.K * t.C * t.U);
  for (std::size_t i = 0; i < t.K * t.C; ++i) {
    const auto cell = sample_dirichlet(priors.eta, rng);
    t.mu.insert(t.mu.end(), cell.begin(), cell.end());
  }
  return t;
}

Corpus generate_documents(GroundTruth& truth, const GenPriors& priors, const GenSizes& sizes,
                          std::uint64_t seed, std::int64_t first_time) {
  priors.validate();
  if (sizes.V != truth.V || sizes.C != truth.C || sizes.K != truth.K) {
    throw std::invalid_argument("generator sizes do not match the ground truth");
  }
  Corpus corpus;
  corpus.scale = priors.scale;
  corpus.epsilon = priors.epsilon;
  for (std::size_t v = 0; v < truth.V; ++v) corpus.vocab.intern("w" + std::to_string(v));
  for (std::size_t c = 0; c < truth.C; ++c) corpus.users.intern("u" + std::to_string(c));
  corpus.reviews.resize(sizes.D);
  truth.docs.resize(sizes.D);

  const std::size_t S = truth.S, U = truth.U, V = truth.V, T = priors.T;
  const double eps = priors.epsilon;
  std::vector<double> fractions;
  for (std::size_t d = 0; d < sizes.D; ++d) {
    Rng rng = make_rng(seed, kDocStream, d);
    DocTruth& dt = truth.docs[d];
    Review& r = corpus.reviews[d];
    r.doc_id = d;
    r.time = first_time + static_cast<std::int64_t>(d);
    r.author = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(truth.C));
    r.author = std::min(r.author, truth.C - 1);

    dt.y.resize(T);
    for (std::size_t t = 0; t < T; ++t) dt.y[t] = static_cast<std::uint32_t>(sample_categorical(truth.pi, rng));
    draw_sticks(priors.beta, T, rng, fractions, dt.x);

    std::poisson_distribution<std::size_t> length(sizes.mean_length);
    const std::size_t n = std::max<std::size_t>(1, length(rng));
    dt.z.resize(n);
    dt.w.resize(n);
    dt.s.resize(n);
    dt.u.resize(n);
    r.tokens.resize(n);
    RunningMoments moments;
    for (std::size_t j = 0; j < n; ++j) {
      dt.z[j] = static_cast<std::uint32_t>(sample_categorical(dt.x, rng));
      const std::size_t k = dt.y[dt.z[j]];
      const std::size_t w = sample_categorical(std::span<const double>(truth.topics.data() + k * V, V), rng);
      r.tokens[j] = static_cast<std::uint32_t>(w);
      dt.w[j] = r.tokens[j];
      dt.s[j] = static_cast<std::uint8_t>(
          sample_categorical(std::span<const double>(truth.sigma.data() + (k * V + w) * S, S), rng));
      dt.u[j] = static_cast<std::uint8_t>(
          sample_categorical(std::span<const double>(truth.mu.data() + (k * truth.C + r.author) * U, U), rng));
      moments.push(word_rating(priors.levels.sentiment[dt.s[j]], priors.levels.preference[dt.u[j]]));
    }
    const auto h = h_params(moments, eps);
    dt.rating = std::clamp(sample_beta(h.h1, h.h2, rng), eps, 1.0 - eps);
    const double span = static_cast<double>(priors.scale.high - priors.scale.low);
    r.raw_rating = std::clamp(static_cast<int>(std::lround(priors.scale.low + dt.rating * span)),
                              priors.scale.low, priors.scale.high);
    r.norm_rating = normalize_rating(r.raw_rating, priors.scale, eps);
  }
  return corpus;
}

Generated generate(const GenPriors& priors, const GenSizes& sizes, std::uint64_t seed) {
  Generated g;
  g.truth = sample_truth(priors, sizes, seed);
  g.corpus = generate_documents(g.truth, priors, sizes, seed);
  return g;
}

RecoveryReport recovery_score(const GroundTruth& truth, const GlobalState& learned,
                              const Levels& levels, RecoveryOptions options) {
  if (learned.V != truth.V) throw std::invalid_argument("learned vocabulary differs from the truth");
  const std::size_t Kp = truth.K, Kl = learned.K, V = truth.V;
  std::vector<double> sim(Kp * Kl), tv(Kp * Kl);
  for (std::size_t a = 0; a < Kp; ++a) {
    const double* p = truth.topics.data() + a * V;
    double pp = 0.0;
    for (std::size_t v = 0; v < V; ++v) pp += p[v] * p[v];
    for (std::size_t b = 0; b < Kl; ++b) {
      const auto row = learned.theta_row(b);
      double total = 0.0, qq = 0.0, pq = 0.0, dist = 0.0;
      for (double x : row) total += x;
      for (std::size_t v = 0; v < V; ++v) {
        const double q = row[v] / total;
        qq += q * q;
        pq += p[v] * q;
        dist += std::abs(p[v] - q);
      }
      sim[a * Kl + b] = pq / std::sqrt(pp * qq);
      tv[a * Kl + b] = 0.5 * dist;
    }
  }
  RecoveryReport rep;
  std::vector<bool> used_p(Kp, false), used_l(Kl, false);
  for (std::size_t m = 0; m < std::min(Kp, Kl); ++m) {
    std::size_t best_a = 0, best_b = 0;
    double best = -1.0;
    for (std::size_t a = 0; a < Kp; ++a) {
      if (used_p[a]) continue;
      for (std::size_t b = 0; b < Kl; ++b) {
        if (!used_l[b] && sim[a * Kl + b] > best) {
          best = sim[a * Kl + b];
          best_a = a;
          best_b = b;
        }
      }
    }
    used_p[best_a] = used_l[best_b] = true;
    rep.pairs.push_back({best_a, best_b, best, tv[best_a * Kl + best_b]});
  }
  std::sort(rep.pairs.begin(), rep.pairs.end(), [](const auto& x, const auto& y) { return x.planted < y.planted; });
  for (const auto& p : rep.pairs) {
    rep.mean_cosine += p.cosine;
    rep.mean_total_variation += p.total_variation;
  }
  if (!rep.pairs.empty()) {
    rep.mean_cosine /= static_cast<double>(rep.pairs.size());
    rep.mean_total_variation /= static_cast<double>(rep.pairs.size());
  }

  std::vector<std::size_t> occurrences(Kp * V, 0);
  for (std::size_t d = 0; d < truth.docs.size(); ++d) {
    const auto& dt = truth.docs[d];
    for (std::size_t j = 0; j < dt.w.size(); ++j) ++occurrences[truth.topic_of(d, j) * V + dt.w[j]];
  }
  for (const auto& p : rep.pairs) {
    for (std::size_t v = 0; v < V; ++v) {
      if (occurrences[p.planted * V + v] < options.min_occurrences) continue;
      const double planted = truth.planted_sentiment(p.planted, v, levels);
      if (std::abs(planted) < options.min_magnitude) continue;
      double acc = 0.0, total = 0.0;
      const auto cell = learned.lambda_cell(p.learned, v);
      for (std::size_t s = 0; s < cell.size(); ++s) {
        acc += levels.sentiment[s] * cell[s];
        total += cell[s];
      }
      ++rep.sign_pairs;
      if ((acc / total > 0.0) == (planted > 0.0) && acc != 0.0) ++rep.sign_agreements;
    }
  }
  return rep;
}

namespace {

using nlohmann::json;

template <class T>
std::vector<T> vec_of(const json& j, const char* key) {
  return j.at(key).get<std::vector<T>>();
}

}  // namespace

void save_truth(const GroundTruth& t, std::ostream& out) {
  json j;
  j["format"] = "tspra-truth";
  j["version"] = 1;
  j["K"] = t.K;
  j["V"] = t.V;
  j["C"] = t.C;
  j["S"] = t.S;
  j["U"] = t.U;
  j["b"] = t.b;
  j["pi"] = t.pi;
  j["topics"] = t.topics;
  j["sigma"] = t.sigma;
  j["mu"] = t.mu;
  json docs = json::array();
  for (const auto& d : t.docs) {
    json o;
    o["y"] = d.y;
    o["x"] = d.x;
    o["z"] = d.z;
    o["w"] = d.w;
    o["s"] = d.s;
    o["u"] = d.u;
    o["rating"] = d.rating;
    docs.push_back(std::move(o));
  }
  j["docs"] = std::move(docs);
  out << j.dump() << '\n';
}

void save_truth(const GroundTruth& truth, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  save_truth(truth, out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

GroundTruth load_truth(std::istream& in) {
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("bad ground-truth file: ") + e.what());
  }
  if (j.value("format", "") != "tspra-truth") throw std::runtime_error("not a ground-truth file");
  GroundTruth t;
  try {
    t.K = j.at("K");
    t.V = j.at("V");
    t.C = j.at("C");
    t.S = j.at("S");
    t.U = j.at("U");
    t.b = vec_of<double>(j, "b");
    t.pi = vec_of<double>(j, "pi");
    t.topics = vec_of<double>(j, "topics");
    t.sigma = vec_of<double>(j, "sigma");
    t.mu = vec_of<double>(j, "mu");
    for (const auto& o : j.at("docs")) {
      DocTruth d;
      d.y = vec_of<std::uint32_t>(o, "y");
      d.x = vec_of<double>(o, "x");
      d.z = vec_of<std::uint32_t>(o, "z");
      d.w = vec_of<std::uint32_t>(o, "w");
      d.s = vec_of<std::uint8_t>(o, "s");
      d.u = vec_of<std::uint8_t>(o, "u");
      d.rating = o.at("rating");
      t.docs.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("bad ground-truth file: ") + e.what());
  }
  if (t.topics.size() != t.K * t.V || t.sigma.size() != t.K * t.V * t.S || t.mu.size() != t.K * t.C * t.U) {
    throw std::runtime_error("ground-truth block sizes are inconsistent");
  }
  return t;
}

GroundTruth load_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return load_truth(in);
}

}  // namespace tspra
