#include "tspra/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tspra {

namespace {

// Lower bound on h1 + h2 when the word ratings have maximal spread (all at 0 or 1).
constexpr double kMinConcentration = 1e-6;

void check_increasing(const std::vector<double>& xs, double lo, double hi, bool open_low,
                      const char* what) {
  if (xs.empty()) throw std::invalid_argument(std::string(what) + " levels must be nonempty");
  if (xs.size() > 255) throw std::invalid_argument(std::string(what) + ": too many levels");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const bool low_ok = open_low ? xs[i] > lo : xs[i] >= lo;
    if (!low_ok || xs[i] > hi) {
      throw std::invalid_argument(std::string(what) + " level out of range");
    }
    if (i > 0 && !(xs[i] > xs[i - 1])) {
      throw std::invalid_argument(std::string(what) + " levels must be strictly increasing");
    }
  }
}

}  // namespace

void Levels::validate() const {
  check_increasing(sentiment, -1.0, 1.0, false, "sentiment");
  check_increasing(preference, 0.0, 1.0, true, "preference");
}

HParams h_params(const RunningMoments& moments, double epsilon) {
  const double mu = std::clamp(moments.mean, epsilon, 1.0 - epsilon);
  const double mu_c = std::clamp(1.0 - moments.mean, epsilon, 1.0 - epsilon);
  const double var = moments.variance();
  const double cap = -std::log(epsilon);
  double c = var > 0.0 ? mu * mu_c / var - 1.0 : std::numeric_limits<double>::infinity();
  c = std::clamp(c, std::min(kMinConcentration, cap), cap);
  return {mu * c, mu_c * c};
}

HParams h_params(std::span<const double> word_ratings, double epsilon) {
  return h_params(RunningMoments::of(word_ratings), epsilon);
}

DocSampler::DocSampler(const Levels& levels, std::size_t num_words, std::size_t num_samples)
    : levels_(&levels),
      num_words_(num_words),
      num_samples_(std::max<std::size_t>(num_samples, 1)),
      s_idx_(num_words * num_samples_),
      u_idx_(num_words * num_samples_),
      sums_(num_samples_) {}

RunningMoments DocSampler::moments_of(const Sums& s) const {
  const double n = static_cast<double>(num_words_);
  return {num_words_, s.sum / n, std::max(0.0, s.sumsq - s.sum * s.sum / n)};
}

double DocSampler::rating_of(std::size_t sample, std::size_t j) const {
  const auto k = sample * num_words_ + j;
  return word_rating(levels_->sentiment[s_idx_[k]], levels_->preference[u_idx_[k]]);
}

void DocSampler::draw(std::span<const double> rho, std::span<const double> nu, Rng& rng) {
  const std::size_t S = levels_->num_sentiment();
  const std::size_t U = levels_->num_preference();
  for (std::size_t i = 0; i < num_samples_; ++i) {
    Sums acc;
    for (std::size_t j = 0; j < num_words_; ++j) {
      const auto k = i * num_words_ + j;
      s_idx_[k] = static_cast<std::uint8_t>(sample_categorical(rho.subspan(j * S, S), rng));
      u_idx_[k] = static_cast<std::uint8_t>(sample_categorical(nu.subspan(j * U, U), rng));
      const double x = rating_of(i, j);
      acc.sum += x;
      acc.sumsq += x * x;
    }
    sums_[i] = acc;
  }
}

void DocSampler::held_grid(std::size_t j, double epsilon, std::span<McEstimate> grid) const {
  const std::size_t S = levels_->num_sentiment();
  const std::size_t U = levels_->num_preference();
  std::fill(grid.begin(), grid.end(), McEstimate{});
  for (std::size_t i = 0; i < num_samples_; ++i) {
    const double old = rating_of(i, j);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t u = 0; u < U; ++u) {
        const double x = word_rating(levels_->sentiment[s], levels_->preference[u]);
        const Sums swapped{sums_[i].sum - old + x, sums_[i].sumsq - old * old + x * x};
        const auto h = h_params(moments_of(swapped), epsilon);
        auto& g = grid[s * U + u];
        g.h1 += h.h1;
        g.h2 += h.h2;
        g.log_b += log_beta(h.h1, h.h2);
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(num_samples_);
  for (auto& g : grid) {
    g.h1 *= inv;
    g.h2 *= inv;
    g.log_b *= inv;
  }
}

void DocSampler::redraw_word(std::size_t j, std::span<const double> rho_j,
                             std::span<const double> nu_j, Rng& rng) {
  for (std::size_t i = 0; i < num_samples_; ++i) {
    const auto k = i * num_words_ + j;
    const double old = rating_of(i, j);
    s_idx_[k] = static_cast<std::uint8_t>(sample_categorical(rho_j, rng));
    u_idx_[k] = static_cast<std::uint8_t>(sample_categorical(nu_j, rng));
    const double x = rating_of(i, j);
    sums_[i].sum += x - old;
    sums_[i].sumsq += x * x - old * old;
  }
}

McEstimate DocSampler::joint_estimate(double epsilon) const {
  McEstimate e;
  for (const auto& s : sums_) {
    const auto h = h_params(moments_of(s), epsilon);
    e.h1 += h.h1;
    e.h2 += h.h2;
    e.log_b += log_beta(h.h1, h.h2);
  }
  const double inv = 1.0 / static_cast<double>(num_samples_);
  e.h1 *= inv;
  e.h2 *= inv;
  e.log_b *= inv;
  return e;
}

McResult mc_expectations(std::span<const double> rho, std::span<const double> nu,
                         const Levels& levels, HeldCoordinate held, RatingLogs rating,
                         const McConfig& cfg, double epsilon) {
  const std::size_t S = levels.num_sentiment();
  const std::size_t U = levels.num_preference();
  const std::size_t n = rho.size() / S;
  if (held.word >= n) throw std::out_of_range("mc_expectations: word index out of range");
  DocSampler sampler(levels, n, cfg.samples);
  Rng rng = make_rng(cfg.seed);
  sampler.draw(rho, nu, rng);
  std::vector<McEstimate> grid(S * U);
  sampler.held_grid(held.word, epsilon, grid);

  McEstimate e;
  auto add = [&](const McEstimate& g, double w) {
    e.h1 += w * g.h1;
    e.h2 += w * g.h2;
    e.log_b += w * g.log_b;
  };
  if (held.which == HeldVariable::sentiment) {
    for (std::size_t u = 0; u < U; ++u) add(grid[held.level * U + u], nu[held.word * U + u]);
  } else {
    for (std::size_t s = 0; s < S; ++s) add(grid[s * U + held.level], rho[held.word * S + s]);
  }
  return {e, e.log_density_term(rating.log_r, rating.log_one_minus_r)};
}

}  // namespace tspra
