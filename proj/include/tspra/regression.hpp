#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tspra/corpus.hpp"
#include "tspra/numerics.hpp"
#include "tspra/rng.hpp"

namespace tspra {

/// Sentiment levels S and preference levels U, both strictly increasing.
struct Levels {
  std::vector<double> sentiment{-1.0, 0.0, 1.0};
  std::vector<double> preference{0.5, 1.0};

  std::size_t num_sentiment() const { return sentiment.size(); }
  std::size_t num_preference() const { return preference.size(); }
  /// Throws std::invalid_argument when the invariants do not hold.
  void validate() const;
};

/// Beta parameters of the review rating given the word ratings.
struct HParams {
  double h1;
  double h2;
};

struct McConfig {
  std::size_t samples = 50;
  std::uint64_t seed = 0;
};

/// Word rating (1 + u*s) / 2, the affine image of u*s on [0, 1].
inline double word_rating(double s, double u) { return 0.5 * (1.0 + u * s); }

/// Moment-matched beta parameters for a set of word ratings. The concentration
/// mean(1-mean)/var - 1 is kept inside (0, -log eps].
HParams h_params(const RunningMoments& moments, double epsilon);
HParams h_params(std::span<const double> word_ratings, double epsilon);

/// Sample means of h1, h2 and log B(h1, h2).
struct McEstimate {
  double h1 = 0.0;
  double h2 = 0.0;
  double log_b = 0.0;

  /// log(r) E[h1] + log(1-r) E[h2] - E[log B]: the rating term of the rho/nu scores.
  double log_density_term(double log_r, double log_one_minus_r) const {
    return log_r * h1 + log_one_minus_r * h2 - log_b;
  }
};

enum class HeldVariable { sentiment, preference };

struct HeldCoordinate {
  std::size_t word;
  HeldVariable which;
  std::size_t level;
};

struct McResult {
  McEstimate estimate;
  double log_density_term;
};

/// Monte-Carlo estimate of E[h1], E[h2], E[log B] with one coordinate of one word held
/// at a candidate level. All other words' (s, u) are sampled from their categoricals;
/// the held word's partner variable is summed out exactly. rho is n x |S|, nu is n x |U|
/// (row-major).
McResult mc_expectations(std::span<const double> rho, std::span<const double> nu,
                         const Levels& levels, HeldCoordinate held, RatingLogs rating,
                         const McConfig& cfg, double epsilon);

/// Joint samples of every word's (s, u) in one document with per-sample running
/// moments of the word ratings. Switching one word's value is O(1) per sample.
class DocSampler {
 public:
  DocSampler(const Levels& levels, std::size_t num_words, std::size_t num_samples);

  /// Draws all words from rho (n x |S|) and nu (n x |U|).
  void draw(std::span<const double> rho, std::span<const double> nu, Rng& rng);

  /// For word j, fills grid[s * |U| + u] with the sample mean of h1/h2/log B when word j
  /// is set to (s, u) and every other word keeps its sampled value.
  void held_grid(std::size_t j, double epsilon, std::span<McEstimate> grid) const;

  /// Redraws word j in every sample from updated rows.
  void redraw_word(std::size_t j, std::span<const double> rho_j, std::span<const double> nu_j,
                   Rng& rng);

  /// Sample means of h1, h2, log B over the current joint samples.
  McEstimate joint_estimate(double epsilon) const;

  std::size_t num_words() const { return num_words_; }
  std::size_t num_samples() const { return num_samples_; }

 private:
  double rating_of(std::size_t sample, std::size_t j) const;

  const Levels* levels_;
  std::size_t num_words_;
  std::size_t num_samples_;
  std::vector<std::uint8_t> s_idx_;  // sample-major: [i * n + j]
  std::vector<std::uint8_t> u_idx_;
  // Per-sample sum and sum of squares of the word ratings. Dyadic levels keep these exact.
  struct Sums {
    double sum = 0.0;
    double sumsq = 0.0;
  };
  RunningMoments moments_of(const Sums& s) const;

  std::vector<Sums> sums_;
};

}  // namespace tspra
