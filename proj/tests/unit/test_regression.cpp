#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tspra/regression.hpp"

using namespace tspra;
using doctest::Approx;

namespace {

constexpr double kEps = 1e-300;

struct Rows {
  std::vector<double> rho, nu;
};

// A fixed 3-word document with mixed rows.
Rows three_word_rows() {
  return {{0.2, 0.3, 0.5, 0.6, 0.1, 0.3, 0.1, 0.7, 0.2}, {0.4, 0.6, 0.7, 0.3, 0.5, 0.5}};
}

RatingLogs logs_of(double r) { return {std::log(r), std::log1p(-r)}; }

}  // namespace

TEST_SUITE("regression") {

TEST_CASE("word_rating examples") {
  CHECK(word_rating(1, 1) == 1.0);
  CHECK(word_rating(0, 0.5) == 0.5);
  CHECK(word_rating(0, 1) == 0.5);
  CHECK(word_rating(-1, 0.5) == 0.25);
}

TEST_CASE("word_rating is monotone in s") {
  const Levels levels;
  for (double u : levels.preference)
    for (std::size_t i = 1; i < levels.sentiment.size(); ++i)
      CHECK(word_rating(levels.sentiment[i], u) > word_rating(levels.sentiment[i - 1], u));
}

TEST_CASE("Levels validation") {
  Levels ok;
  CHECK_NOTHROW(ok.validate());
  Levels bad;
  bad.preference = {0.0, 1.0};
  CHECK_THROWS(bad.validate());
  bad = Levels{};
  bad.sentiment = {-1, 1, 0};
  CHECK_THROWS(bad.validate());
  bad = Levels{};
  bad.sentiment = {};
  CHECK_THROWS(bad.validate());
  bad = Levels{};
  bad.sentiment = {-2, 0};
  CHECK_THROWS(bad.validate());
}

TEST_CASE("h_params examples") {
  auto h = h_params(std::vector<double>{1.0, 0.5, 0.0}, kEps);
  CHECK(h.h1 == Approx(0.25).epsilon(1e-12));
  CHECK(h.h2 == Approx(0.25).epsilon(1e-12));
  const double cap = -std::log(kEps);
  h = h_params(std::vector<double>{0.75, 0.75, 0.75}, kEps);
  CHECK(h.h1 == Approx(0.75 * cap));
  CHECK(h.h2 == Approx(0.25 * cap));
  h = h_params(std::vector<double>{0.5}, kEps);
  CHECK(h.h1 == Approx(cap / 2));
  CHECK(h.h2 == Approx(cap / 2));
}

TEST_CASE("h_params invariants under fuzzing") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> unif(0, 1);
  for (double eps : {1e-300, 1e-12, 1e-3, 0.1}) {
    const double cap = -std::log(eps);
    for (int trial = 0; trial < 2000; ++trial) {
      std::vector<double> r(1 + rng() % 12);
      for (double& x : r) {
        const auto pick = rng() % 4;
        x = pick == 0 ? 0.0 : pick == 1 ? 1.0 : unif(rng);
      }
      const auto h = h_params(r, eps);
      REQUIRE(h.h1 > 0);
      REQUIRE(h.h2 > 0);
      CHECK(h.h1 + h.h2 <= cap * (1 + 1e-12));
      const auto want = oracle::h_of(r, eps);
      CHECK(h.h1 == Approx(want.h1).epsilon(1e-9));
      CHECK(h.h2 == Approx(want.h2).epsilon(1e-9));
    }
  }
}

TEST_CASE("beta mean of h equals the clamped word-rating mean") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> unif(0, 1);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> r(1 + rng() % 20);
    for (double& x : r) x = unif(rng);
    double mean = 0;
    for (double x : r) mean += x;
    mean /= r.size();
    const auto h = h_params(r, kEps);
    CHECK(std::abs(h.h1 / (h.h1 + h.h2) - mean) < 1e-12);
  }
}

TEST_CASE("single-word document: estimator is exact and seed independent") {
  const Levels levels;
  const std::vector<double> rho{0.2, 0.3, 0.5}, nu{0.6, 0.4};
  const auto want = oracle::enumerate_held(rho, nu, levels, 1, 0, true, 2, kEps);
  double first = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = mc_expectations(rho, nu, levels, {0, HeldVariable::sentiment, 2}, logs_of(0.7),
                                   {50, seed}, kEps);
    CHECK(r.estimate.h1 == Approx(want.h1).epsilon(1e-12));
    CHECK(r.estimate.h2 == Approx(want.h2).epsilon(1e-12));
    CHECK(r.estimate.log_b == Approx(want.log_b).epsilon(1e-12));
    if (seed == 0) first = r.log_density_term;
    CHECK(r.log_density_term == first);
  }
}

TEST_CASE("3-word document: m=5000 agrees with exhaustive enumeration") {
  // Configurations with equal ratings hit the concentration cap, so the sample mean is
  // heavy tailed; compare against the exact standard error of a plain m-sample mean.
  const Levels levels;
  const auto rows = three_word_rows();
  const double m = 5000;
  auto se = [m](double mean, double sq) { return std::sqrt(std::max(0.0, sq - mean * mean) / m); };
  for (std::size_t j = 0; j < 3; ++j) {
    for (bool sent : {true, false}) {
      const std::size_t levels_n = sent ? 3 : 2;
      for (std::size_t level = 0; level < levels_n; ++level) {
        const auto want = oracle::enumerate_held(rows.rho, rows.nu, levels, 3, j, sent, level, kEps);
        const auto got = mc_expectations(rows.rho, rows.nu, levels,
                                         {j, sent ? HeldVariable::sentiment : HeldVariable::preference, level},
                                         logs_of(0.6), {5000, 77 + j}, kEps);
        INFO("word " << j << " sentiment " << sent << " level " << level);
        CHECK(std::abs(got.estimate.h1 - want.h1) <= 4.5 * se(want.h1, want.h1_sq));
        CHECK(std::abs(got.estimate.h2 - want.h2) <= 4.5 * se(want.h2, want.h2_sq));
        CHECK(std::abs(got.estimate.log_b - want.log_b) <= 4.5 * se(want.log_b, want.log_b_sq));
      }
    }
  }
}

TEST_CASE("estimator is unbiased over seeds") {
  const Levels levels;
  const auto rows = three_word_rows();
  const auto want = oracle::enumerate_held(rows.rho, rows.nu, levels, 3, 1, true, 0, kEps);
  std::vector<double> means;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto got = mc_expectations(rows.rho, rows.nu, levels, {1, HeldVariable::sentiment, 0},
                                     logs_of(0.5), {50, 1000 + seed}, kEps);
    means.push_back(got.estimate.h1);
  }
  const auto rm = RunningMoments::of(means);
  const double se = std::sqrt(rm.variance() * means.size() / (means.size() - 1.0) / means.size());
  CHECK(std::abs(rm.mean - want.h1) <= 3 * se);
}

TEST_CASE("high rating favours the positive level of a one-word document") {
  const Levels levels;
  const std::vector<double> rho{1.0 / 3, 1.0 / 3, 1.0 / 3}, nu{0.0, 1.0};
  const auto logs = logs_of(1.0 - 1e-12);
  const auto pos = mc_expectations(rho, nu, levels, {0, HeldVariable::sentiment, 2}, logs, {50, 1}, kEps);
  const auto neg = mc_expectations(rho, nu, levels, {0, HeldVariable::sentiment, 0}, logs, {50, 1}, kEps);
  CHECK(pos.log_density_term > neg.log_density_term);
}

TEST_CASE("DocSampler redraw keeps moments consistent") {
  const Levels levels;
  const auto rows = three_word_rows();
  DocSampler sampler(levels, 3, 200);
  Rng rng = make_rng(9);
  sampler.draw(rows.rho, rows.nu, rng);
  const std::vector<double> point_rho{0, 0, 1}, point_nu{0, 1};
  for (std::size_t j = 0; j < 3; ++j) sampler.redraw_word(j, point_rho, point_nu, rng);
  // Every sample is now the all-ones document: zero variance, cap engaged, mean 1 - eps.
  const auto e = sampler.joint_estimate(kEps);
  CHECK(e.h1 == Approx(-std::log(kEps)));
  CHECK(e.h2 < 1e-200);
  std::vector<McEstimate> grid(6);
  sampler.held_grid(0, kEps, grid);
  const auto want = oracle::h_of({word_rating(-1, 0.5), 1.0, 1.0}, kEps);
  CHECK(grid[0].h1 == Approx(want.h1).epsilon(1e-12));
  CHECK(grid[0].h2 == Approx(want.h2).epsilon(1e-12));
}

}
