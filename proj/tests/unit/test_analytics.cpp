#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "tspra/analytics.hpp"
#include "tspra/inference.hpp"
#include "tspra/synthgen.hpp"

using namespace tspra;
using doctest::Approx;

namespace {

GlobalState with_cell(std::vector<double> cell) {
  Hyperparams hp = fixture::tiny_hp();
  auto g = GlobalState::priors(hp, 3, 2);
  std::copy(cell.begin(), cell.end(), g.lambda_cell(1, 2).begin());
  return g;
}

// Double-loop oracles.
double naive_word_sentiment(const GlobalState& g, const Levels& lv, std::size_t v) {
  double num = 0, den = 0;
  for (std::size_t k = 0; k < g.K; ++k)
    for (std::size_t s = 0; s < g.S; ++s) {
      num += lv.sentiment[s] * g.lambda_t[(k * g.V + v) * g.S + s];
      den += g.lambda_t[(k * g.V + v) * g.S + s];
    }
  return num / den;
}

double naive_topic_sentiment(const GlobalState& g, const Levels& lv, std::size_t k) {
  double num = 0, den = 0;
  for (std::size_t v = 0; v < g.V; ++v)
    for (std::size_t s = 0; s < g.S; ++s) {
      num += lv.sentiment[s] * g.lambda_t[(k * g.V + v) * g.S + s];
      den += g.lambda_t[(k * g.V + v) * g.S + s];
    }
  return num / den;
}

double naive_topic_preference(const GlobalState& g, const Levels& lv, std::size_t k) {
  double num = 0, den = 0;
  for (std::size_t c = 0; c < g.C; ++c)
    for (std::size_t u = 0; u < g.U; ++u) {
      num += lv.preference[u] * g.eta_t[(k * g.C + c) * g.U + u];
      den += g.eta_t[(k * g.C + c) * g.U + u];
    }
  return num / den;
}

}  // namespace

TEST_SUITE("analytics") {

TEST_CASE("word_topic_sentiment examples") {
  const Levels lv;
  CHECK(word_topic_sentiment(with_cell({1, 1, 1}), lv, 1, 2).scalar == Approx(0.0));
  const auto pos = word_topic_sentiment(with_cell({1, 1, 8}), lv, 1, 2);
  CHECK(pos.scalar == Approx(0.7).epsilon(1e-12));
  CHECK(pos.estimate == std::vector<double>{0.1, 0.1, 0.8});
  CHECK(word_topic_sentiment(with_cell({8, 1, 1}), lv, 1, 2).scalar == Approx(-0.7).epsilon(1e-12));
  CHECK_THROWS_AS(word_topic_sentiment(with_cell({1, 1, 1}), lv, 2, 0), std::out_of_range);
  CHECK_THROWS_AS(word_topic_sentiment(with_cell({1, 1, 1}), lv, 0, 3), std::out_of_range);
}

TEST_CASE("overall_sentiments examples and oracle") {
  const Levels lv;
  const auto hp = fixture::tiny_hp();
  const auto prior = overall_sentiments(GlobalState::priors(hp, 3, 2), lv);
  for (double x : prior.per_word) CHECK(x == 0.0);
  for (double x : prior.per_topic) CHECK(x == 0.0);

  Hyperparams one = hp;
  one.K = 1;
  double last = -1;
  for (double N : {1.0, 10.0, 1e3, 1e6}) {
    auto g = GlobalState::priors(one, 1, 1);
    g.lambda_t[2] += N;
    const double s = overall_sentiments(g, lv).per_word[0];
    CHECK(s > last);
    last = s;
  }
  CHECK(last == Approx(1.0).epsilon(1e-5));

  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = fixture::random_globals(hp, 3, 2, gen);
    const auto o = overall_sentiments(g, lv);
    for (std::size_t v = 0; v < 3; ++v) CHECK(std::abs(o.per_word[v] - naive_word_sentiment(g, lv, v)) < 1e-12);
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(std::abs(o.per_topic[k] - naive_topic_sentiment(g, lv, k)) < 1e-12);
      CHECK(std::abs(topic_preference(g, lv, k) - naive_topic_preference(g, lv, k)) < 1e-12);
    }
  }
}

TEST_CASE("sentiments are invariant under uniform scaling of lambda") {
  const Levels lv;
  std::mt19937_64 gen(6);
  const auto g = fixture::random_globals(fixture::tiny_hp(), 3, 2, gen);
  auto scaled = g;
  for (double& x : scaled.lambda_t) x *= 37.5;
  const auto a = overall_sentiments(g, lv), b = overall_sentiments(scaled, lv);
  for (std::size_t v = 0; v < 3; ++v) CHECK(a.per_word[v] == Approx(b.per_word[v]).epsilon(1e-12));
  CHECK(word_topic_sentiment(g, lv, 1, 1).scalar == Approx(word_topic_sentiment(scaled, lv, 1, 1).scalar));
}

TEST_CASE("user_topic_preference and topic_preference examples") {
  const Levels lv;
  const auto hp = fixture::tiny_hp();
  auto g = GlobalState::priors(hp, 3, 2);
  CHECK(user_topic_preference(g, lv, 0, 0).scalar == Approx(0.75));
  CHECK(topic_preference(g, lv, 0) == Approx(0.75));
  g.eta_cell(0, 1)[0] = 1;
  g.eta_cell(0, 1)[1] = 9;
  CHECK(user_topic_preference(g, lv, 0, 1).scalar == Approx(0.95));
  g.eta_cell(0, 1)[0] = 9;
  g.eta_cell(0, 1)[1] = 1;
  CHECK(user_topic_preference(g, lv, 0, 1).scalar == Approx(0.55));
  for (std::size_t c = 0; c < 2; ++c) g.eta_cell(1, c)[1] = 1e9;
  CHECK(topic_preference(g, lv, 1) == Approx(1.0).epsilon(1e-8));
  CHECK_THROWS_AS(user_topic_preference(g, lv, 0, 2), std::out_of_range);
}

TEST_CASE("concentration examples") {
  const auto hp = fixture::tiny_hp();
  auto g = GlobalState::priors(hp, 3, 2);
  CHECK(sentiment_concentration(g, 0, 0) == 3.0);
  CHECK(preference_concentration(g, 1, 1) == 2.0);
  CHECK(topic_concentration(g, 0) == 9.0);
  g.lambda_cell(0, 0)[2] += 1;
  CHECK(sentiment_concentration(g, 0, 0) == 4.0);
  CHECK_THROWS_AS(sentiment_concentration(g, 0, 3), std::out_of_range);
  CHECK_THROWS_AS(preference_concentration(g, 2, 0), std::out_of_range);
}

TEST_CASE("concentrations are nondecreasing over batch iterations") {
  GenPriors gp;
  GenSizes gs;
  gs.D = 150;
  gs.mean_length = 10;
  gs.V = 40;
  gs.C = 20;
  gs.K = 3;
  const auto gen = generate(gp, gs, 11);
  Hyperparams hp;
  hp.K = 6;
  hp.T = 3;
  hp.mc_samples = 20;
  auto init = init_state(gen.corpus, hp, 2);
  auto g = init.globals;
  // Total concentration is the prior mass plus N after every sweep; starting from the prior it
  // can only grow.
  double prev = 0;
  for (std::size_t k = 0; k < hp.K; ++k) prev += topic_concentration(g, k);
  for (std::size_t it = 1; it <= 4; ++it) {
    g = batch_iteration(gen.corpus, init.docs, g, hp, 2, it, 1);
    double now = 0;
    for (std::size_t k = 0; k < hp.K; ++k) now += topic_concentration(g, k);
    CHECK(now >= prev - 1e-6 * now);
    prev = now;
  }
}

TEST_CASE("top_words examples") {
  const auto hp = fixture::tiny_hp();
  auto g = GlobalState::priors(hp, 3, 2);
  g.theta_row(0)[2] += 5;
  const auto top = top_words(g, 0, 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].first == 2);
  CHECK(top[1].first == 0);
  CHECK(top_words(g, 0, 0).empty());
  const auto ties = top_words(g, 1, 3);
  CHECK(ties[0].first == 0);
  CHECK(ties[1].first == 1);
  CHECK(ties[2].first == 2);
  CHECK(top_words(g, 1, 10).size() == 3);
  CHECK_THROWS(top_words(g, 2, 1));
}

TEST_CASE("sentiment histogram") {
  const Levels lv;
  Hyperparams hp = fixture::tiny_hp();
  hp.K = 2;
  auto g = GlobalState::priors(hp, 4, 2);
  const std::vector<std::size_t> counts{30, 30, 30, 5};
  auto h = export_sentiment_histogram(g, lv, counts, 20, 20);
  CHECK(h.words == 3);
  CHECK(h.counts[10] == 3);
  CHECK(h.edges.size() == 21);
  CHECK(h.edges.front() == -1.0);
  CHECK(h.edges.back() == 1.0);
  CHECK(h.mean == 0.0);

  // Planted +1 and -1 words give a bimodal histogram.
  for (std::size_t k = 0; k < 2; ++k) {
    g.lambda_cell(k, 0)[2] += 1e6;
    g.lambda_cell(k, 1)[0] += 1e6;
  }
  h = export_sentiment_histogram(g, lv, counts, 20, 20);
  CHECK(h.counts[19] == 1);
  CHECK(h.counts[0] == 1);
  CHECK(h.counts[10] == 1);
  const auto s = overall_sentiments(g, lv).per_word;
  CHECK(std::abs(h.mean - (s[0] + s[1] + s[2]) / 3) < 1e-12);

  // "More than" the threshold: a count equal to it is excluded.
  h = export_sentiment_histogram(g, lv, std::vector<std::size_t>{20, 21, 0, 0}, 20, 4);
  CHECK(h.words == 1);
  CHECK_THROWS(export_sentiment_histogram(g, lv, counts, 20, 0));
  CHECK_THROWS(export_sentiment_histogram(g, lv, std::vector<std::size_t>{1}, 20, 4));
}

TEST_CASE("word_counts") {
  CHECK(word_counts(fixture::tiny_corpus()) == std::vector<std::size_t>{2, 1, 2});
}

TEST_CASE("trend series") {
  const Levels lv;
  const auto hp = fixture::tiny_hp();
  std::mt19937_64 gen(8);
  TrendSeries t;
  t.snapshot(GlobalState::priors(hp, 3, 2), lv, 0, 100);
  t.snapshot(fixture::random_globals(hp, 3, 2, gen), lv, 1, 200);
  CHECK(t.num_snapshots() == 2);
  CHECK(t.rows.size() == 4);
  CHECK(t.sentiment_of(1).size() == 2);
  CHECK(t.sentiment_of(1)[0] == 0.0);
  for (const auto& r : t.rows) {
    CHECK(r.sentiment >= -1);
    CHECK(r.sentiment <= 1);
    CHECK(r.preference >= 0.5);
    CHECK(r.preference <= 1);
  }
  CHECK_THROWS(t.snapshot(GlobalState::priors(hp, 3, 2), lv, 1, 300));

  std::ostringstream out;
  write_trend_csv(t, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "step,batch_end_time,topic_id,sentiment,preference,concentration");
  std::getline(in, line);
  CHECK(line.rfind("0,100,0,0,0.75,", 0) == 0);
}

TEST_CASE("CSV exports") {
  const Levels lv;
  const auto hp = fixture::tiny_hp();
  const auto corpus = fixture::tiny_corpus();
  const auto g = GlobalState::priors(hp, 3, 2);
  const auto counts = word_counts(corpus);
  std::ostringstream words, topics, hist;
  write_word_sentiments_csv(g, lv, corpus.vocab, counts, words);
  CHECK(words.str().rfind("word,sentiment,concentration,count\nalpha,0,6,2\n", 0) == 0);
  write_topic_summary_csv(g, lv, corpus.vocab, 2, topics);
  CHECK(topics.str().rfind("topic_id,weight,sentiment,preference,concentration,top_words\n", 0) == 0);
  write_histogram_csv(export_sentiment_histogram(g, lv, counts, 0, 2), hist);
  CHECK(hist.str() == "bin_low,bin_high,count\n-1,0,0\n0,1,3\n# words 3 mean 0 sd 0\n");
}

}
