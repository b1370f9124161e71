#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "tspra/svi.hpp"
#include "tspra/synthgen.hpp"

using namespace tspra;
using doctest::Approx;

namespace {

double total(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

Generated small_synthetic(std::size_t D, std::uint64_t seed) {
  GenPriors gp;
  GenSizes gs;
  gs.D = D;
  gs.mean_length = 10;
  gs.V = 40;
  gs.C = 20;
  gs.K = 3;
  return generate(gp, gs, seed);
}

Hyperparams small_hp() {
  Hyperparams hp;
  hp.K = 6;
  hp.T = 3;
  hp.mc_samples = 20;
  return hp;
}

}  // namespace

TEST_SUITE("svi") {

TEST_CASE("forgetting schedule rates") {
  CHECK(ForgettingSchedule::inverse().rate(1) == 0.5);
  CHECK(ForgettingSchedule::inverse().rate(3) == 0.25);
  CHECK(ForgettingSchedule::inverse(0).rate(1) == 1.0);
  CHECK(ForgettingSchedule::ratio().rate(1, 100, 1000) == Approx(0.1));
  CHECK(ForgettingSchedule::ratio().rate(1, 5000, 1000) == 1.0);
  CHECK(ForgettingSchedule::fixed(0.3).rate(7) == 0.3);
  CHECK_THROWS(ForgettingSchedule::inverse().rate(0));
  CHECK_THROWS(ForgettingSchedule::fixed(0).validate());
  CHECK_THROWS(ForgettingSchedule::fixed(1.5).validate());
  CHECK_THROWS(ForgettingSchedule::ratio(-1).validate());
  for (auto kind : {ForgettingSchedule::Kind::inverse_t, ForgettingSchedule::Kind::fixed_ratio,
                    ForgettingSchedule::Kind::constant})
    CHECK(parse_schedule_kind(to_string(kind)) == kind);
  CHECK_THROWS(parse_schedule_kind("linear"));
  for (std::size_t t = 1; t < 200; ++t) {
    const double r = ForgettingSchedule::inverse(0.5).rate(t);
    CHECK(r > 0);
    CHECK(r <= 1);
  }
}

TEST_CASE("intermediate_globals examples") {
  const auto hp = fixture::tiny_hp();
  CHECK(intermediate_globals({}, 5.0, hp, 3, 2) == GlobalState::priors(hp, 3, 2));

  // One word w = 1 fully on topic 0: theta~*_0 = theta + D e_w.
  Review doc;
  doc.tokens = {1};
  auto st = DocState::uniform(1, hp);
  st.phi_t = {1, 0};
  st.xi_t = {1, 0, 0.5, 0.5};
  std::vector<DocRef> refs{{&doc, &st}};
  const double D = 250;
  const auto g = intermediate_globals(refs, D, hp, 3, 2);
  CHECK(g.theta_t == std::vector<double>{hp.theta, hp.theta + D, hp.theta, hp.theta, hp.theta, hp.theta});
  CHECK(intermediate_globals(refs, 1.0, hp, 3, 2) == accumulate_globals(refs, hp, 3, 2));
  CHECK_THROWS(intermediate_globals(refs, 0.0, hp, 3, 2));
}

TEST_CASE("intermediate_globals at scale 1 equals the batch updates") {
  const auto hp = fixture::tiny_hp();
  const auto corpus = fixture::tiny_corpus();
  std::mt19937_64 gen(5);
  std::vector<DocState> states;
  for (const auto& doc : corpus.reviews) states.push_back(fixture::random_state(doc.size(), hp, gen));
  const auto refs = doc_refs(corpus, states);
  const auto g = intermediate_globals(refs, 1.0, hp, 3, 2);
  const auto naive = oracle::global_updates(corpus.reviews, states, hp, 3, 2);
  for (auto [got, want] : {std::pair{&g.theta_t, &naive.theta}, std::pair{&g.lambda_t, &naive.lambda},
                           std::pair{&g.eta_t, &naive.eta}, std::pair{&g.alpha_t, &naive.alpha}}) {
    REQUIRE(got->size() == want->size());
    for (std::size_t i = 0; i < got->size(); ++i) CHECK(std::abs((*got)[i] - (*want)[i]) < 1e-9);
  }
}

TEST_CASE("merge examples") {
  const auto hp = fixture::tiny_hp();
  std::mt19937_64 gen(12);
  const auto a = fixture::random_globals(hp, 3, 2, gen);
  const auto b = fixture::random_globals(hp, 3, 2, gen);
  CHECK(merge(a, b, 0.0) == a);
  CHECK(merge(a, b, 1.0) == b);
  const auto mid = merge(a, b, 0.5);
  for (std::size_t i = 0; i < a.theta_t.size(); ++i) CHECK(mid.theta_t[i] == Approx((a.theta_t[i] + b.theta_t[i]) / 2));
  for (std::size_t i = 0; i < a.lambda_t.size(); ++i)
    CHECK(mid.lambda_t[i] == Approx((a.lambda_t[i] + b.lambda_t[i]) / 2));
  CHECK_THROWS(merge(a, GlobalState::priors(hp, 4, 2), 0.5));
  CHECK_THROWS(merge(a, b, 1.5));
  CHECK_THROWS(merge(a, b, -0.1));
}

TEST_CASE("merge preserves positivity") {
  const auto hp = fixture::tiny_hp();
  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> unif(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = merge(fixture::random_globals(hp, 3, 2, gen), fixture::random_globals(hp, 3, 2, gen), unif(gen));
    for (auto* block : {&m.alpha_t, &m.theta_t, &m.lambda_t, &m.eta_t})
      for (double x : *block) CHECK(x > 0);
  }
}

TEST_CASE("one stochastic step is the midpoint of the initialization and the intermediate") {
  const auto hp = fixture::tiny_hp();
  const auto corpus = fixture::tiny_corpus().subset(0, 1);
  StochasticOptions opts;
  opts.max_steps = 1;
  opts.seed = 4;
  const auto res = train_stochastic(corpus, hp, opts);
  CHECK(res.steps == 1);
  const auto init = init_globals(hp, 3, 2, 4);
  // The intermediate holds the priors plus D = 1 copies of the document's counts.
  const double n = corpus.reviews[0].size();
  CHECK(total(res.globals.theta_t) == Approx(0.5 * total(init.theta_t) + 0.5 * (6 * hp.theta + n)));
  CHECK(total(res.globals.lambda_t) == Approx(0.5 * total(init.lambda_t) + 0.5 * (18 + n)));
  double a1 = 0;
  for (std::size_t k = 0; k < hp.K; ++k) a1 += res.globals.alpha_t[2 * k];
  CHECK(a1 == Approx(0.5 * hp.K + 0.5 * (hp.K + hp.T)));
}

TEST_CASE("stochastic training is deterministic and stays positive") {
  const auto gen = small_synthetic(80, 3);
  const auto hp = small_hp();
  StochasticOptions opts;
  opts.max_steps = 60;
  opts.seed = 7;
  const auto a = train_stochastic(gen.corpus, hp, opts);
  const auto b = train_stochastic(gen.corpus, hp, opts);
  CHECK(a.globals == b.globals);
  CHECK(a.steps == 60);
  for (auto* block : {&a.globals.alpha_t, &a.globals.theta_t, &a.globals.lambda_t, &a.globals.eta_t})
    for (double x : *block) CHECK(x > 0);
  opts.seed = 8;
  CHECK_FALSE(train_stochastic(gen.corpus, hp, opts).globals == a.globals);
  opts.with_replacement = true;
  CHECK(train_stochastic(gen.corpus, hp, opts).steps == 60);
  CHECK_THROWS(train_stochastic(Corpus{}, hp, opts));
}

TEST_CASE("stochastic probes record increasing steps") {
  const auto gen = small_synthetic(60, 4);
  const auto hp = small_hp();
  StochasticOptions opts;
  opts.max_steps = 30;
  opts.probe_every = 10;
  opts.probe_size = 20;
  const auto res = train_stochastic(gen.corpus, hp, opts);
  REQUIRE(res.history.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(res.history[i].iteration == 10 * (i + 1));
    CHECK(res.history[i].mae >= 0);
    CHECK(res.history[i].mae <= 4);
  }
}

TEST_CASE("continue_stochastic from a step resumes the schedule") {
  const auto gen = small_synthetic(40, 5);
  const auto hp = small_hp();
  StochasticOptions opts;
  opts.max_steps = 5;
  const auto start = init_globals(hp, gen.corpus.vocab_size(), gen.corpus.num_users(), 0);
  const auto res = continue_stochastic(gen.corpus, hp, start, 10, opts);
  CHECK(res.steps == 5);
  CHECK(res.globals.same_shape(start));
}

TEST_CASE("online training with zero batches keeps one base snapshot") {
  const auto gen = small_synthetic(50, 6);
  const auto hp = small_hp();
  OnlineConfig cfg;
  OnlineOptions opts;
  opts.base.stop.max_iterations = 3;
  const auto res = train_online(gen.corpus, {}, cfg, hp, opts);
  CHECK(res.trend.num_snapshots() == 1);
  CHECK(res.trend.rows.size() == hp.K);
  CHECK(res.rounds.empty());
  CHECK_THROWS(train_online(Corpus{}, {}, cfg, hp, opts));
}

TEST_CASE("online training is reproducible and respects the round cap") {
  const auto gen = small_synthetic(120, 7);
  const auto hp = small_hp();
  const auto stream = split_stream(gen.corpus, 60, 20);
  REQUIRE(stream.batches.size() == 3);
  OnlineConfig cfg;
  cfg.base_size = 60;
  cfg.batch_cap = 4;
  OnlineOptions opts;
  opts.seed = 3;
  opts.base.stop.max_iterations = 3;
  std::vector<Corpus> batches = stream.batches;
  batches.insert(batches.begin() + 1, Corpus{});
  const auto a = train_online(stream.base, batches, cfg, hp, opts);
  const auto b = train_online(stream.base, batches, cfg, hp, opts);
  CHECK(a.globals == b.globals);
  REQUIRE(a.trend.rows.size() == b.trend.rows.size());
  for (std::size_t i = 0; i < a.trend.rows.size(); ++i) {
    CHECK(a.trend.rows[i].sentiment == b.trend.rows[i].sentiment);
    CHECK(a.trend.rows[i].step == b.trend.rows[i].step);
  }
  CHECK(a.trend.num_snapshots() == 4);
  CHECK(a.rounds.size() == 3);
  for (auto r : a.rounds) {
    CHECK(r >= 1);
    CHECK(r <= 4);
  }
  REQUIRE(a.diagnostics.size() == 1);
  CHECK(a.diagnostics[0].find("empty") != std::string::npos);
}

TEST_CASE("online batches with a small rate move sentiments by a bounded amount") {
  const auto gen = small_synthetic(120, 8);
  const auto hp = small_hp();
  const auto stream = split_stream(gen.corpus, 100, 20);
  OnlineConfig cfg;
  cfg.schedule = ForgettingSchedule::fixed(0.01);
  OnlineOptions opts;
  opts.base.stop.max_iterations = 3;
  const auto res = train_online(stream.base, stream.batches, cfg, hp, opts);
  for (std::size_t k = 0; k < hp.K; ++k) {
    const auto s = res.trend.sentiment_of(k);
    REQUIRE(s.size() == 2);
    // A convex step of weight r moves a ratio of positive blocks by at most r times the full swing of 2.
    CHECK(std::abs(s[1] - s[0]) <= 0.01 * 2);
  }
}

TEST_CASE("split_stream") {
  const auto gen = small_synthetic(25, 9);
  const auto s = split_stream(gen.corpus, 10, 6);
  CHECK(s.base.num_docs() == 10);
  REQUIRE(s.batches.size() == 3);
  CHECK(s.batches[2].num_docs() == 3);
  CHECK_THROWS(split_stream(gen.corpus, 0, 6));
  CHECK_THROWS(split_stream(gen.corpus, 26, 6));
  CHECK_THROWS(split_stream(gen.corpus, 10, 0));
}

TEST_CASE("online config validation") {
  OnlineConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.base_size = 0;
  CHECK_THROWS(cfg.validate());
}

}
