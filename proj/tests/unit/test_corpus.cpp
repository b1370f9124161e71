#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "tspra/corpus.hpp"

using namespace tspra;
using doctest::Approx;

namespace {

RawReview raw(std::string user, int rating, std::int64_t time, std::vector<std::string> tokens) {
  RawReview r;
  r.user = std::move(user);
  r.item = "p";
  r.rating = rating;
  r.time = time;
  r.tokens = std::move(tokens);
  return r;
}

PreprocessRules loose_rules() {
  PreprocessRules rules;
  rules.min_frequency = 1;
  rules.min_reviews_per_author = 1;
  return rules;
}

Corpus corpus_with_ratings(const std::vector<int>& ratings) {
  Corpus c;
  c.vocab.intern("word");
  c.users.intern("u");
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    Review r;
    r.doc_id = i;
    r.tokens = {0};
    r.raw_rating = ratings[i];
    r.time = static_cast<std::int64_t>(i);
    r.norm_rating = normalize_rating(r.raw_rating, c.scale, c.epsilon);
    c.reviews.push_back(r);
  }
  return c;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("load_reviews examples") {
  std::istringstream one(R"({"user":"u1","item":"p1","rating":5,"time":1000,"text":"great battery"})");
  auto res = parse_reviews(one, {});
  REQUIRE(res.reviews.size() == 1);
  CHECK(res.reviews[0].user == "u1");
  CHECK(res.reviews[0].item == "p1");
  CHECK(res.reviews[0].rating == 5);
  CHECK(res.reviews[0].time == 1000);
  CHECK(*res.reviews[0].text == "great battery");
  CHECK(res.skipped == 0);

  std::istringstream bad_rating(R"({"user":"u1","item":"p1","rating":7,"time":1,"text":"x"})");
  res = parse_reviews(bad_rating, {});
  CHECK(res.reviews.empty());
  CHECK(res.skipped == 1);
  CHECK(res.diagnostics.size() == 1);

  std::istringstream empty("");
  res = parse_reviews(empty, {});
  CHECK(res.reviews.empty());
  CHECK(res.skipped == 0);
}

TEST_CASE("load_reviews skips malformed records and keeps file order") {
  std::istringstream in(
      R"({"user":"a","item":"p","rating":4,"time":5,"tokens":["good","stuff"]})"
      "\n{not json\n"
      R"({"user":"b","item":"p","rating":2,"time":3,"text":"t","tokens":["t"]})"
      "\n"
      R"({"user":"c","item":"p","rating":3,"time":9})"
      "\n"
      R"({"user":"d","item":"p","rating":1,"time":1,"text":"bad"})");
  const auto res = parse_reviews(in, {});
  REQUIRE(res.reviews.size() == 2);
  CHECK(res.reviews[0].user == "a");
  CHECK(res.reviews[0].tokens->size() == 2);
  CHECK(res.reviews[1].user == "d");
  CHECK(res.skipped == 3);
}

TEST_CASE("load_reviews on a missing file throws") {
  CHECK_THROWS_AS(load_reviews("/nonexistent/reviews.jsonl", {}), CorpusError);
}

TEST_CASE("tokenize lowercases and splits on non-alphabetic runs") {
  CHECK(tokenize("Great  battery-life, 10/10!") == std::vector<std::string>{"great", "battery", "life"});
  CHECK(tokenize("").empty());
}

TEST_CASE("preprocess drops short tokens") {
  std::vector<RawReview> raws{raw("a", 5, 1, {"tv", "screen"}), raw("a", 4, 2, {"screen"})};
  const auto c = preprocess(raws, loose_rules());
  CHECK(!c.vocab.find("tv"));
  CHECK(c.vocab.find("screen"));
}

TEST_CASE("preprocess drops tokens below the corpus frequency threshold") {
  std::vector<RawReview> raws;
  for (int i = 0; i < 10; ++i) raws.push_back(raw("a", 5, i, {"common", i < 9 ? "rare" : "common"}));
  PreprocessRules rules;
  rules.min_reviews_per_author = 1;
  const auto c = preprocess(raws, rules);
  CHECK(!c.vocab.find("rare"));  // 9 occurrences
  CHECK(c.vocab.find("common"));
}

TEST_CASE("preprocess drops authors with a single review") {
  std::vector<RawReview> raws{raw("solo", 5, 1, {"screen"}), raw("pair", 4, 2, {"screen"}),
                              raw("pair", 3, 3, {"screen"})};
  auto rules = loose_rules();
  rules.min_reviews_per_author = 2;
  const auto c = preprocess(raws, rules);
  CHECK(c.num_docs() == 2);
  CHECK(!c.users.find("solo"));
}

TEST_CASE("preprocess removes stop words, builds registries in order and sorts by time") {
  std::vector<RawReview> raws{raw("b", 5, 20, {"the", "zebra"}), raw("a", 4, 10, {"apple", "the"})};
  auto rules = loose_rules();
  rules.stop_words = {"the"};
  const auto c = preprocess(raws, rules);
  REQUIRE(c.num_docs() == 2);
  CHECK(c.reviews[0].time == 10);
  CHECK(c.users.name(0) == "a");
  CHECK(c.vocab.name(0) == "apple");
  CHECK(c.vocab.name(1) == "zebra");
  CHECK(c.vocab_size() == 2);
}

TEST_CASE("preprocess with nothing left is an error") {
  std::vector<RawReview> raws{raw("a", 5, 1, {"tv"})};
  CHECK_THROWS_AS(preprocess(raws, loose_rules()), CorpusError);
}

TEST_CASE("preprocess post-conditions hold on random input") {
  std::mt19937_64 rng(5);
  const std::vector<std::string> words{"aa", "bbb", "cccc", "ddddd", "eee", "ffff", "gg", "hhh"};
  std::vector<RawReview> raws;
  for (int i = 0; i < 400; ++i) {
    std::vector<std::string> toks;
    for (int j = 0; j < 1 + static_cast<int>(rng() % 8); ++j) toks.push_back(words[rng() % words.size()]);
    raws.push_back(raw("u" + std::to_string(rng() % 150), 1 + rng() % 5, rng() % 1000, toks));
  }
  PreprocessRules rules;
  const auto c = preprocess(raws, rules);
  std::map<std::size_t, std::size_t> freq, per_author;
  for (const auto& r : c.reviews) {
    CHECK(r.size() >= 1);
    ++per_author[r.author];
    for (auto w : r.tokens) ++freq[w];
  }
  for (auto [w, n] : freq) {
    CHECK(n >= rules.min_frequency);
    CHECK(c.vocab.name(w).size() >= rules.min_token_length);
  }
  for (auto [a, n] : per_author) CHECK(n >= rules.min_reviews_per_author);
  for (std::size_t d = 1; d < c.num_docs(); ++d) CHECK(c.reviews[d - 1].time <= c.reviews[d].time);
}

TEST_CASE("normalize_rating examples") {
  const double eps = 1e-300;
  CHECK(normalize_rating(3, {1, 5}, eps) == 0.5);
  CHECK(normalize_rating(1, {1, 5}, eps) == eps);
  CHECK(normalize_rating(5, {1, 5}, eps) == 1.0 - eps);
  CHECK(normalize_rating(5, {1, 5}, 1e-3) == Approx(0.999));
}

TEST_CASE("normalize_rating is monotone with image in [eps, 1 - eps]") {
  for (double eps : {1e-300, 1e-6, 0.1}) {
    double prev = -1;
    for (int raw = 1; raw <= 10; ++raw) {
      const double x = normalize_rating(raw, {1, 10}, eps);
      CHECK(x >= prev);
      CHECK(x >= eps);
      CHECK(x <= 1 - eps);
      prev = x;
    }
  }
}

TEST_CASE("rating_logs stay finite at the scale ends") {
  const auto c = corpus_with_ratings({1, 3, 5});
  for (const auto& r : c.reviews) {
    const auto logs = c.rating_logs(r);
    CHECK(std::isfinite(logs.log_r));
    CHECK(std::isfinite(logs.log_one_minus_r));
  }
  CHECK(c.rating_logs(c.reviews[2]).log_one_minus_r == Approx(std::log(1e-300)));
  CHECK(c.rating_logs(c.reviews[1]).log_r == Approx(std::log(0.5)));
}

TEST_CASE("balance examples") {
  std::vector<int> ratings(80, 5);
  ratings.insert(ratings.end(), 20, 2);
  auto res = balance(corpus_with_ratings(ratings));
  CHECK(res.factor == 4);
  std::size_t pos = 0, neg = 0;
  for (const auto& r : res.corpus.reviews) (r.raw_rating >= 4 ? pos : neg)++;
  CHECK(pos == 80);
  CHECK(neg == 80);

  std::vector<int> even(50, 4);
  even.insert(even.end(), 50, 3);
  res = balance(corpus_with_ratings(even));
  CHECK(res.factor == 1);
  CHECK(res.corpus.num_docs() == 100);
  CHECK(res.warning);

  res = balance(corpus_with_ratings(std::vector<int>(100, 5)));
  CHECK(res.corpus.num_docs() == 100);
  CHECK(res.warning);
  CHECK_THROWS(balance(Corpus{}));
}

TEST_CASE("balance multiplies each negative review by one factor") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> ratings(5 + rng() % 200);
    for (int& r : ratings) r = 1 + rng() % 5;
    const auto c = corpus_with_ratings(ratings);
    const auto res = balance(c);
    std::size_t pos = 0, neg = 0;
    for (const auto& r : res.corpus.reviews) (r.raw_rating >= 4 ? pos : neg)++;
    CHECK(pos == res.positives);
    CHECK(neg == res.negatives * res.factor);
    if (res.negatives > 0) {
      const auto diff = pos > neg ? pos - neg : neg - pos;
      CHECK(diff <= res.negatives);
    }
  }
}

TEST_CASE("split_by_time examples") {
  auto s = split_by_time(corpus_with_ratings(std::vector<int>(10, 3)), 0.8);
  CHECK(s.train.num_docs() == 8);
  CHECK(s.test.num_docs() == 2);
  s = split_by_time(corpus_with_ratings({1, 2, 3}), 0.5);
  CHECK(s.train.num_docs() == 1);
  CHECK(s.test.num_docs() == 2);
  CHECK_THROWS_AS(split_by_time(corpus_with_ratings({3}), 0.8), CorpusError);
  CHECK_THROWS_AS(split_by_time(corpus_with_ratings({3, 3}), 1.0), CorpusError);
}

TEST_CASE("split_by_time keeps time order and flags unseen tokens and users") {
  Corpus c = corpus_with_ratings({5, 4, 3, 2, 1});
  c.vocab.intern("fresh");
  c.users.intern("newcomer");
  c.reviews[4].tokens = {0, 1, 1};
  c.reviews[4].author = 1;
  const auto s = split_by_time(c, 0.8);
  CHECK(s.train.reviews.back().time <= s.test.reviews.front().time);
  REQUIRE(s.unseen_tokens.size() == 1);
  CHECK(s.unseen_tokens[0] == 2);
  CHECK(s.unseen_author[0]);
  CHECK(s.test.vocab_size() == 2);
  CHECK(s.test.reviews[0].doc_id == 0);
}

TEST_CASE("corpus dump round trip") {
  Corpus c = corpus_with_ratings({1, 5, 3});
  c.vocab.intern("other");
  c.users.intern("v");
  c.reviews[1].tokens = {1, 0, 1};
  c.reviews[1].author = 1;
  std::stringstream ss;
  c.save(ss);
  const auto back = Corpus::load(ss);
  CHECK(back.num_docs() == 3);
  CHECK(back.num_tokens() == c.num_tokens());
  CHECK(back.vocab.names() == c.vocab.names());
  CHECK(back.users.names() == c.users.names());
  for (std::size_t d = 0; d < 3; ++d) {
    CHECK(back.reviews[d].tokens == c.reviews[d].tokens);
    CHECK(back.reviews[d].author == c.reviews[d].author);
    CHECK(back.reviews[d].raw_rating == c.reviews[d].raw_rating);
    CHECK(back.reviews[d].norm_rating == c.reviews[d].norm_rating);
  }
  std::istringstream garbage("hello 1\n");
  CHECK_THROWS_AS(Corpus::load(garbage), CorpusError);
}

}
