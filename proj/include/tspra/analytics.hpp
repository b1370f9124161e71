#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tspra/corpus.hpp"
#include "tspra/state.hpp"

namespace tspra {

/// Simplex estimate plus its level-weighted scalar.
struct LevelEstimate {
  std::vector<double> estimate;
  double scalar = 0.0;
};

/// lambda_t(k, v) / |lambda_t(k, v)|_1 and its S-weighted mean.
LevelEstimate word_topic_sentiment(const GlobalState& g, const Levels& levels, std::size_t k,
                                   std::size_t v);

struct OverallSentiments {
  std::vector<double> per_word;   // V
  std::vector<double> per_topic;  // K
};

OverallSentiments overall_sentiments(const GlobalState& g, const Levels& levels);

/// eta_t(k, c) / |eta_t(k, c)|_1 and its U-weighted mean.
LevelEstimate user_topic_preference(const GlobalState& g, const Levels& levels, std::size_t k,
                                    std::size_t c);

/// Preference of topic k pooled over all users.
double topic_preference(const GlobalState& g, const Levels& levels, std::size_t k);

/// 1-norm of a Dirichlet parameter vector.
double concentration(std::span<const double> params);
double sentiment_concentration(const GlobalState& g, std::size_t k, std::size_t v);
double preference_concentration(const GlobalState& g, std::size_t k, std::size_t c);
/// Sum over the vocabulary of the lambda concentrations of topic k.
double topic_concentration(const GlobalState& g, std::size_t k);

/// The n largest entries of theta_t row k, ties to the lower word index.
std::vector<std::pair<std::size_t, double>> top_words(const GlobalState& g, std::size_t k,
                                                      std::size_t n);

/// Occurrences of each vocabulary entry in the corpus.
std::vector<std::size_t> word_counts(const Corpus& corpus);

struct SentimentHistogram {
  std::vector<double> edges;         // bins + 1 edges over [-1, 1]
  std::vector<std::size_t> counts;   // bins
  std::size_t words = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

/// Histogram of overall word sentiments for words occurring more than `min_occurrences`
/// times. The last bin is closed on the right.
SentimentHistogram export_sentiment_histogram(const GlobalState& g, const Levels& levels,
                                              std::span<const std::size_t> counts,
                                              std::size_t min_occurrences = 20,
                                              std::size_t bins = 20);

struct TrendRow {
  std::size_t step;
  std::int64_t end_time;
  std::size_t topic;
  double sentiment;
  double preference;
  double concentration;
};

struct TrendSeries {
  std::vector<TrendRow> rows;

  /// Appends one row per topic. `step` must exceed the previous snapshot's step.
  void snapshot(const GlobalState& g, const Levels& levels, std::size_t step,
                std::int64_t end_time);
  std::size_t num_snapshots() const;
  /// Sentiment of `topic` in each snapshot, in order.
  std::vector<double> sentiment_of(std::size_t topic) const;
};

void write_trend_csv(const TrendSeries& trend, std::ostream& out);
void write_word_sentiments_csv(const GlobalState& g, const Levels& levels, const Registry& vocab,
                               std::span<const std::size_t> counts, std::ostream& out);
void write_topic_summary_csv(const GlobalState& g, const Levels& levels, const Registry& vocab,
                             std::size_t top_n, std::ostream& out);
void write_histogram_csv(const SentimentHistogram& h, std::ostream& out);

}  // namespace tspra
