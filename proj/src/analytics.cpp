#include "tspra/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "tspra/csv.hpp"

namespace tspra {

namespace {

// Weighted level mean, asserted to lie in the level range up to round-off.
double level_mean(std::span<const double> weights, std::span<const double> levels, double total) {
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) acc += levels[i] * weights[i];
  const double x = acc / total;
  const double lo = levels.front(), hi = levels.back();
  const double slack = 1e-9 * std::max(1.0, std::abs(hi - lo));
  if (!(x >= lo - slack && x <= hi + slack)) throw std::logic_error("level estimate outside the level range");
  return std::clamp(x, lo, hi);
}

void check_index(std::size_t i, std::size_t n, const char* what) {
  if (i >= n) throw std::out_of_range(std::string(what) + " index out of range");
}

}  // namespace

LevelEstimate word_topic_sentiment(const GlobalState& g, const Levels& levels, std::size_t k,
                                   std::size_t v) {
  check_index(k, g.K, "topic");
  check_index(v, g.V, "word");
  const auto cell = g.lambda_cell(k, v);
  const double total = concentration(cell);
  LevelEstimate out;
  for (double x : cell) out.estimate.push_back(x / total);
  out.scalar = level_mean(cell, levels.sentiment, total);
  return out;
}

OverallSentiments overall_sentiments(const GlobalState& g, const Levels& levels) {
  const std::size_t K = g.K, V = g.V, S = g.S;
  std::vector<double> word_mass(V * S, 0.0), topic_mass(K * S, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t v = 0; v < V; ++v) {
      const auto cell = g.lambda_cell(k, v);
      for (std::size_t s = 0; s < S; ++s) {
        word_mass[v * S + s] += cell[s];
        topic_mass[k * S + s] += cell[s];
      }
    }
  }
  OverallSentiments out;
  out.per_word.resize(V);
  out.per_topic.resize(K);
  for (std::size_t v = 0; v < V; ++v) {
    std::span<const double> m(word_mass.data() + v * S, S);
    out.per_word[v] = level_mean(m, levels.sentiment, concentration(m));
  }
  for (std::size_t k = 0; k < K; ++k) {
    std::span<const double> m(topic_mass.data() + k * S, S);
    out.per_topic[k] = level_mean(m, levels.sentiment, concentration(m));
  }
  return out;
}

LevelEstimate user_topic_preference(const GlobalState& g, const Levels& levels, std::size_t k,
                                    std::size_t c) {
  check_index(k, g.K, "topic");
  check_index(c, g.C, "user");
  const auto cell = g.eta_cell(k, c);
  const double total = concentration(cell);
  LevelEstimate out;
  for (double x : cell) out.estimate.push_back(x / total);
  out.scalar = level_mean(cell, levels.preference, total);
  return out;
}

double topic_preference(const GlobalState& g, const Levels& levels, std::size_t k) {
  check_index(k, g.K, "topic");
  std::vector<double> mass(g.U, 0.0);
  for (std::size_t c = 0; c < g.C; ++c) {
    const auto cell = g.eta_cell(k, c);
    for (std::size_t u = 0; u < g.U; ++u) mass[u] += cell[u];
  }
  const double total = concentration(mass);
  if (total == 0.0) return level_mean(std::vector<double>(g.U, 1.0), levels.preference, g.U);
  return level_mean(mass, levels.preference, total);
}

double concentration(std::span<const double> params) {
  return std::accumulate(params.begin(), params.end(), 0.0);
}

double sentiment_concentration(const GlobalState& g, std::size_t k, std::size_t v) {
  check_index(k, g.K, "topic");
  check_index(v, g.V, "word");
  return concentration(g.lambda_cell(k, v));
}

double preference_concentration(const GlobalState& g, std::size_t k, std::size_t c) {
  check_index(k, g.K, "topic");
  check_index(c, g.C, "user");
  return concentration(g.eta_cell(k, c));
}

double topic_concentration(const GlobalState& g, std::size_t k) {
  check_index(k, g.K, "topic");
  std::span<const double> block(g.lambda_t.data() + k * g.V * g.S, g.V * g.S);
  return concentration(block);
}

std::vector<std::pair<std::size_t, double>> top_words(const GlobalState& g, std::size_t k,
                                                      std::size_t n) {
  check_index(k, g.K, "topic");
  n = std::min(n, g.V);
  const auto row = g.theta_row(k);
  std::vector<std::size_t> idx(g.V);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(),
                    [&](std::size_t a, std::size_t b) { return row[a] > row[b] || (row[a] == row[b] && a < b); });
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(idx[i], row[idx[i]]);
  return out;
}

std::vector<std::size_t> word_counts(const Corpus& corpus) {
  std::vector<std::size_t> counts(corpus.vocab_size(), 0);
  for (const auto& r : corpus.reviews)
    for (auto w : r.tokens) ++counts.at(w);
  return counts;
}

SentimentHistogram export_sentiment_histogram(const GlobalState& g, const Levels& levels,
                                              std::span<const std::size_t> counts,
                                              std::size_t min_occurrences, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
  if (counts.size() != g.V) throw std::invalid_argument("word counts do not match the vocabulary");
  SentimentHistogram h;
  h.counts.assign(bins, 0);
  for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(-1.0 + 2.0 * static_cast<double>(b) / static_cast<double>(bins));
  const auto sentiments = overall_sentiments(g, levels).per_word;
  std::vector<double> kept;
  for (std::size_t v = 0; v < g.V; ++v) {
    if (counts[v] <= min_occurrences) continue;
    const double x = sentiments[v];
    kept.push_back(x);
    auto b = static_cast<std::size_t>(std::floor((x + 1.0) / 2.0 * static_cast<double>(bins)));
    ++h.counts[std::min(b, bins - 1)];
  }
  h.words = kept.size();
  if (!kept.empty()) {
    const auto moments = RunningMoments::of(kept);
    h.mean = moments.mean;
    h.stddev = std::sqrt(moments.variance());
  }
  return h;
}

void TrendSeries::snapshot(const GlobalState& g, const Levels& levels, std::size_t step,
                           std::int64_t end_time) {
  if (!rows.empty() && step <= rows.back().step) throw std::invalid_argument("trend steps must increase");
  const auto sentiments = overall_sentiments(g, levels).per_topic;
  for (std::size_t k = 0; k < g.K; ++k) {
    rows.push_back({step, end_time, k, sentiments[k], topic_preference(g, levels, k),
                    topic_concentration(g, k)});
  }
}

std::size_t TrendSeries::num_snapshots() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (i == 0 || rows[i].step != rows[i - 1].step) ++n;
  return n;
}

std::vector<double> TrendSeries::sentiment_of(std::size_t topic) const {
  std::vector<double> out;
  for (const auto& r : rows)
    if (r.topic == topic) out.push_back(r.sentiment);
  return out;
}

void write_trend_csv(const TrendSeries& trend, std::ostream& out) {
  csv::row(out, {"step", "batch_end_time", "topic_id", "sentiment", "preference", "concentration"});
  for (const auto& r : trend.rows) {
    csv::row(out, {std::to_string(r.step), std::to_string(r.end_time), std::to_string(r.topic),
                   csv::number(r.sentiment), csv::number(r.preference), csv::number(r.concentration)});
  }
}

void write_word_sentiments_csv(const GlobalState& g, const Levels& levels, const Registry& vocab,
                               std::span<const std::size_t> counts, std::ostream& out) {
  const auto sentiments = overall_sentiments(g, levels).per_word;
  csv::row(out, {"word", "sentiment", "concentration", "count"});
  for (std::size_t v = 0; v < g.V; ++v) {
    double conc = 0.0;
    for (std::size_t k = 0; k < g.K; ++k) conc += concentration(g.lambda_cell(k, v));
    csv::row(out, {v < vocab.size() ? vocab.name(v) : "#" + std::to_string(v), csv::number(sentiments[v]),
                   csv::number(conc), std::to_string(v < counts.size() ? counts[v] : 0)});
  }
}

void write_topic_summary_csv(const GlobalState& g, const Levels& levels, const Registry& vocab,
                             std::size_t top_n, std::ostream& out) {
  const auto sentiments = overall_sentiments(g, levels).per_topic;
  csv::row(out, {"topic_id", "weight", "sentiment", "preference", "concentration", "top_words"});
  for (std::size_t k = 0; k < g.K; ++k) {
    std::string words;
    for (const auto& [v, w] : top_words(g, k, top_n)) {
      if (!words.empty()) words += ' ';
      words += v < vocab.size() ? vocab.name(v) : "#" + std::to_string(v);
    }
    const double weight = g.alpha_t[2 * k] - 1.0;
    csv::row(out, {std::to_string(k), csv::number(weight), csv::number(sentiments[k]),
                   csv::number(topic_preference(g, levels, k)), csv::number(topic_concentration(g, k)), words});
  }
}

void write_histogram_csv(const SentimentHistogram& h, std::ostream& out) {
  csv::row(out, {"bin_low", "bin_high", "count"});
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    csv::row(out, {csv::number(h.edges[b]), csv::number(h.edges[b + 1]), std::to_string(h.counts[b])});
  }
  out << "# words " << h.words << " mean " << csv::number(h.mean) << " sd " << csv::number(h.stddev) << '\n';
}

}  // namespace tspra
