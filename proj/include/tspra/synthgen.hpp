#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "tspra/corpus.hpp"
#include "tspra/state.hpp"

namespace tspra {

/// Priors of the simulated process; independent from the model's hyperparameters so a
/// fixture can plant sharper structure than the model assumes.
struct GenPriors {
  double alpha = 1.0;
  double beta = 1.0;
  double theta = 0.1;
  std::vector<double> lambda{1.0, 1.0, 1.0};
  /// Optional per-topic replacement for `lambda` (one vector per planted topic), used to
  /// plant topics with a dominant polarity.
  std::vector<std::vector<double>> topic_lambda;
  std::vector<double> eta{1.0, 1.0};
  std::size_t T = 10;  // document-level tables
  Levels levels;
  RatingScale scale;
  double epsilon = 1e-300;

  void validate() const;
};

struct GenSizes {
  std::size_t D = 1000;
  double mean_length = 30.0;
  std::size_t V = 200;
  std::size_t C = 100;
  std::size_t K = 5;  // planted topics K*
};

/// Per-document latents.
struct DocTruth {
  std::vector<std::uint32_t> y;      // T table -> topic
  std::vector<double> x;             // T stick weights pi(x_d)
  std::vector<std::uint32_t> z;      // n word -> table
  std::vector<std::uint32_t> w;      // n word ids
  std::vector<std::uint8_t> s;       // n sentiment level index
  std::vector<std::uint8_t> u;       // n preference level index
  double rating = 0.5;               // continuous, in [eps, 1 - eps]
};

struct GroundTruth {
  std::size_t K = 0, V = 0, C = 0, S = 0, U = 0;
  std::vector<double> b;       // K stick fractions (last = 1)
  std::vector<double> pi;      // K topic weights
  std::vector<double> topics;  // K x V
  std::vector<double> sigma;   // K x V x S
  std::vector<double> mu;      // K x C x U
  std::vector<DocTruth> docs;

  /// Topic of token j of document d.
  std::size_t topic_of(std::size_t d, std::size_t j) const { return docs[d].y[docs[d].z[j]]; }
  /// s . sigma_{k,v}.
  double planted_sentiment(std::size_t k, std::size_t v, const Levels& levels) const;
};

/// Draws the corpus-level truth (sticks, topics, sigma, mu); no documents.
GroundTruth sample_truth(const GenPriors& priors, const GenSizes& sizes, std::uint64_t seed);

/// Appends `sizes.D` documents drawn from `truth` to a fresh corpus whose registries hold
/// every word w0.. and user u0.. in index order. Timestamps start at `first_time`.
Corpus generate_documents(GroundTruth& truth, const GenPriors& priors, const GenSizes& sizes,
                          std::uint64_t seed, std::int64_t first_time = 0);

struct Generated {
  Corpus corpus;
  GroundTruth truth;
};

/// sample_truth followed by generate_documents.
Generated generate(const GenPriors& priors, const GenSizes& sizes, std::uint64_t seed);

/// Beta(a, b) draw via two gamma variates; falls back to a Bernoulli on the mean when both
/// gammas underflow.
double sample_beta(double a, double b, Rng& rng);
/// Dirichlet draw; all-underflow falls back to a point mass chosen by the parameters.
std::vector<double> sample_dirichlet(std::span<const double> params, Rng& rng);

struct MatchedTopic {
  std::size_t planted;
  std::size_t learned;
  double cosine;
  double total_variation;
};

struct RecoveryReport {
  std::vector<MatchedTopic> pairs;  // ordered by planted topic
  double mean_cosine = 0.0;
  double mean_total_variation = 0.0;
  std::size_t sign_pairs = 0;  // (planted topic, word) pairs checked
  std::size_t sign_agreements = 0;

  double sign_agreement() const {
    return sign_pairs == 0 ? 1.0 : static_cast<double>(sign_agreements) / static_cast<double>(sign_pairs);
  }
};

struct RecoveryOptions {
  std::size_t min_occurrences = 20;
  /// Planted |s . sigma| below this is treated as neutral and not scored.
  double min_magnitude = 0.5;
};

/// Greedy one-to-one matching of planted to learned topics by cosine similarity of the
/// word distributions, then sentiment-sign agreement on frequent planted (topic, word) pairs.
RecoveryReport recovery_score(const GroundTruth& truth, const GlobalState& learned,
                              const Levels& levels, RecoveryOptions options = {});

void save_truth(const GroundTruth& truth, std::ostream& out);
void save_truth(const GroundTruth& truth, const std::filesystem::path& path);
GroundTruth load_truth(std::istream& in);
GroundTruth load_truth(const std::filesystem::path& path);

}  // namespace tspra
