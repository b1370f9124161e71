#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tspra/corpus.hpp"
#include "tspra/inference.hpp"
#include "tspra/state.hpp"

namespace tspra {

/// Local state for a held-out review whose rating is unobserved.
struct PredDocState {
  DocState doc;
  double r1 = 1.0;  // beta parameters of the latent rating
  double r2 = 1.0;
  std::size_t iterations = 0;

  double rating_mean() const { return r1 / (r1 + r2); }
};

/// Word index -> lexicon sentiment value in [-1, 1].
using Lexicon = std::unordered_map<std::uint32_t, double>;

/// Reads "word,value" lines (header optional) and maps words through `vocab`; words not in
/// the vocabulary are ignored. Throws CorpusError on unreadable files or bad values.
Lexicon load_lexicon(const std::filesystem::path& path, const Registry& vocab);
Lexicon parse_lexicon(std::istream& in, const Registry& vocab);

/// Index of the level in `levels` nearest to `value`, ties to the lower level.
std::size_t nearest_level(std::span<const double> levels, double value);

/// Pins rho rows of lexicon words to a point mass on the nearest sentiment level.
/// Returns the number of pinned tokens.
std::size_t apply_lexicon_override(const Lexicon& lexicon, const Review& doc, DocState& st,
                                   const Levels& levels);

/// (E[h1], E[h2]) under the current rho/nu rows, from m joint samples.
HParams update_r(const DocState& st, const Hyperparams& hp, Rng& rng);

/// Iterates xi, phi, beta, rho/nu and r~ to convergence with the globals held fixed.
/// `ex` must be built from the frozen globals in `opts.expectation` mode.
PredDocState predict_local_updates(const Review& doc, const GlobalExpectations& ex,
                                   const Hyperparams& hp, const PredictOptions& opts,
                                   const Lexicon* lexicon = nullptr);

/// Beta mean of r~ mapped back onto the rating scale.
double predict_rating(const PredDocState& st, RatingScale scale);

struct Prediction {
  std::size_t doc_id;
  int true_rating;
  double predicted;
  double abs_error;
};

struct PredictionReport {
  std::vector<Prediction> rows;
  double mae = 0.0;
  std::size_t tokens = 0;
  std::size_t overridden_tokens = 0;

  double override_coverage() const {
    return tokens == 0 ? 0.0 : static_cast<double>(overridden_tokens) / static_cast<double>(tokens);
  }
};

/// Predicts every listed document (all when `docs` is empty). Globals whose registries are
/// smaller than the corpus are extended with prior rows on a private copy.
PredictionReport predict_corpus(const GlobalState& globals, const Corpus& corpus,
                                const Hyperparams& hp, const PredictOptions& opts,
                                const Lexicon* lexicon = nullptr,
                                std::span<const std::size_t> docs = {});

void write_prediction_csv(const PredictionReport& report, std::ostream& out);

}  // namespace tspra
