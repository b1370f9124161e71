#include "tspra/predict.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "tspra/csv.hpp"
#include "tspra/numerics.hpp"
#include "tspra/parallel.hpp"

namespace tspra {

namespace {

constexpr std::uint64_t kPredictStream = 0x9ed1c700ULL << 32;

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

Lexicon parse_lexicon(std::istream& in, const Registry& vocab) {
  Lexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    const auto fields = csv::split(line);
    if (fields.size() < 2) throw CorpusError("lexicon line " + std::to_string(lineno) + ": expected word,value");
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(fields[1], &used);
    } catch (const std::exception&) {
      if (lineno == 1) continue;  // header row
      throw CorpusError("lexicon line " + std::to_string(lineno) + ": bad value '" + fields[1] + "'");
    }
    if (!(value >= -1.0 && value <= 1.0)) {
      throw CorpusError("lexicon line " + std::to_string(lineno) + ": value outside [-1, 1]");
    }
    if (auto idx = vocab.find(fields[0])) lex[static_cast<std::uint32_t>(*idx)] = value;
  }
  return lex;
}

Lexicon load_lexicon(const std::filesystem::path& path, const Registry& vocab) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open lexicon: " + path.string());
  return parse_lexicon(in, vocab);
}

std::size_t nearest_level(std::span<const double> levels, double value) {
  std::size_t best = 0;
  double best_dist = std::abs(levels[0] - value);
  for (std::size_t i = 1; i < levels.size(); ++i) {
    const double d = std::abs(levels[i] - value);
    if (d < best_dist) {
      best = i;
      best_dist = d;
    }
  }
  return best;
}

std::size_t apply_lexicon_override(const Lexicon& lexicon, const Review& doc, DocState& st,
                                   const Levels& levels) {
  if (lexicon.empty()) return 0;
  std::size_t pinned = 0;
  for (std::size_t j = 0; j < doc.size(); ++j) {
    auto it = lexicon.find(doc.tokens[j]);
    if (it == lexicon.end()) continue;
    if (st.rho_fixed.empty()) st.rho_fixed.assign(st.n, 0);
    const auto level = nearest_level(levels.sentiment, it->second);
    auto row = st.rho_row(j);
    std::fill(row.begin(), row.end(), 0.0);
    row[level] = 1.0;
    st.rho_fixed[j] = 1;
    ++pinned;
  }
  return pinned;
}

HParams update_r(const DocState& st, const Hyperparams& hp, Rng& rng) {
  DocSampler sampler(hp.levels, st.n, hp.mc_samples);
  sampler.draw(st.rho_t, st.nu_t, rng);
  const auto e = sampler.joint_estimate(hp.epsilon);
  constexpr double tiny = 1e-300;
  return {std::max(e.h1, tiny), std::max(e.h2, tiny)};
}

PredDocState predict_local_updates(const Review& doc, const GlobalExpectations& ex,
                                   const Hyperparams& hp, const PredictOptions& opts,
                                   const Lexicon* lexicon) {
  if (doc.size() == 0) throw std::invalid_argument("cannot predict a review without tokens");
  if (ex.mode() != opts.expectation) {
    throw std::invalid_argument("expectation table does not match the prediction options");
  }
  PredDocState ps;
  ps.doc = DocState::uniform(doc.size(), hp);
  if (lexicon) apply_lexicon_override(*lexicon, doc, ps.doc, hp.levels);
  DocExpectations dex;
  ex.gather(doc, dex);
  init_local(doc, ps.doc, dex);

  auto& st = ps.doc;
  for (std::size_t it = 1; it <= std::max<std::size_t>(1, opts.max_iterations); ++it) {
    const auto xi0 = st.xi_t, phi0 = st.phi_t, rho0 = st.rho_t, nu0 = st.nu_t;
    const double mean0 = ps.rating_mean();
    // Same stream every round: the fixed point is not blurred by fresh sampling noise.
    Rng rng = make_rng(opts.seed, kPredictStream ^ doc.doc_id);
    update_xi(doc, st, dex);
    update_phi(doc, st, dex);
    update_beta_doc(st, hp.beta);
    const double psi_total = digamma(ps.r1 + ps.r2);
    const RatingCoefficients coeffs{digamma(ps.r1) - psi_total, digamma(ps.r2) - psi_total};
    update_rho_nu(doc, st, dex, coeffs, hp, rng);
    const auto r = update_r(st, hp, rng);
    ps.r1 = r.h1;
    ps.r2 = r.h2;
    ps.iterations = it;
    const double change = std::max({max_abs_diff(st.xi_t, xi0), max_abs_diff(st.phi_t, phi0),
                                    max_abs_diff(st.rho_t, rho0), max_abs_diff(st.nu_t, nu0),
                                    std::abs(ps.rating_mean() - mean0)});
    if (change < opts.tolerance) break;
  }
  return ps;
}

double predict_rating(const PredDocState& st, RatingScale scale) {
  const double m = std::clamp(st.rating_mean(), 0.0, 1.0);
  return scale.low + m * static_cast<double>(scale.high - scale.low);
}

PredictionReport predict_corpus(const GlobalState& globals, const Corpus& corpus,
                                const Hyperparams& hp, const PredictOptions& opts,
                                const Lexicon* lexicon, std::span<const std::size_t> docs) {
  if (corpus.empty()) throw std::invalid_argument("predict: empty corpus");
  const GlobalState* g = &globals;
  GlobalState grown;
  if (corpus.vocab_size() > globals.V || corpus.num_users() > globals.C) {
    grown = globals;
    grown.grow(std::max(globals.V, corpus.vocab_size()), std::max(globals.C, corpus.num_users()), hp);
    g = &grown;
  }
  std::vector<std::size_t> all;
  if (docs.empty()) {
    all.resize(corpus.num_docs());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    docs = all;
  }
  const GlobalExpectations ex(*g, opts.expectation, opts.threads);
  PredictionReport report;
  report.rows.resize(docs.size());
  std::vector<std::size_t> pinned(docs.size(), 0);
  parallel_for(docs.size(), opts.threads, [&](std::size_t i) {
    const auto& doc = corpus.reviews.at(docs[i]);
    const auto ps = predict_local_updates(doc, ex, hp, opts, lexicon);
    const double pred = predict_rating(ps, corpus.scale);
    report.rows[i] = {doc.doc_id, doc.raw_rating, pred, std::abs(pred - doc.raw_rating)};
    if (!ps.doc.rho_fixed.empty()) {
      for (auto f : ps.doc.rho_fixed) pinned[i] += f;
    }
  });
  double total = 0.0;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    total += report.rows[i].abs_error;
    report.tokens += corpus.reviews[docs[i]].size();
    report.overridden_tokens += pinned[i];
  }
  report.mae = total / static_cast<double>(docs.size());
  return report;
}

void write_prediction_csv(const PredictionReport& report, std::ostream& out) {
  csv::row(out, {"doc_id", "true_rating", "predicted_rating", "abs_error"});
  for (const auto& r : report.rows) {
    csv::row(out, {std::to_string(r.doc_id), std::to_string(r.true_rating), csv::number(r.predicted),
                   csv::number(r.abs_error)});
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "# MAE %.4f", report.mae);
  out << buf << '\n';
}

}  // namespace tspra
