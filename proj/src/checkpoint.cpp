#include "tspra/checkpoint.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>

namespace tspra {

namespace {

constexpr const char* kMagic = "tspra-checkpoint";
constexpr int kVersion = 1;

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_numbers(std::ostream& out, std::span<const double> xs, std::size_t per_line) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out << fmt(xs[i]) << ((i + 1) % per_line == 0 ? '\n' : ' ');
  }
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw CheckpointError("checkpoint is truncated");
    return w;
  }
  void expect(const std::string& key) {
    const auto w = word();
    if (w != key) throw CheckpointError("checkpoint: expected '" + key + "', found '" + w + "'");
  }
  double number() {
    const auto w = word();
    errno = 0;
    char* end = nullptr;
    const double x = std::strtod(w.c_str(), &end);
    if (end != w.c_str() + w.size() || (errno == ERANGE && x != 0.0)) {
      throw CheckpointError("checkpoint: bad number '" + w + "'");
    }
    return x;
  }
  std::uint64_t integer() {
    const auto w = word();
    if (w.empty() || w.find_first_not_of("0123456789") != std::string::npos) {
      throw CheckpointError("checkpoint: bad integer '" + w + "'");
    }
    return std::stoull(w);
  }
  std::vector<double> numbers(std::size_t n) {
    std::vector<double> xs(n);
    for (auto& x : xs) x = number();
    return xs;
  }
  std::vector<std::string> lines(std::size_t n) {
    std::string line;
    std::getline(in_, line);  // rest of the count line
    std::vector<std::string> out(n);
    for (auto& s : out) {
      if (!std::getline(in_, s)) throw CheckpointError("checkpoint: truncated name list");
    }
    return out;
  }

 private:
  std::istream& in_;
};

void check_positive(const std::vector<double>& xs, const char* block) {
  for (double x : xs) {
    if (!(x > 0.0) || !std::isfinite(x)) throw CheckpointError(std::string("checkpoint: non-positive entry in ") + block);
  }
}

}  // namespace

void Checkpoint::save(std::ostream& out) const {
  const auto& g = globals;
  out << kMagic << ' ' << kVersion << '\n';
  out << "K " << hp.K << " T " << hp.T << " V " << g.V << " C " << g.C << " S " << g.S << " U " << g.U << '\n';
  out << "sentiment_levels";
  for (double x : hp.levels.sentiment) out << ' ' << fmt(x);
  out << "\npreference_levels";
  for (double x : hp.levels.preference) out << ' ' << fmt(x);
  out << "\nalpha " << fmt(hp.alpha) << " beta " << fmt(hp.beta) << " theta " << fmt(hp.theta) << '\n';
  out << "lambda";
  for (double x : hp.lambda) out << ' ' << fmt(x);
  out << "\neta";
  for (double x : hp.eta) out << ' ' << fmt(x);
  out << "\nepsilon " << fmt(hp.epsilon) << " mc_samples " << hp.mc_samples << " perturbation "
      << fmt(hp.perturbation) << '\n';
  out << "seed " << seed << " iteration " << iteration << " mode " << mode << '\n';
  out << "vocab " << vocab.size() << '\n';
  for (const auto& w : vocab) out << w << '\n';
  out << "users " << users.size() << '\n';
  for (const auto& u : users) out << u << '\n';
  out << "alpha_t\n";
  write_numbers(out, g.alpha_t, 2);
  out << "theta_t\n";
  write_numbers(out, g.theta_t, g.V == 0 ? 1 : g.V);
  out << "lambda_t\n";
  write_numbers(out, g.lambda_t, g.S);
  out << "eta_t\n";
  write_numbers(out, g.eta_t, g.U);
  out << "end\n";
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path.string());
  save(out);
  if (!out) throw CheckpointError("failed writing checkpoint: " + path.string());
}

Checkpoint Checkpoint::load(std::istream& in) {
  Reader r(in);
  if (r.word() != kMagic) throw CheckpointError("not a checkpoint file");
  if (r.integer() != static_cast<std::uint64_t>(kVersion)) throw CheckpointError("unsupported checkpoint version");
  Checkpoint c;
  auto& hp = c.hp;
  auto& g = c.globals;
  r.expect("K");
  hp.K = r.integer();
  r.expect("T");
  hp.T = r.integer();
  r.expect("V");
  g.V = r.integer();
  r.expect("C");
  g.C = r.integer();
  r.expect("S");
  g.S = r.integer();
  r.expect("U");
  g.U = r.integer();
  g.K = hp.K;
  if (g.S == 0 || g.U == 0 || g.S > 255 || g.U > 255) throw CheckpointError("checkpoint: bad level counts");
  r.expect("sentiment_levels");
  hp.levels.sentiment = r.numbers(g.S);
  r.expect("preference_levels");
  hp.levels.preference = r.numbers(g.U);
  r.expect("alpha");
  hp.alpha = r.number();
  r.expect("beta");
  hp.beta = r.number();
  r.expect("theta");
  hp.theta = r.number();
  r.expect("lambda");
  hp.lambda = r.numbers(g.S);
  r.expect("eta");
  hp.eta = r.numbers(g.U);
  r.expect("epsilon");
  hp.epsilon = r.number();
  r.expect("mc_samples");
  hp.mc_samples = r.integer();
  r.expect("perturbation");
  hp.perturbation = r.number();
  r.expect("seed");
  c.seed = r.integer();
  r.expect("iteration");
  c.iteration = r.integer();
  r.expect("mode");
  c.mode = r.word();
  try {
    hp.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint hyperparameters: ") + e.what());
  }
  r.expect("vocab");
  if (r.integer() != g.V) throw CheckpointError("checkpoint: vocabulary size mismatch");
  c.vocab = r.lines(g.V);
  r.expect("users");
  if (r.integer() != g.C) throw CheckpointError("checkpoint: user count mismatch");
  c.users = r.lines(g.C);
  r.expect("alpha_t");
  g.alpha_t = r.numbers(2 * g.K);
  r.expect("theta_t");
  g.theta_t = r.numbers(g.K * g.V);
  r.expect("lambda_t");
  g.lambda_t = r.numbers(g.K * g.V * g.S);
  r.expect("eta_t");
  g.eta_t = r.numbers(g.K * g.C * g.U);
  r.expect("end");
  check_positive(g.alpha_t, "alpha_t");
  check_positive(g.theta_t, "theta_t");
  check_positive(g.lambda_t, "lambda_t");
  check_positive(g.eta_t, "eta_t");
  return c;
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  return load(in);
}

void Checkpoint::check_compatible(const Corpus& corpus) const {
  if (corpus.vocab_size() < vocab.size() || corpus.num_users() < users.size()) {
    throw CheckpointError("corpus registries are smaller than the checkpoint's (V " +
                          std::to_string(corpus.vocab_size()) + " vs " + std::to_string(vocab.size()) +
                          ", C " + std::to_string(corpus.num_users()) + " vs " + std::to_string(users.size()) + ")");
  }
  for (std::size_t v = 0; v < vocab.size(); ++v) {
    if (corpus.vocab.name(v) != vocab[v]) {
      throw CheckpointError("vocabulary entry " + std::to_string(v) + " differs: corpus '" +
                            corpus.vocab.name(v) + "', checkpoint '" + vocab[v] + "'");
    }
  }
  for (std::size_t c = 0; c < users.size(); ++c) {
    if (corpus.users.name(c) != users[c]) {
      throw CheckpointError("user entry " + std::to_string(c) + " differs between corpus and checkpoint");
    }
  }
}

bool Checkpoint::operator==(const Checkpoint& o) const {
  return globals == o.globals && vocab == o.vocab && users == o.users && seed == o.seed &&
         iteration == o.iteration && mode == o.mode && hp.K == o.hp.K && hp.T == o.hp.T &&
         hp.alpha == o.hp.alpha && hp.beta == o.hp.beta && hp.theta == o.hp.theta &&
         hp.lambda == o.hp.lambda && hp.eta == o.hp.eta && hp.epsilon == o.hp.epsilon &&
         hp.mc_samples == o.hp.mc_samples && hp.perturbation == o.hp.perturbation &&
         hp.levels.sentiment == o.hp.levels.sentiment && hp.levels.preference == o.hp.levels.preference;
}

Checkpoint make_checkpoint(const GlobalState& g, const Hyperparams& hp, const Corpus& corpus,
                           std::uint64_t seed, std::size_t iteration, std::string mode) {
  if (g.V != corpus.vocab_size() || g.C != corpus.num_users()) {
    throw CheckpointError("globals do not match the corpus registries");
  }
  Checkpoint c;
  c.hp = hp;
  c.globals = g;
  c.vocab = corpus.vocab.names();
  c.users = corpus.users.names();
  c.seed = seed;
  c.iteration = iteration;
  c.mode = std::move(mode);
  return c;
}

}  // namespace tspra
