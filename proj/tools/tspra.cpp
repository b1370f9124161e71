#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tspra/analytics.hpp"
#include "tspra/checkpoint.hpp"
#include "tspra/config.hpp"
#include "tspra/corpus.hpp"
#include "tspra/csv.hpp"
#include "tspra/inference.hpp"
#include "tspra/predict.hpp"
#include "tspra/svi.hpp"
#include "tspra/synthgen.hpp"

using namespace tspra;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void print_stats(const Corpus& c, const char* label) {
  std::printf("%-8s %10s %12s %10s %10s\n", label, "D", "N", "C", "V");
  std::printf("%-8s %10zu %12zu %10zu %10zu\n", "", c.num_docs(), c.num_tokens(), c.num_users(), c.vocab_size());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

// Finds --config before the real parse so the file can seed the option defaults.
std::optional<std::string> config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return std::nullopt;
}

// ---- ingest ----------------------------------------------------------------------------

struct IngestArgs {
  std::string input, output, test_output, stop_words;
  int scale_low = 1, scale_high = 5;
  double epsilon = 1e-300;
  std::size_t min_length = 3, min_frequency = 10, min_author_reviews = 2;
  bool balance = false;
  int positive_threshold = 4;
  double split = 0.0;
};

int cmd_ingest(const IngestArgs& a) {
  if (a.split != 0.0 && a.test_output.empty()) throw UsageError("--split requires --test-output");
  if (a.split != 0.0 && !(a.split > 0.0 && a.split < 1.0)) throw UsageError("--split must lie in (0, 1)");
  const RatingScale scale{a.scale_low, a.scale_high};
  if (scale.high <= scale.low) throw UsageError("rating scale must span at least two values");
  auto loaded = load_reviews(a.input, scale);
  for (const auto& d : loaded.diagnostics) std::cerr << "ingest: " << d << '\n';
  std::printf("read %zu reviews, skipped %zu\n", loaded.reviews.size(), loaded.skipped);

  PreprocessRules rules;
  rules.min_token_length = a.min_length;
  rules.min_frequency = a.min_frequency;
  rules.min_reviews_per_author = a.min_author_reviews;
  rules.scale = scale;
  rules.epsilon = a.epsilon;
  if (!a.stop_words.empty()) {
    std::ifstream in(a.stop_words);
    if (!in) throw CorpusError("cannot open stop-word list: " + a.stop_words);
    std::string w;
    while (in >> w) rules.stop_words.insert(w);
  }
  Corpus corpus = preprocess(loaded.reviews, rules);
  print_stats(corpus, "corpus");

  Corpus test;
  bool have_test = false;
  if (a.split != 0.0) {
    auto parts = split_by_time(corpus, a.split);
    corpus = std::move(parts.train);
    test = std::move(parts.test);
    have_test = true;
    std::size_t unseen = 0, authors = 0;
    for (auto n : parts.unseen_tokens) unseen += n;
    for (bool b : parts.unseen_author) authors += b;
    print_stats(corpus, "train");
    print_stats(test, "test");
    std::printf("test tokens unseen in train: %zu, test reviews by unseen authors: %zu\n", unseen, authors);
  }
  if (a.balance) {
    auto bal = balance(corpus, {a.positive_threshold});
    if (bal.warning) std::cerr << "balance: " << *bal.warning << '\n';
    std::printf("balance: %zu positive, %zu negative/neutral, factor %zu\n", bal.positives, bal.negatives,
                bal.factor);
    corpus = std::move(bal.corpus);
    print_stats(corpus, "balanced");
  }
  corpus.save(a.output);
  if (have_test) test.save(a.test_output);
  return 0;
}

// ---- train / monitor ---------------------------------------------------------------------

struct TrainArgs {
  RunConfig cfg;
  std::string mode = "batch";
  std::string dump_config;
  std::string config;
};

void add_run_options(CLI::App* sub, TrainArgs& a) {
  auto& c = a.cfg;
  sub->add_option("--config", a.config, "JSON file supplying defaults for these flags");
  sub->add_option("--dump-config", a.dump_config, "write the effective configuration as JSON");
  sub->add_option("--corpus", c.corpus, "training corpus file");
  sub->add_option("--checkpoint", c.checkpoint, "checkpoint to write");
  sub->add_option("--log", c.log, "per-iteration CSV log");
  sub->add_option("--trend", c.trend, "trend CSV (online mode)");
  sub->add_option("--seed", c.seed);
  sub->add_option("--threads", c.threads);
  sub->add_option("--alpha", c.hp.alpha);
  sub->add_option("--beta", c.hp.beta);
  sub->add_option("--theta", c.hp.theta);
  sub->add_option("--lambda", c.hp.lambda)->expected(1, 255);
  sub->add_option("--eta", c.hp.eta)->expected(1, 255);
  sub->add_option("--K", c.hp.K, "corpus-level truncation");
  sub->add_option("--T", c.hp.T, "document-level truncation");
  sub->add_option("--mc-samples", c.hp.mc_samples);
  sub->add_option("--epsilon", c.hp.epsilon);
  sub->add_option("--sentiment-levels", c.hp.levels.sentiment)->expected(1, 255);
  sub->add_option("--preference-levels", c.hp.levels.preference)->expected(1, 255);
  sub->add_option("--perturbation", c.hp.perturbation);
  sub->add_option("--max-iters", c.max_iters);
  sub->add_option("--max-seconds", c.max_seconds);
  sub->add_option("--tolerance", c.tolerance, "relative MAE change for the stop rule");
  sub->add_option("--window", c.window, "consecutive calm iterations before stopping");
  sub->add_option("--inner-sweeps", c.inner_sweeps);
  sub->add_option("--probe-size", c.probe_size, "documents used for the training MAE (0 = all)");
  sub->add_option("--predict-iters", c.predict_iters);
  sub->add_option("--predict-tolerance", c.predict_tolerance);
  sub->add_option("--predict-expectation", c.predict_expectation, "plugin or ratio");
  sub->add_option("--max-steps", c.max_steps, "stochastic steps (0 = max-iters passes)");
  sub->add_option("--schedule", c.schedule, "inverse_t, fixed_ratio or constant");
  sub->add_option("--schedule-value", c.schedule_value);
  sub->add_flag("--with-replacement", c.with_replacement);
  sub->add_option("--probe-every", c.probe_every, "stochastic steps between MAE probes");
  sub->add_option("--local-tolerance", c.local_tolerance);
  sub->add_option("--local-rounds", c.local_rounds);
  sub->add_option("--base", c.base, "online base corpus size");
  sub->add_option("--batch-size", c.batch_size);
  sub->add_option("--batch-cap", c.batch_cap);
  sub->add_option("--online-tolerance", c.online_tolerance);
  sub->add_option("--online-schedule", c.online_schedule);
  sub->add_option("--online-schedule-value", c.online_schedule_value);
}

int cmd_train(TrainArgs& a, bool monitor) {
  RunConfig& cfg = a.cfg;
  if (monitor) {
    cfg.mode = TrainMode::online;
    if (cfg.trend.empty()) throw UsageError("monitor requires --trend");
  }
  cfg.validate();
  if (cfg.corpus.empty()) throw UsageError("--corpus is required");
  if (cfg.checkpoint.empty()) throw UsageError("--checkpoint is required");
  if (!a.dump_config.empty()) cfg.save(a.dump_config);

  const Corpus corpus = Corpus::load(cfg.corpus);
  if (corpus.empty()) throw CorpusError("training corpus is empty");
  std::unique_ptr<std::ofstream> log;
  if (!cfg.log.empty()) {
    log = std::make_unique<std::ofstream>(open_out(cfg.log));
    csv::row(*log, {"iteration", "mae", "seconds", "elapsed"});
  }
  auto log_row = [&](const IterationRecord& r) {
    if (log) {
      csv::row(*log, {std::to_string(r.iteration), csv::number(r.mae), csv::number(r.seconds), csv::number(r.elapsed)});
      log->flush();
    }
  };

  Checkpoint ckpt;
  switch (cfg.mode) {
    case TrainMode::batch: {
      auto opts = cfg.train_options();
      opts.on_iteration = [&](const IterationRecord& r, const GlobalState&) {
        log_row(r);
        std::fprintf(stderr, "iteration %zu mae %.4f (%.2fs)\n", r.iteration, r.mae, r.seconds);
        return true;
      };
      auto res = train_batch(corpus, cfg.hp, opts);
      ckpt = make_checkpoint(res.globals, cfg.hp, corpus, cfg.seed, res.iterations, "batch");
      std::printf("batch training: %zu iterations", res.iterations);
      if (!res.history.empty()) std::printf(", training MAE %.4f", res.history.back().mae);
      std::printf("\n");
      break;
    }
    case TrainMode::stochastic: {
      auto opts = cfg.stochastic_options(corpus.num_docs());
      opts.on_probe = [&](const IterationRecord& r, const GlobalState&) {
        log_row(r);
        std::fprintf(stderr, "step %zu mae %.4f (%.2fs)\n", r.iteration, r.mae, r.seconds);
        return true;
      };
      auto res = train_stochastic(corpus, cfg.hp, opts);
      ckpt = make_checkpoint(res.globals, cfg.hp, corpus, cfg.seed, res.steps, "stochastic");
      std::printf("stochastic training: %zu steps in %.2fs\n", res.steps, res.train_seconds);
      break;
    }
    case TrainMode::online: {
      auto stream = split_stream(corpus, std::min(cfg.base, corpus.num_docs()), cfg.batch_size);
      auto opts = cfg.online_options();
      opts.base.on_iteration = [&](const IterationRecord& r, const GlobalState&) {
        log_row(r);
        return true;
      };
      auto res = train_online(stream.base, stream.batches, cfg.online_config(), cfg.hp, opts);
      for (const auto& d : res.diagnostics) std::cerr << "online: " << d << '\n';
      if (!cfg.trend.empty()) {
        auto out = open_out(cfg.trend);
        write_trend_csv(res.trend, out);
      }
      ckpt = make_checkpoint(res.globals, cfg.hp, corpus, cfg.seed, res.rounds.size(), "online");
      std::printf("online training: base %zu reviews, %zu batches, %zu trend snapshots\n",
                  stream.base.num_docs(), res.rounds.size(), res.trend.num_snapshots());
      break;
    }
  }
  ckpt.save(cfg.checkpoint);
  return 0;
}

// ---- predict ---------------------------------------------------------------------------

struct PredictArgs {
  std::string checkpoint, corpus, output, lexicon;
  std::uint64_t seed = 0;
  std::size_t threads = 1, iters = 30;
  double tolerance = 1e-4;
  std::string expectation = "plugin";
};

int cmd_predict(const PredictArgs& a, bool seed_given) {
  const auto ckpt = Checkpoint::load(a.checkpoint);
  const auto corpus = Corpus::load(a.corpus);
  if (corpus.empty()) throw CorpusError("test corpus is empty: " + a.corpus);
  ckpt.check_compatible(corpus);
  PredictOptions popts{a.iters, a.tolerance, seed_given ? a.seed : ckpt.seed, a.threads,
                       parse_prediction_expectation(a.expectation)};
  std::optional<Lexicon> lexicon;
  if (!a.lexicon.empty()) lexicon = load_lexicon(a.lexicon, corpus.vocab);
  const auto report = predict_corpus(ckpt.globals, corpus, ckpt.hp, popts, lexicon ? &*lexicon : nullptr);
  if (!a.output.empty()) {
    auto out = open_out(a.output);
    write_prediction_csv(report, out);
  }
  std::printf("MAE %.4f over %zu reviews\n", report.mae, report.rows.size());
  if (lexicon) {
    std::printf("lexicon override coverage %.4f (%zu of %zu tokens)\n", report.override_coverage(),
                report.overridden_tokens, report.tokens);
  }
  return 0;
}

// ---- export-sentiments -----------------------------------------------------------------

struct ExportArgs {
  std::string checkpoint, corpus, words, topics, histogram;
  std::size_t top = 10, min_occurrences = 20, bins = 20;
};

int cmd_export(const ExportArgs& a) {
  const auto ckpt = Checkpoint::load(a.checkpoint);
  Registry vocab;
  for (const auto& w : ckpt.vocab) vocab.intern(w);
  std::vector<std::size_t> counts(ckpt.globals.V, 0);
  if (!a.corpus.empty()) {
    const auto corpus = Corpus::load(a.corpus);
    ckpt.check_compatible(corpus);
    auto c = word_counts(corpus);
    for (std::size_t v = 0; v < counts.size(); ++v) counts[v] = c[v];
  } else if (!a.histogram.empty()) {
    throw UsageError("--histogram needs --corpus for word counts");
  }
  const auto& levels = ckpt.hp.levels;
  if (!a.words.empty()) {
    auto out = open_out(a.words);
    write_word_sentiments_csv(ckpt.globals, levels, vocab, counts, out);
  }
  if (!a.topics.empty()) {
    auto out = open_out(a.topics);
    write_topic_summary_csv(ckpt.globals, levels, vocab, a.top, out);
  }
  if (!a.histogram.empty()) {
    const auto h = export_sentiment_histogram(ckpt.globals, levels, counts, a.min_occurrences, a.bins);
    auto out = open_out(a.histogram);
    write_histogram_csv(h, out);
    std::printf("%zu words with more than %zu occurrences: mean sentiment %.4f, sd %.4f\n", h.words,
                a.min_occurrences, h.mean, h.stddev);
  }
  if (a.words.empty() && a.topics.empty() && a.histogram.empty()) {
    write_topic_summary_csv(ckpt.globals, levels, vocab, a.top, std::cout);
  }
  return 0;
}

// ---- synth -----------------------------------------------------------------------------

struct SynthArgs {
  GenPriors priors;
  GenSizes sizes;
  std::uint64_t seed = 0;
  std::string output, truth;
};

int cmd_synth(const SynthArgs& a) {
  auto g = generate(a.priors, a.sizes, a.seed);
  g.corpus.save(a.output);
  if (!a.truth.empty()) save_truth(g.truth, a.truth);
  print_stats(g.corpus, "synth");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topic, word-sentiment and user-preference models for review corpora"};
  app.require_subcommand(1);

  TrainArgs train_args;
  try {
    if (auto path = config_path(argc, argv)) train_args.cfg = RunConfig::load(*path);
  } catch (const std::exception& e) {
    std::cerr << "tspra: error: " << e.what() << '\n';
    return kExitUsage;
  }
  train_args.mode = to_string(train_args.cfg.mode);

  IngestArgs ingest;
  auto* s_ingest = app.add_subcommand("ingest", "preprocess raw JSON-lines reviews into a corpus file");
  s_ingest->add_option("--input", ingest.input, "JSON-lines review file")->required();
  s_ingest->add_option("--output", ingest.output, "corpus file to write (training side with --split)")->required();
  s_ingest->add_option("--test-output", ingest.test_output, "test corpus file (with --split)");
  s_ingest->add_option("--split", ingest.split, "train fraction of the time-ordered reviews");
  s_ingest->add_option("--scale-low", ingest.scale_low);
  s_ingest->add_option("--scale-high", ingest.scale_high);
  s_ingest->add_option("--epsilon", ingest.epsilon);
  s_ingest->add_option("--min-length", ingest.min_length);
  s_ingest->add_option("--min-frequency", ingest.min_frequency);
  s_ingest->add_option("--min-author-reviews", ingest.min_author_reviews);
  s_ingest->add_option("--stop-words", ingest.stop_words, "file of whitespace-separated stop words");
  s_ingest->add_flag("--balance", ingest.balance, "replicate negative/neutral reviews");
  s_ingest->add_option("--positive-threshold", ingest.positive_threshold);

  auto* s_train = app.add_subcommand("train", "train a model and write a checkpoint");
  add_run_options(s_train, train_args);
  s_train->add_option("--mode", train_args.mode, "batch, stochastic or online");
  auto* s_monitor = app.add_subcommand("monitor", "online training with trend export");
  add_run_options(s_monitor, train_args);

  PredictArgs pred;
  auto* s_predict = app.add_subcommand("predict", "predict ratings of a corpus with a checkpoint");
  s_predict->add_option("--checkpoint", pred.checkpoint)->required();
  s_predict->add_option("--corpus", pred.corpus, "test corpus")->required();
  s_predict->add_option("--output", pred.output, "per-review CSV report");
  s_predict->add_option("--lexicon", pred.lexicon, "word,value sentiment lexicon");
  auto* seed_opt = s_predict->add_option("--seed", pred.seed, "defaults to the training seed");
  s_predict->add_option("--threads", pred.threads);
  s_predict->add_option("--predict-iters", pred.iters);
  s_predict->add_option("--predict-tolerance", pred.tolerance);
  s_predict->add_option("--predict-expectation", pred.expectation, "plugin or ratio");

  ExportArgs exp;
  auto* s_export = app.add_subcommand("export-sentiments", "word and topic sentiment tables");
  s_export->add_option("--checkpoint", exp.checkpoint)->required();
  s_export->add_option("--corpus", exp.corpus, "corpus for word counts");
  s_export->add_option("--words", exp.words, "per-word sentiment CSV");
  s_export->add_option("--topics", exp.topics, "per-topic summary CSV");
  s_export->add_option("--histogram", exp.histogram, "word sentiment histogram CSV");
  s_export->add_option("--top-words", exp.top);
  s_export->add_option("--min-occurrences", exp.min_occurrences);
  s_export->add_option("--bins", exp.bins);

  SynthArgs syn;
  auto* s_synth = app.add_subcommand("synth", "generate a synthetic corpus with known ground truth");
  s_synth->add_option("--output", syn.output, "corpus file")->required();
  s_synth->add_option("--truth", syn.truth, "ground-truth JSON sidecar");
  s_synth->add_option("--seed", syn.seed);
  s_synth->add_option("--docs", syn.sizes.D);
  s_synth->add_option("--length", syn.sizes.mean_length, "mean review length");
  s_synth->add_option("--vocab", syn.sizes.V);
  s_synth->add_option("--users", syn.sizes.C);
  s_synth->add_option("--topics", syn.sizes.K, "planted topics");
  s_synth->add_option("--tables", syn.priors.T);
  s_synth->add_option("--gen-alpha", syn.priors.alpha);
  s_synth->add_option("--gen-beta", syn.priors.beta);
  s_synth->add_option("--gen-theta", syn.priors.theta);
  s_synth->add_option("--gen-lambda", syn.priors.lambda)->expected(1, 255);
  s_synth->add_option("--gen-eta", syn.priors.eta)->expected(1, 255);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (s_ingest->parsed()) return cmd_ingest(ingest);
    if (s_train->parsed()) {
      train_args.cfg.mode = parse_mode(train_args.mode);
      return cmd_train(train_args, false);
    }
    if (s_monitor->parsed()) return cmd_train(train_args, true);
    if (s_predict->parsed()) return cmd_predict(pred, seed_opt->count() > 0);
    if (s_export->parsed()) return cmd_export(exp);
    if (s_synth->parsed()) return cmd_synth(syn);
  } catch (const ConfigError& e) {
    std::cerr << "tspra: invalid configuration: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "tspra: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "tspra: error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
