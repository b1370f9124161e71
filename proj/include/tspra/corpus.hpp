#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace tspra {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RatingScale {
  int low = 1;
  int high = 5;

  bool contains(int r) const { return r >= low && r <= high; }
};

struct RawReview {
  std::string user;
  std::string item;
  int rating = 0;
  std::int64_t time = 0;
  // Exactly one of these is populated.
  std::optional<std::string> text;
  std::optional<std::vector<std::string>> tokens;
};

struct LoadResult {
  std::vector<RawReview> reviews;
  std::size_t skipped = 0;
  std::vector<std::string> diagnostics;
};

/// Parses one JSON record per line. Malformed lines and ratings outside `scale`
/// are skipped and counted. Throws CorpusError if the file cannot be opened.
LoadResult load_reviews(const std::filesystem::path& path, RatingScale scale);
LoadResult parse_reviews(std::istream& in, RatingScale scale);

/// String <-> dense index registry, first-insertion order.
class Registry {
 public:
  std::size_t intern(const std::string& name);
  std::optional<std::size_t> find(const std::string& name) const;
  const std::string& name(std::size_t index) const { return names_.at(index); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Review {
  std::size_t doc_id = 0;
  std::size_t author = 0;
  std::vector<std::uint32_t> tokens;
  int raw_rating = 0;
  double norm_rating = 0.5;
  std::int64_t time = 0;

  std::size_t size() const { return tokens.size(); }
};

/// log r and log(1 - r) for a normalized rating, with both arguments floored at eps.
/// Needed because 1 - eps rounds to 1 in double for eps below ~1e-16.
struct RatingLogs {
  double log_r;
  double log_one_minus_r;
};

class Corpus {
 public:
  std::vector<Review> reviews;
  Registry vocab;
  Registry users;
  RatingScale scale;
  double epsilon = 1e-300;

  std::size_t num_docs() const { return reviews.size(); }
  std::size_t num_tokens() const;
  std::size_t vocab_size() const { return vocab.size(); }
  std::size_t num_users() const { return users.size(); }
  bool empty() const { return reviews.empty(); }

  RatingLogs rating_logs(const Review& r) const;

  /// Copy with the same registries and a subset of reviews (doc ids renumbered).
  Corpus subset(std::size_t begin, std::size_t end) const;

  /// Writes the text corpus dump (header, vocab, users, one line per review).
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static Corpus load(std::istream& in);
  static Corpus load(const std::filesystem::path& path);
};

struct PreprocessRules {
  std::size_t min_token_length = 3;
  std::size_t min_frequency = 10;
  std::size_t min_reviews_per_author = 2;
  std::unordered_set<std::string> stop_words;
  RatingScale scale;
  double epsilon = 1e-300;
};

/// Lowercases and splits on runs of non-alphabetic characters.
std::vector<std::string> tokenize(const std::string& text);

/// Throws CorpusError when every review is filtered out.
Corpus preprocess(const std::vector<RawReview>& raws, const PreprocessRules& rules);

double normalize_rating(int raw, RatingScale scale, double epsilon);

struct BalanceOptions {
  int positive_threshold = 4;  // raw >= threshold counts as positive
};

struct BalanceResult {
  Corpus corpus;
  std::size_t positives = 0;
  std::size_t negatives = 0;  // negative or neutral
  std::size_t factor = 1;
  std::optional<std::string> warning;
};

/// Replicates every negative/neutral review round(#pos / #neg) times.
BalanceResult balance(const Corpus& corpus, BalanceOptions options = {});

struct SplitResult {
  Corpus train;
  Corpus test;
  /// Per test review: number of tokens never seen in train.
  std::vector<std::size_t> unseen_tokens;
  /// Per test review: author never seen in train.
  std::vector<bool> unseen_author;
};

/// First floor(frac * D) reviews (time order) to train, the rest to test. Both halves
/// keep the full registries.
SplitResult split_by_time(const Corpus& corpus, double frac);

}  // namespace tspra
