#include "tspra/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace tspra {

namespace {

constexpr const char* kCorpusMagic = "tspra-corpus";
constexpr int kCorpusVersion = 1;

std::optional<RawReview> parse_record(const std::string& line, RatingScale scale,
                                      std::string& why) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    why = std::string("malformed record: ") + e.what();
    return std::nullopt;
  }
  if (!j.is_object()) {
    why = "record is not an object";
    return std::nullopt;
  }
  for (const char* field : {"user", "item", "rating", "time"}) {
    if (!j.contains(field)) {
      why = std::string("missing field '") + field + "'";
      return std::nullopt;
    }
  }
  const bool has_text = j.contains("text");
  const bool has_tokens = j.contains("tokens");
  if (has_text == has_tokens) {
    why = "exactly one of 'text' or 'tokens' is required";
    return std::nullopt;
  }
  RawReview r;
  try {
    auto as_id = [](const nlohmann::json& v) {
      return v.is_string() ? v.get<std::string>() : v.dump();
    };
    r.user = as_id(j.at("user"));
    r.item = as_id(j.at("item"));
    const auto& rating = j.at("rating");
    if (!rating.is_number()) {
      why = "rating is not a number";
      return std::nullopt;
    }
    const double rv = rating.get<double>();
    if (rv != std::floor(rv)) {
      why = "rating is not an integer";
      return std::nullopt;
    }
    r.rating = static_cast<int>(rv);
    r.time = j.at("time").get<std::int64_t>();
    if (has_text) {
      r.text = j.at("text").get<std::string>();
    } else {
      r.tokens = j.at("tokens").get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    why = std::string("bad field type: ") + e.what();
    return std::nullopt;
  }
  if (!scale.contains(r.rating)) {
    why = "rating " + std::to_string(r.rating) + " outside scale [" + std::to_string(scale.low) +
          ", " + std::to_string(scale.high) + "]";
    return std::nullopt;
  }
  return r;
}

std::vector<std::string> raw_tokens(const RawReview& r) {
  if (r.tokens) return *r.tokens;
  return tokenize(r.text.value_or(""));
}

}  // namespace

LoadResult parse_reviews(std::istream& in, RatingScale scale) {
  LoadResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    std::string why;
    if (auto r = parse_record(line, scale, why)) {
      result.reviews.push_back(std::move(*r));
    } else {
      ++result.skipped;
      result.diagnostics.push_back("line " + std::to_string(lineno) + ": " + why);
    }
  }
  return result;
}

LoadResult load_reviews(const std::filesystem::path& path, RatingScale scale) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open review file: " + path.string());
  return parse_reviews(in, scale);
}

std::size_t Registry::intern(const std::string& name) {
  auto [it, inserted] = index_.emplace(name, names_.size());
  if (inserted) names_.push_back(name);
  return it->second;
}

std::optional<std::size_t> Registry::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Corpus::num_tokens() const {
  std::size_t n = 0;
  for (const auto& r : reviews) n += r.tokens.size();
  return n;
}

RatingLogs Corpus::rating_logs(const Review& r) const {
  const double span = static_cast<double>(scale.high - scale.low);
  const double x = span > 0 ? static_cast<double>(r.raw_rating - scale.low) / span : 0.5;
  return {std::log(std::max(x, epsilon)), std::log(std::max(1.0 - x, epsilon))};
}

Corpus Corpus::subset(std::size_t begin, std::size_t end) const {
  Corpus out;
  out.vocab = vocab;
  out.users = users;
  out.scale = scale;
  out.epsilon = epsilon;
  end = std::min(end, reviews.size());
  for (std::size_t i = begin; i < end; ++i) {
    out.reviews.push_back(reviews[i]);
    out.reviews.back().doc_id = out.reviews.size() - 1;
  }
  return out;
}

void Corpus::save(std::ostream& out) const {
  out << kCorpusMagic << ' ' << kCorpusVersion << '\n';
  out << "D " << num_docs() << " N " << num_tokens() << " V " << vocab_size() << " C "
      << num_users() << " scale " << scale.low << ' ' << scale.high << " epsilon "
      << std::setprecision(17) << epsilon << '\n';
  out << "vocab\n";
  for (const auto& w : vocab.names()) out << w << '\n';
  out << "users\n";
  for (const auto& u : users.names()) out << u << '\n';
  out << "reviews\n";
  for (const auto& r : reviews) {
    out << r.author << ' ' << r.raw_rating << ' ' << r.time;
    for (auto w : r.tokens) out << ' ' << w;
    out << '\n';
  }
}

void Corpus::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write corpus file: " + path.string());
  save(out);
  if (!out) throw CorpusError("write failed: " + path.string());
}

Corpus Corpus::load(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kCorpusMagic) {
    throw CorpusError("not a corpus file");
  }
  if (version != kCorpusVersion) {
    throw CorpusError("unsupported corpus version " + std::to_string(version));
  }
  auto expect = [&](const char* key) {
    std::string k;
    if (!(in >> k) || k != key) throw CorpusError(std::string("corpus header: expected ") + key);
  };
  std::size_t D = 0, N = 0, V = 0, C = 0;
  Corpus c;
  expect("D");
  in >> D;
  expect("N");
  in >> N;
  expect("V");
  in >> V;
  expect("C");
  in >> C;
  expect("scale");
  in >> c.scale.low >> c.scale.high;
  expect("epsilon");
  in >> c.epsilon;
  if (!in) throw CorpusError("corpus header is truncated");
  std::string line;
  std::getline(in, line);
  auto section = [&](const char* name) {
    if (!std::getline(in, line) || line != name) {
      throw CorpusError(std::string("corpus: expected section '") + name + "'");
    }
  };
  section("vocab");
  for (std::size_t v = 0; v < V; ++v) {
    if (!std::getline(in, line)) throw CorpusError("corpus: truncated vocabulary");
    if (c.vocab.intern(line) != v) throw CorpusError("corpus: duplicate vocabulary entry " + line);
  }
  section("users");
  for (std::size_t u = 0; u < C; ++u) {
    if (!std::getline(in, line)) throw CorpusError("corpus: truncated user list");
    if (c.users.intern(line) != u) throw CorpusError("corpus: duplicate user entry " + line);
  }
  section("reviews");
  c.reviews.reserve(D);
  for (std::size_t d = 0; d < D; ++d) {
    if (!std::getline(in, line)) throw CorpusError("corpus: truncated review list");
    std::istringstream ls(line);
    Review r;
    r.doc_id = d;
    if (!(ls >> r.author >> r.raw_rating >> r.time)) {
      throw CorpusError("corpus: malformed review line " + std::to_string(d));
    }
    std::uint64_t w = 0;
    while (ls >> w) {
      if (w >= V) throw CorpusError("corpus: token index out of range");
      r.tokens.push_back(static_cast<std::uint32_t>(w));
    }
    if (r.author >= C) throw CorpusError("corpus: author index out of range");
    if (!c.scale.contains(r.raw_rating)) throw CorpusError("corpus: rating outside scale");
    r.norm_rating = normalize_rating(r.raw_rating, c.scale, c.epsilon);
    c.reviews.push_back(std::move(r));
  }
  if (c.num_tokens() != N) throw CorpusError("corpus: token count does not match header");
  return c;
}

Corpus Corpus::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file: " + path.string());
  return load(in);
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char ch : text) {
    if (std::isalpha(ch)) {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double normalize_rating(int raw, RatingScale scale, double epsilon) {
  const double span = static_cast<double>(scale.high - scale.low);
  const double x = span > 0 ? static_cast<double>(raw - scale.low) / span : 0.5;
  return std::clamp(x, epsilon, 1.0 - epsilon);
}

Corpus preprocess(const std::vector<RawReview>& raws, const PreprocessRules& rules) {
  struct Working {
    const RawReview* raw;
    std::vector<std::string> tokens;
  };
  std::vector<Working> docs;
  docs.reserve(raws.size());
  for (const auto& r : raws) {
    if (!rules.scale.contains(r.rating)) continue;
    Working w{&r, {}};
    for (auto& tok : raw_tokens(r)) {
      if (tok.size() < rules.min_token_length) continue;
      if (rules.stop_words.count(tok)) continue;
      w.tokens.push_back(std::move(tok));
    }
    docs.push_back(std::move(w));
  }
  std::stable_sort(docs.begin(), docs.end(),
                   [](const Working& a, const Working& b) { return a.raw->time < b.raw->time; });

  // Author and frequency filters interact: dropping reviews lowers counts, dropping
  // tokens can empty reviews. Iterate until nothing changes.
  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_map<std::string, std::size_t> per_author;
    for (const auto& d : docs) ++per_author[d.raw->user];
    const auto before = docs.size();
    std::erase_if(docs, [&](const Working& d) {
      return per_author[d.raw->user] < rules.min_reviews_per_author;
    });
    changed |= docs.size() != before;

    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& d : docs)
      for (const auto& t : d.tokens) ++freq[t];
    for (auto& d : docs) {
      const auto n = d.tokens.size();
      std::erase_if(d.tokens, [&](const std::string& t) { return freq[t] < rules.min_frequency; });
      changed |= d.tokens.size() != n;
    }
    const auto before_empty = docs.size();
    std::erase_if(docs, [](const Working& d) { return d.tokens.empty(); });
    changed |= docs.size() != before_empty;
  }
  if (docs.empty()) throw CorpusError("preprocessing removed every review");

  Corpus c;
  c.scale = rules.scale;
  c.epsilon = rules.epsilon;
  c.reviews.reserve(docs.size());
  for (const auto& d : docs) {
    Review r;
    r.doc_id = c.reviews.size();
    r.author = c.users.intern(d.raw->user);
    r.raw_rating = d.raw->rating;
    r.norm_rating = normalize_rating(r.raw_rating, c.scale, c.epsilon);
    r.time = d.raw->time;
    r.tokens.reserve(d.tokens.size());
    for (const auto& t : d.tokens) r.tokens.push_back(static_cast<std::uint32_t>(c.vocab.intern(t)));
    c.reviews.push_back(std::move(r));
  }
  return c;
}

BalanceResult balance(const Corpus& corpus, BalanceOptions options) {
  if (corpus.empty()) throw CorpusError("balance: empty corpus");
  BalanceResult res;
  for (const auto& r : corpus.reviews) {
    if (r.raw_rating >= options.positive_threshold) {
      ++res.positives;
    } else {
      ++res.negatives;
    }
  }
  if (res.negatives == 0) {
    res.corpus = corpus;
    res.warning = "no negative/neutral reviews; corpus left unbalanced";
    return res;
  }
  const double ratio = static_cast<double>(res.positives) / static_cast<double>(res.negatives);
  res.factor = static_cast<std::size_t>(std::max(1.0, std::round(ratio)));
  if (res.factor <= 1) {
    res.corpus = corpus;
    res.warning = "positive/negative ratio rounds to 1; corpus unchanged";
    return res;
  }
  Corpus out;
  out.vocab = corpus.vocab;
  out.users = corpus.users;
  out.scale = corpus.scale;
  out.epsilon = corpus.epsilon;
  for (const auto& r : corpus.reviews) {
    const std::size_t copies = r.raw_rating >= options.positive_threshold ? 1 : res.factor;
    for (std::size_t i = 0; i < copies; ++i) {
      out.reviews.push_back(r);
      out.reviews.back().doc_id = out.reviews.size() - 1;
    }
  }
  res.corpus = std::move(out);
  return res;
}

SplitResult split_by_time(const Corpus& corpus, double frac) {
  if (!(frac > 0.0 && frac < 1.0)) throw CorpusError("split fraction must lie in (0, 1)");
  const auto D = corpus.num_docs();
  const auto cut = static_cast<std::size_t>(std::floor(frac * static_cast<double>(D)));
  if (cut == 0 || cut >= D) throw CorpusError("split would leave one side empty");
  SplitResult s;
  s.train = corpus.subset(0, cut);
  s.test = corpus.subset(cut, D);
  std::vector<bool> seen_word(corpus.vocab_size(), false);
  std::vector<bool> seen_user(corpus.num_users(), false);
  for (const auto& r : s.train.reviews) {
    seen_user[r.author] = true;
    for (auto w : r.tokens) seen_word[w] = true;
  }
  for (const auto& r : s.test.reviews) {
    std::size_t unseen = 0;
    for (auto w : r.tokens) unseen += seen_word[w] ? 0 : 1;
    s.unseen_tokens.push_back(unseen);
    s.unseen_author.push_back(!seen_user[r.author]);
  }
  return s;
}

}  // namespace tspra
