#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "tspra/corpus.hpp"
#include "tspra/state.hpp"

namespace tspra {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Trained globals plus everything needed to reuse them: hyperparameters, the registries
/// the indices refer to, and where training stopped.
struct Checkpoint {
  Hyperparams hp;
  GlobalState globals;
  std::vector<std::string> vocab;
  std::vector<std::string> users;
  std::uint64_t seed = 0;
  std::size_t iteration = 0;
  std::string mode = "batch";

  /// Text format; numbers are written with 17 significant digits and read back exactly.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(std::istream& in);
  static Checkpoint load(const std::filesystem::path& path);

  /// Throws CheckpointError unless the corpus registries extend the checkpoint's
  /// (same names at the same indices, possibly followed by new entries).
  void check_compatible(const Corpus& corpus) const;

  bool operator==(const Checkpoint& o) const;
};

Checkpoint make_checkpoint(const GlobalState& g, const Hyperparams& hp, const Corpus& corpus,
                           std::uint64_t seed, std::size_t iteration, std::string mode);

}  // namespace tspra
