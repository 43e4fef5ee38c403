#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kgc {

struct TokenFrequency;

enum class EmbeddingKind { Table, Random };

std::string_view to_string(EmbeddingKind kind);

/// Deterministic vector for `token`: components uniform in [-1, 1) drawn from
/// a generator seeded with hash(seed, token).
std::vector<float> seeded_vector(std::uint64_t seed, std::string_view token, std::size_t dimension);

/// Token -> vector map. Table models return stored vectors and fall back to a
/// seeded random vector for out-of-vocabulary tokens; random models always
/// return the seeded vector. Lookups are thread-safe and referentially
/// transparent.
class EmbeddingModel {
 public:
  using Table = std::unordered_map<std::string, std::vector<float>>;

  static EmbeddingModel random(std::size_t dimension = 300, std::uint64_t seed = 0);
  static EmbeddingModel from_table(std::size_t dimension, Table table, std::uint64_t oov_seed = 0);

  ~EmbeddingModel();
  EmbeddingModel(EmbeddingModel&&) noexcept;
  EmbeddingModel& operator=(EmbeddingModel&&) noexcept;

  EmbeddingKind kind() const { return kind_; }
  std::size_t dimension() const { return dimension_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t vocabulary_size() const { return table_.size(); }
  bool in_vocabulary(std::string_view token) const;
  const Table& table() const { return table_; }

  std::span<const float> lookup(std::string_view token) const;

  /// Text form, one `token v1 ... vd` line per entry, tokens sorted.
  void save_text(std::ostream& out) const;
  /// JSON sidecar with kind, dimension, seed and vocabulary size.
  std::string metadata_json() const;

 private:
  EmbeddingModel(EmbeddingKind kind, std::size_t dimension, std::uint64_t seed, Table table);

  struct OovCache;

  EmbeddingKind kind_;
  std::size_t dimension_;
  std::uint64_t seed_;
  Table table_;
  std::unique_ptr<OovCache> cache_;
};

struct EmbeddingLoadResult {
  EmbeddingModel model;
  std::vector<std::string> warnings;
};

/// Reads whitespace-separated `token v1 ... vd` lines. A leading word2vec
/// style `count dim` header line is skipped. Duplicate tokens: last wins.
EmbeddingLoadResult load_text_vectors(std::istream& in, std::optional<std::size_t> expected_dim = {},
                                      std::uint64_t oov_seed = 0);
EmbeddingLoadResult load_text_vectors_file(const std::string& path,
                                           std::optional<std::size_t> expected_dim = {},
                                           std::uint64_t oov_seed = 0);

struct OovStats {
  std::size_t distinct_tokens = 0;
  std::size_t oov_tokens = 0;
  double fraction = 0.0;
};

/// Share of distinct tokens in `vocabulary` missing from the model's table.
/// Random models cover every token.
OovStats oov_stats(const EmbeddingModel& model, const TokenFrequency& vocabulary);

}  // namespace kgc
