#include "kgcurate/embedding.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <shared_mutex>

#include "json.hpp"
#include "kgcurate/common.hpp"
#include "kgcurate/tokenizer.hpp"

namespace kgc {

struct EmbeddingModel::OovCache {
  mutable std::shared_mutex mutex;
  std::unordered_map<std::string, std::vector<float>> vectors;
};

std::string_view to_string(EmbeddingKind kind) {
  return kind == EmbeddingKind::Table ? "table" : "random";
}

std::vector<float> seeded_vector(std::uint64_t seed, std::string_view token, std::size_t dimension) {
  Rng rng(mix_seed(seed, fnv1a64(token)));
  std::vector<float> v(dimension);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

EmbeddingModel::~EmbeddingModel() = default;
EmbeddingModel::EmbeddingModel(EmbeddingModel&&) noexcept = default;
EmbeddingModel& EmbeddingModel::operator=(EmbeddingModel&&) noexcept = default;

EmbeddingModel::EmbeddingModel(EmbeddingKind kind, std::size_t dimension, std::uint64_t seed, Table table)
    : kind_(kind), dimension_(dimension), seed_(seed), table_(std::move(table)),
      cache_(std::make_unique<OovCache>()) {
  if (dimension_ == 0) throw Error(ErrorKind::InvalidArgument, "embedding dimension must be >= 1");
}

EmbeddingModel EmbeddingModel::random(std::size_t dimension, std::uint64_t seed) {
  return EmbeddingModel(EmbeddingKind::Random, dimension, seed, {});
}

EmbeddingModel EmbeddingModel::from_table(std::size_t dimension, Table table, std::uint64_t oov_seed) {
  for (const auto& [token, vec] : table) {
    if (vec.size() != dimension)
      throw Error(ErrorKind::InvalidArgument, "vector for '" + token + "' has wrong dimension");
  }
  return EmbeddingModel(EmbeddingKind::Table, dimension, oov_seed, std::move(table));
}

bool EmbeddingModel::in_vocabulary(std::string_view token) const {
  return kind_ == EmbeddingKind::Random || table_.contains(std::string(token));
}

std::span<const float> EmbeddingModel::lookup(std::string_view token) const {
  const std::string key(token);
  if (kind_ == EmbeddingKind::Table) {
    if (auto it = table_.find(key); it != table_.end()) return it->second;
  }
  {
    std::shared_lock lock(cache_->mutex);
    if (auto it = cache_->vectors.find(key); it != cache_->vectors.end()) return it->second;
  }
  auto vec = seeded_vector(seed_, token, dimension_);
  std::unique_lock lock(cache_->mutex);
  // A racing writer computed the same vector; either copy is fine.
  auto [it, inserted] = cache_->vectors.try_emplace(key, std::move(vec));
  return it->second;
}

void EmbeddingModel::save_text(std::ostream& out) const {
  std::vector<const std::string*> tokens;
  tokens.reserve(table_.size());
  for (const auto& [token, vec] : table_) tokens.push_back(&token);
  std::sort(tokens.begin(), tokens.end(), [](auto* a, auto* b) { return *a < *b; });
  char buf[64];
  for (const auto* token : tokens) {
    out << *token;
    for (float x : table_.at(*token)) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    out << '\n';
  }
}

std::string EmbeddingModel::metadata_json() const {
  nlohmann::json j;
  j["kind"] = to_string(kind_);
  j["dimension"] = dimension_;
  j["seed"] = seed_;
  j["vocabulary_size"] = table_.size();
  return j.dump(2);
}

EmbeddingLoadResult load_text_vectors(std::istream& in, std::optional<std::size_t> expected_dim,
                                      std::uint64_t oov_seed) {
  EmbeddingModel::Table table;
  std::vector<std::string> warnings;
  std::optional<std::size_t> dim = expected_dim;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> fields;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty()) continue;
    fields.clear();
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
      const auto start = i;
      while (i < text.size() && text[i] != ' ' && text[i] != '\t') ++i;
      if (i > start) fields.push_back(text.substr(start, i - start));
    }
    if (line_no == 1 && fields.size() == 2 && table.empty()) {
      std::size_t a = 0, b = 0;
      const bool is_header =
          std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), a).ec == std::errc{} &&
          std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), b).ec == std::errc{};
      if (is_header) {
        if (!dim) dim = b;
        continue;
      }
    }
    if (fields.size() < 2) throw ParseError(line_no, "expected a token followed by vector components");
    const std::size_t n = fields.size() - 1;
    if (!dim) dim = n;
    if (n != *dim) {
      throw ParseError(line_no, "dimension mismatch: expected " + std::to_string(*dim) + ", found " +
                                    std::to_string(n));
    }
    std::vector<float> vec(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto f = fields[k + 1];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), vec[k]);
      if (ec != std::errc{} || ptr != f.data() + f.size())
        throw ParseError(line_no, "bad number '" + std::string(f) + "'");
    }
    auto [it, inserted] = table.insert_or_assign(std::string(fields[0]), std::move(vec));
    if (!inserted) warnings.push_back("line " + std::to_string(line_no) + ": duplicate token '" + it->first + "', last wins");
  }
  if (table.empty()) throw Error(ErrorKind::Parse, "embedding file contains no vectors");
  return {EmbeddingModel::from_table(*dim, std::move(table), oov_seed), std::move(warnings)};
}

EmbeddingLoadResult load_text_vectors_file(const std::string& path, std::optional<std::size_t> expected_dim,
                                           std::uint64_t oov_seed) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open embedding file " + path);
  return load_text_vectors(in, expected_dim, oov_seed);
}

OovStats oov_stats(const EmbeddingModel& model, const TokenFrequency& vocabulary) {
  OovStats stats;
  stats.distinct_tokens = vocabulary.counts.size();
  if (model.kind() == EmbeddingKind::Table) {
    for (const auto& [token, count] : vocabulary.counts) {
      if (!model.in_vocabulary(token)) ++stats.oov_tokens;
    }
  }
  stats.fraction = stats.distinct_tokens == 0
                       ? 0.0
                       : static_cast<double>(stats.oov_tokens) / static_cast<double>(stats.distinct_tokens);
  return stats;
}

}  // namespace kgc
