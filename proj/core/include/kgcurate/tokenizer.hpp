#pragma once

#include <map>
#include <memory>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kgc {

class KnowledgeGraph;
struct Triple;

using TokenList = std::vector<std::string>;

/// Lowercases, then returns every match of `pattern` in order. The default
/// pattern keeps maximal ASCII alphanumeric runs, so stereo descriptors such
/// as `6r` or `2s` survive as single tokens and punctuation separates.
class Tokenizer {
 public:
  static constexpr std::string_view kDefaultPattern = "[a-z0-9]+";

  explicit Tokenizer(std::string pattern = std::string(kDefaultPattern));

  TokenList tokenize(std::string_view text) const;
  const std::string& pattern() const { return pattern_; }

 private:
  std::string pattern_;
  bool fast_path_;
  std::shared_ptr<const std::regex> regex_;
};

/// Convenience: tokenize with the default pattern.
TokenList tokenize(std::string_view text);

enum class TokenPopulation { Heads, Tails, Both };

std::string_view to_string(TokenPopulation p);

struct TokenFrequency {
  TokenPopulation population = TokenPopulation::Both;
  std::map<std::string, std::size_t> counts;

  /// (token, count) sorted by count descending, ties lexicographic.
  std::vector<std::pair<std::string, std::size_t>> ranked() const;
  std::string to_tsv() const;
};

/// Token occurrences over the subject and/or object names of `positives`
/// (ids resolved through `kg`).
TokenFrequency token_frequency_report(const KnowledgeGraph& kg, std::span<const Triple> positives,
                                      TokenPopulation population,
                                      const Tokenizer& tokenizer = Tokenizer());

}  // namespace kgc
