#include "kgcurate/tokenizer.hpp"

#include <algorithm>
#include <unordered_map>
#include <sstream>

#include "kgcurate/common.hpp"
#include "kgcurate/ontology.hpp"

namespace kgc {

namespace {

bool is_token_char(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); }

}  // namespace

Tokenizer::Tokenizer(std::string pattern)
    : pattern_(std::move(pattern)), fast_path_(pattern_ == kDefaultPattern) {
  if (!fast_path_) {
    try {
      regex_ = std::make_shared<const std::regex>(pattern_, std::regex::ECMAScript | std::regex::optimize);
    } catch (const std::regex_error& e) {
      throw Error(ErrorKind::Config, "invalid tokenizer pattern '" + pattern_ + "': " + e.what());
    }
  }
}

TokenList Tokenizer::tokenize(std::string_view text) const {
  const std::string lower = to_lower_ascii(text);
  TokenList out;
  if (fast_path_) {
    std::size_t i = 0;
    while (i < lower.size()) {
      while (i < lower.size() && !is_token_char(lower[i])) ++i;
      const std::size_t start = i;
      while (i < lower.size() && is_token_char(lower[i])) ++i;
      if (i > start) out.emplace_back(lower.substr(start, i - start));
    }
    return out;
  }
  for (auto it = std::sregex_iterator(lower.begin(), lower.end(), *regex_); it != std::sregex_iterator(); ++it) {
    if (it->length() > 0) out.push_back(it->str());
  }
  return out;
}

TokenList tokenize(std::string_view text) {
  static const Tokenizer kDefault;
  return kDefault.tokenize(text);
}

std::string_view to_string(TokenPopulation p) {
  switch (p) {
    case TokenPopulation::Heads: return "heads";
    case TokenPopulation::Tails: return "tails";
    case TokenPopulation::Both: return "both";
  }
  return "both";
}

std::vector<std::pair<std::string, std::size_t>> TokenFrequency::ranked() const {
  std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

std::string TokenFrequency::to_tsv() const {
  std::ostringstream out;
  out << "token\tcount\n";
  for (const auto& [token, count] : ranked()) out << token << '\t' << count << '\n';
  return out.str();
}

TokenFrequency token_frequency_report(const KnowledgeGraph& kg, std::span<const Triple> positives,
                                      TokenPopulation population, const Tokenizer& tokenizer) {
  TokenFrequency freq;
  freq.population = population;
  std::unordered_map<std::string, TokenList> cache;
  const auto add = [&](const std::string& id) {
    auto it = cache.find(id);
    if (it == cache.end()) it = cache.emplace(id, tokenizer.tokenize(kg.entity(id).name)).first;
    for (const auto& tok : it->second) ++freq.counts[tok];
  };
  for (const auto& t : positives) {
    if (population != TokenPopulation::Tails) add(t.subject);
    if (population != TokenPopulation::Heads) add(t.object);
  }
  return freq;
}

}  // namespace kgc
