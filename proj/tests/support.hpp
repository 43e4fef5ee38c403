#pragma once

// Independent oracles and fixtures shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "kgcurate/common.hpp"
#include "kgcurate/embedding.hpp"
#include "kgcurate/ontology.hpp"
#include "kgcurate/tokenizer.hpp"

namespace kgc::oracle {

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("kgcurate_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// ---- OBO line-level oracle ----

struct OracleTriple {
  std::string subject, relation, object;
  auto operator<=>(const OracleTriple&) const = default;
};

/// Distinct (id, relation id, target) over live [Term] stanzas whose target
/// is also a live term. Relation ids stay in OBO form (`is_a`, `has_role`).
inline std::set<OracleTriple> obo_triples(const std::string& text) {
  struct Stanza {
    std::string id;
    bool obsolete = false;
    std::vector<std::pair<std::string, std::string>> links;
  };
  std::vector<Stanza> stanzas;
  bool in_term = false;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind('[', 0) == 0) {
      in_term = line == "[Term]";
      if (in_term) stanzas.emplace_back();
      continue;
    }
    if (!in_term) continue;
    auto& s = stanzas.back();
    const auto strip = [](std::string v) {
      if (auto bang = v.find(" !"); bang != std::string::npos) v.erase(bang);
      while (!v.empty() && v.back() == ' ') v.pop_back();
      return v;
    };
    if (line.rfind("id: ", 0) == 0) s.id = line.substr(4);
    else if (line == "is_obsolete: true") s.obsolete = true;
    else if (line.rfind("is_a: ", 0) == 0) s.links.emplace_back("is_a", strip(line.substr(6)));
    else if (line.rfind("relationship: ", 0) == 0) {
      const auto rest = strip(line.substr(14));
      const auto sp = rest.find(' ');
      s.links.emplace_back(rest.substr(0, sp), rest.substr(sp + 1));
    }
  }
  std::set<std::string> live;
  for (const auto& s : stanzas)
    if (!s.obsolete) live.insert(s.id);
  std::set<OracleTriple> out;
  for (const auto& s : stanzas) {
    if (s.obsolete) continue;
    for (const auto& [rel, target] : s.links)
      if (live.count(target)) out.insert({s.id, rel, target});
  }
  return out;
}

// ---- negative-sampling oracles ----

inline std::set<Triple> triple_set(const KnowledgeGraph& kg) {
  return {kg.triples().begin(), kg.triples().end()};
}

inline std::map<std::string, std::set<std::string>> parent_map(const KnowledgeGraph& kg) {
  std::map<std::string, std::set<std::string>> p;
  for (const auto& t : kg.triples())
    if (t.relation == kIsA) p[t.subject].insert(t.object);
  return p;
}

inline bool share_parent(const std::map<std::string, std::set<std::string>>& parents, const std::string& a,
                         const std::string& b) {
  const auto ia = parents.find(a), ib = parents.find(b);
  if (ia == parents.end() || ib == parents.end()) return false;
  for (const auto& x : ia->second)
    if (ib->second.count(x)) return true;
  return false;
}

// ---- statistics oracles ----

/// Two-sided Welch p-value through Boost's Student t distribution.
inline double welch_p_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  const auto moments = [](const std::vector<double>& x) {
    double m = 0;
    for (double v : x) m += v;
    m /= x.size();
    double s = 0;
    for (double v : x) s += (v - m) * (v - m);
    return std::pair{m, s / (x.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double qa = va / a.size(), qb = vb / b.size();
  const double t = (ma - mb) / std::sqrt(qa + qb);
  const double df = (qa + qb) * (qa + qb) / (qa * qa / (a.size() - 1) + qb * qb / (b.size() - 1));
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

/// Pair-counting AUC: P(score+ > score-) + 0.5 P(tie).
inline double auc_oracle(const std::vector<double>& scores, const std::vector<Label>& y) {
  double num = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (y[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) num += 1.0;
      else if (scores[i] == scores[j]) num += 0.5;
    }
  }
  return num / static_cast<double>(pairs);
}

struct KappaCase {
  std::vector<std::vector<std::size_t>> table;
  double expected;
};

/// Tables with kappa worked out by hand in exact fractions.
inline std::vector<KappaCase> kappa_cases() {
  return {
      {{{5, 0, 0}, {0, 5, 0}, {0, 0, 5}, {5, 0, 0}}, 1.0},
      {{{3, 2, 0}, {2, 3, 0}, {1, 1, 3}, {0, 5, 0}}, 22.0 / 117.0},
      {{{2, 2}, {2, 2}, {2, 2}}, -1.0 / 3.0},
      {{{4, 0}, {0, 4}, {2, 2}, {3, 1}, {1, 3}}, 1.0 / 3.0},
      {{{0, 0, 0, 0, 14},
        {0, 2, 6, 4, 2},
        {0, 0, 3, 5, 6},
        {0, 3, 9, 2, 0},
        {2, 2, 8, 1, 1},
        {7, 7, 0, 0, 0},
        {3, 2, 6, 3, 0},
        {2, 5, 3, 2, 2},
        {6, 5, 2, 1, 0},
        {0, 2, 2, 3, 7}},
       4211.0 / 20059.0},
      {{{2, 0, 1}, {1, 1, 1}, {1, 0, 2}, {3, 0, 0}, {1, 2, 0}, {2, 0, 1}, {1, 1, 1}}, -13.0 / 134.0},
      {{{2, 1}, {3, 0}, {1, 2}, {2, 1}, {2, 1}, {3, 0}, {1, 2}, {0, 3}}, 1.0 / 7.0},
      {{{3, 0, 2}, {0, 3, 2}, {2, 2, 1}, {2, 2, 1}, {2, 2, 1}}, -2.0 / 23.0},
      {{{1, 2, 2}, {1, 2, 2}, {2, 1, 2}, {0, 2, 3}, {1, 2, 2}, {2, 2, 1}}, -52.0 / 293.0},
      {{{1, 1, 1}, {1, 2, 0}, {2, 1, 0}, {0, 2, 1}, {1, 2, 0}}, -0.25},
  };
}

// ---- clustering oracle ----

/// Brute-force density connectivity: core points (>= min_pts neighbours
/// counting themselves) joined when within eps; border points attach to the
/// first core neighbour's component by index order of discovery. Returns a
/// label per point (-1 noise) normalised so cluster ids appear in order.
inline std::vector<int> dbscan_oracle(const std::vector<std::vector<float>>& pts, double eps, std::size_t min_pts,
                                      double (*dist)(const std::vector<float>&, const std::vector<float>&)) {
  const std::size_t n = pts.size();
  std::vector<std::vector<bool>> near(n, std::vector<bool>(n));
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < n; ++j) {
      near[i][j] = dist(pts[i], pts[j]) <= eps;
      c += near[i][j];
    }
    core[i] = c >= min_pts;
  }
  // union-find over core points
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  const auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (core[i] && core[j] && near[i][j]) parent[find(i)] = find(j);
  std::vector<int> label(n, -1);
  std::map<std::size_t, int> ids;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    const auto r = find(i);
    if (!ids.count(r)) ids.emplace(r, static_cast<int>(ids.size()));
    label[i] = ids[r];
  }
  return label;
}

// ---- fixtures ----

/// Seeded vectors for every token of every entity name, except every
/// `skip_every`-th distinct token (left out of vocabulary).
inline EmbeddingModel table_embedding(const KnowledgeGraph& kg, std::size_t dim, std::uint64_t seed,
                                      std::size_t skip_every = 7) {
  std::set<std::string> vocab;
  for (const auto& e : kg.entities())
    for (auto& tok : tokenize(e.name)) vocab.insert(tok);
  EmbeddingModel::Table table;
  std::size_t k = 0;
  for (const auto& tok : vocab) {
    if (skip_every && ++k % skip_every == 0) continue;
    table.emplace(tok, seeded_vector(seed, tok, dim));
  }
  return EmbeddingModel::from_table(dim, std::move(table), mix_seed(seed, "oov"));
}

struct PlantedCorpus {
  std::vector<std::string> names;
  TokenFrequency frequency;
  EmbeddingModel embedding;
  std::vector<std::string> planted;  // tokens of the planted cluster
  std::vector<std::string> control;  // tokens of the inert cluster
};

/// Entities built from filler tokens with scattered embeddings, plus a
/// planted cluster (near-identical, large vectors; one token in 90% of
/// entities) and an inert control cluster (near-identical tokens sharing
/// fewer than 1% of entities).
inline PlantedCorpus planted_corpus(std::uint64_t seed, std::size_t entities = 2000, std::size_t fillers = 300,
                                    std::size_t dim = 32) {
  Rng rng(seed);
  const auto gauss = [&rng] {
    const double u = std::max(rng.uniform01(), 1e-300), v = rng.uniform01();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586 * v);
  };
  const auto jittered = [&](const std::vector<float>& centre, double sd) {
    std::vector<float> v(centre);
    for (auto& x : v) x += static_cast<float>(sd * gauss());
    return v;
  };
  std::vector<float> planted_centre(dim), control_centre(dim);
  for (auto& x : planted_centre) x = static_cast<float>(4.0 * gauss());
  for (auto& x : control_centre) x = static_cast<float>(gauss());

  PlantedCorpus c{{}, {}, EmbeddingModel::random(dim, 0), {"plantx", "planty", "plantz"},
                  {"ctrla", "ctrlb", "ctrlc"}};
  EmbeddingModel::Table table;
  std::vector<std::string> filler(fillers);
  for (std::size_t f = 0; f < fillers; ++f) {
    filler[f] = "fill" + std::to_string(f) + "q";
    std::vector<float> v(dim);
    for (auto& x : v) x = static_cast<float>(gauss());
    table.emplace(filler[f], v);
  }
  for (const auto& t : c.planted) table.emplace(t, jittered(planted_centre, 0.01));
  for (const auto& t : c.control) table.emplace(t, jittered(control_centre, 0.01));

  const std::size_t control_entities = entities / 100 - 1;  // < 1%
  std::vector<std::size_t> order(entities);
  for (std::size_t i = 0; i < entities; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<bool> has_control(entities);
  for (std::size_t i = 0; i < control_entities; ++i) has_control[order[i]] = true;
  for (std::size_t i = 0; i < entities; ++i) {
    std::string name = filler[(2 * i) % fillers] + " " + filler[(2 * i + 1) % fillers];
    if (rng.uniform01() < 0.9) name += " plantx";
    if (rng.uniform01() < 0.3) name += " planty";
    if (rng.uniform01() < 0.3) name += " plantz";
    if (has_control[i]) name += " ctrla ctrlb ctrlc";
    c.names.push_back(name);
  }
  for (const auto& n : c.names)
    for (auto& tok : tokenize(n)) ++c.frequency.counts[tok];
  c.embedding = EmbeddingModel::from_table(dim, std::move(table), mix_seed(seed, "oov"));
  return c;
}

}  // namespace kgc::oracle
