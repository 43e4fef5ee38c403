#include "kgcurate/adaptation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>
#include <thread>
#include <unordered_map>

#include "json.hpp"
#include "kgcurate/common.hpp"
#include "kgcurate/embedding.hpp"
#include "kgcurate/ontology.hpp"

namespace kgc {

using nlohmann::json;

std::string_view to_string(StopMethod m) { return m == StopMethod::Naive ? "naive" : "task_oriented"; }

std::string_view to_string(DistanceMetric m) { return m == DistanceMetric::Cosine ? "cosine" : "euclidean"; }

namespace {

stats::Alternative parse_alternative(std::string_view s) {
  if (s == "two_sided") return stats::Alternative::TwoSided;
  if (s == "less") return stats::Alternative::Less;
  if (s == "greater") return stats::Alternative::Greater;
  throw Error(ErrorKind::Parse, "unknown alternative: " + std::string(s));
}

std::string_view alternative_name(stats::Alternative a) {
  switch (a) {
    case stats::Alternative::Less: return "less";
    case stats::Alternative::Greater: return "greater";
    default: return "two_sided";
  }
}

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

double euclidean(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Pairwise distance matrix (row-major, n x n). Cosine uses precomputed norms.
std::vector<double> distance_matrix(std::span<const std::vector<float>> points, DistanceMetric metric) {
  const std::size_t n = points.size();
  std::vector<double> d(n * n, 0.0);
  std::vector<double> norms(n);
  if (metric == DistanceMetric::Cosine)
    for (std::size_t i = 0; i < n; ++i) norms[i] = std::sqrt(dot(points[i], points[i]));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double v;
      if (metric == DistanceMetric::Euclidean) {
        v = euclidean(points[i], points[j]);
      } else if (norms[i] == 0.0 || norms[j] == 0.0) {
        v = (norms[i] == 0.0 && norms[j] == 0.0) ? 0.0 : 1.0;
      } else {
        v = std::max(0.0, 1.0 - dot(points[i], points[j]) / (norms[i] * norms[j]));
      }
      d[i * n + j] = d[j * n + i] = v;
    }
  }
  return d;
}

void check_dimensions(std::span<const std::vector<float>> points) {
  for (const auto& p : points)
    if (p.size() != points.front().size()) throw Error(ErrorKind::InvalidArgument, "points differ in dimension");
}

}  // namespace

TokenList naive_filter(const TokenList& tokens) {
  TokenList out;
  for (const auto& t : tokens)
    if (t.size() >= 3) out.push_back(t);
  return out.empty() ? tokens : out;
}

TokenList apply_stop_tokens(const TokenList& tokens, const StopTokenSet& stop) {
  TokenList out;
  for (const auto& t : tokens)
    if (!stop.contains(t)) out.push_back(t);
  return out.empty() ? tokens : out;
}

std::string StopTokenSet::to_json() const {
  json j;
  j["method"] = std::string(to_string(method));
  j["seed"] = seed;
  json p;
  p["top_fraction"] = params.top_fraction;
  p["entities_per_iteration"] = params.entities_per_iteration;
  p["iterations"] = params.iterations;
  p["alpha"] = params.alpha;
  p["eps"] = params.eps ? json(*params.eps) : json(nullptr);
  p["min_pts"] = params.min_pts;
  p["metric"] = std::string(to_string(params.metric));
  p["pair_budget"] = params.pair_budget;
  p["eps_k"] = params.eps_k;
  p["eps_percentile"] = params.eps_percentile;
  p["alternative"] = std::string(alternative_name(params.alternative));
  j["params"] = p;
  j["tokens"] = json::array();
  for (const auto& t : tokens) j["tokens"].push_back(t);
  return j.dump(2) + "\n";
}

StopTokenSet StopTokenSet::from_json(const std::string& text) {
  StopTokenSet s;
  try {
    const auto j = json::parse(text);
    const auto method = j.at("method").get<std::string>();
    if (method == "naive") s.method = StopMethod::Naive;
    else if (method == "task_oriented") s.method = StopMethod::TaskOriented;
    else throw Error(ErrorKind::Parse, "unknown stop method: " + method);
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("params")) {
      const auto& p = j["params"];
      auto& q = s.params;
      q.top_fraction = p.value("top_fraction", q.top_fraction);
      q.entities_per_iteration = p.value("entities_per_iteration", q.entities_per_iteration);
      q.iterations = p.value("iterations", q.iterations);
      q.alpha = p.value("alpha", q.alpha);
      if (p.contains("eps") && !p["eps"].is_null()) q.eps = p["eps"].get<double>();
      q.min_pts = p.value("min_pts", q.min_pts);
      q.metric = p.value("metric", std::string("cosine")) == "euclidean" ? DistanceMetric::Euclidean
                                                                      : DistanceMetric::Cosine;
      q.pair_budget = p.value("pair_budget", q.pair_budget);
      q.eps_k = p.value("eps_k", q.eps_k);
      q.eps_percentile = p.value("eps_percentile", q.eps_percentile);
      q.alternative = parse_alternative(p.value("alternative", std::string("two_sided")));
    }
    for (const auto& t : j.at("tokens")) s.tokens.insert(to_lower_ascii(t.get<std::string>()));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("stop token JSON: ") + e.what());
  }
  return s;
}

double point_distance(std::span<const float> a, std::span<const float> b, DistanceMetric metric) {
  if (a.size() != b.size()) throw Error(ErrorKind::InvalidArgument, "points differ in dimension");
  if (metric == DistanceMetric::Euclidean) return euclidean(a, b);
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return (na == 0.0 && nb == 0.0) ? 0.0 : 1.0;
  return std::max(0.0, 1.0 - dot(a, b) / (na * nb));
}

ClusterSet dbscan(std::span<const std::vector<float>> points, double eps, std::size_t min_pts,
                  DistanceMetric metric) {
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "dbscan eps must be > 0");
  if (min_pts < 1) throw Error(ErrorKind::InvalidArgument, "dbscan min_pts must be >= 1");
  ClusterSet out;
  const std::size_t n = points.size();
  if (n == 0) return out;
  check_dimensions(points);
  const auto d = distance_matrix(points, metric);

  std::vector<std::vector<std::size_t>> neighbours(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (d[i * n + j] <= eps) neighbours[i].push_back(j);

  constexpr std::size_t kUnvisited = static_cast<std::size_t>(-1);
  constexpr std::size_t kNoise = static_cast<std::size_t>(-2);
  std::vector<std::size_t> label(n, kUnvisited);
  std::size_t next_cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != kUnvisited) continue;
    if (neighbours[i].size() < min_pts) {
      label[i] = kNoise;
      continue;
    }
    const std::size_t c = next_cluster++;
    label[i] = c;
    std::deque<std::size_t> queue(neighbours[i].begin(), neighbours[i].end());
    while (!queue.empty()) {
      const auto q = queue.front();
      queue.pop_front();
      if (label[q] == kNoise) label[q] = c;
      if (label[q] != kUnvisited) continue;
      label[q] = c;
      if (neighbours[q].size() >= min_pts)
        for (auto r : neighbours[q])
          if (label[r] == kUnvisited || label[r] == kNoise) queue.push_back(r);
    }
  }
  out.clusters.resize(next_cluster);
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] == kNoise) out.noise.push_back(i);
    else out.clusters[label[i]].push_back(i);
  }
  return out;
}

double knn_distance_percentile(std::span<const std::vector<float>> points, std::size_t k, double percentile,
                               DistanceMetric metric) {
  const std::size_t n = points.size();
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "k-NN distances need at least 2 points");
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "k must be >= 1");
  check_dimensions(points);
  const auto d = distance_matrix(points, metric);
  const std::size_t kk = std::min(k, n - 1);
  std::vector<double> kth(n);
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row.push_back(d[i * n + j]);
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(kk - 1), row.end());
    kth[i] = row[kk - 1];
  }
  std::sort(kth.begin(), kth.end());
  // Linear interpolation between order statistics.
  const double pos = std::clamp(percentile, 0.0, 1.0) * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, n - 1);
  return kth[lo] + (pos - static_cast<double>(lo)) * (kth[hi] - kth[lo]);
}

double distance_variance(std::span<const std::vector<float>> vectors, std::size_t pair_budget, std::uint64_t seed) {
  const std::size_t n = vectors.size();
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "distance variance needs at least 2 vectors");
  check_dimensions(vectors);
  const std::size_t pairs = n * (n - 1) / 2;
  std::vector<double> dist;
  if (pairs <= pair_budget || pair_budget == 0) {
    dist.reserve(pairs);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) dist.push_back(euclidean(vectors[i], vectors[j]));
  } else {
    // Row i holds the pairs (i, i+1..n-1); offsets locate a linear pair index.
    std::vector<std::size_t> row_start(n);
    std::size_t acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      row_start[i] = acc;
      acc += n - 1 - i;
    }
    Rng rng(seed);
    auto picks = rng.sample_indices(pairs, pair_budget);
    std::sort(picks.begin(), picks.end());
    dist.reserve(picks.size());
    std::size_t i = 0;
    for (auto p : picks) {
      while (i + 1 < n && row_start[i + 1] <= p) ++i;
      const std::size_t j = i + 1 + (p - row_start[i]);
      dist.push_back(euclidean(vectors[i], vectors[j]));
    }
  }
  return stats::population_variance(dist);
}

namespace {

std::vector<float> mean_of(const std::vector<std::span<const float>>& vecs, std::size_t dim) {
  std::vector<double> acc(dim, 0.0);
  for (const auto& v : vecs)
    for (std::size_t k = 0; k < dim; ++k) acc[k] += v[k];
  std::vector<float> out(dim, 0.0f);
  if (vecs.empty()) return out;
  for (std::size_t k = 0; k < dim; ++k) out[k] = static_cast<float>(acc[k] / static_cast<double>(vecs.size()));
  return out;
}

}  // namespace

TaskOrientedResult task_oriented_stopwords(std::span<const std::string> entity_names,
                                           const TokenFrequency& frequency, const EmbeddingModel& embedding,
                                           const Tokenizer& tokenizer, const TaskOrientedParams& params,
                                           std::uint64_t seed) {
  if (entity_names.size() < 2) throw Error(ErrorKind::InvalidArgument, "stop-word identification needs >= 2 entities");
  if (!(params.top_fraction > 0.0 && params.top_fraction <= 1.0))
    throw Error(ErrorKind::InvalidArgument, "top_fraction must be in (0, 1]");
  if (params.iterations < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 iterations");

  TaskOrientedResult result;
  result.stop.method = StopMethod::TaskOriented;
  result.stop.params = params;
  result.stop.seed = seed;

  const auto ranked = frequency.ranked();
  const auto top = static_cast<std::size_t>(std::ceil(params.top_fraction * static_cast<double>(ranked.size())));
  for (std::size_t i = 0; i < top && i < ranked.size(); ++i) result.candidate_tokens.push_back(ranked[i].first);
  if (result.candidate_tokens.size() < 2) return result;

  std::vector<std::vector<float>> points;
  points.reserve(result.candidate_tokens.size());
  for (const auto& t : result.candidate_tokens) {
    const auto v = embedding.lookup(t);
    points.emplace_back(v.begin(), v.end());
  }
  result.eps = params.eps ? *params.eps
                          : knn_distance_percentile(points, params.eps_k, params.eps_percentile, params.metric);
  if (!(result.eps > 0.0)) result.eps = 1e-12;
  const auto clusters = dbscan(points, result.eps, params.min_pts, params.metric);
  for (auto i : clusters.noise) result.noise_tokens.push_back(result.candidate_tokens[i]);
  if (clusters.clusters.empty()) return result;

  // Token ids: cluster index per candidate token, -1 otherwise.
  std::unordered_map<std::string, std::uint32_t> token_id;
  std::vector<std::int32_t> cluster_of(result.candidate_tokens.size(), -1);
  for (std::size_t i = 0; i < result.candidate_tokens.size(); ++i)
    token_id.emplace(result.candidate_tokens[i], static_cast<std::uint32_t>(i));
  for (std::size_t c = 0; c < clusters.clusters.size(); ++c)
    for (auto i : clusters.clusters[c]) cluster_of[i] = static_cast<std::int32_t>(c);

  const std::size_t dim = embedding.dimension();
  struct Entity {
    TokenList tokens;
    std::vector<std::int32_t> token_cluster;  // parallel to tokens
    std::vector<float> m1;
  };
  std::vector<Entity> entities(entity_names.size());
  for (std::size_t e = 0; e < entity_names.size(); ++e) {
    auto& ent = entities[e];
    ent.tokens = tokenizer.tokenize(entity_names[e]);
    std::vector<std::span<const float>> vecs;
    for (const auto& t : ent.tokens) {
      vecs.push_back(embedding.lookup(t));
      auto it = token_id.find(t);
      ent.token_cluster.push_back(it == token_id.end() ? -1 : cluster_of[it->second]);
    }
    ent.m1 = mean_of(vecs, dim);
  }

  const std::size_t n_clusters = clusters.clusters.size();
  const std::size_t sample = std::min(params.entities_per_iteration, entities.size());
  if (sample < 2) throw Error(ErrorKind::InvalidArgument, "stop-word identification needs >= 2 sampled entities");
  // series[it][c] = {D1, D2}
  std::vector<std::vector<std::pair<double, double>>> series(params.iterations,
                                                             std::vector<std::pair<double, double>>(n_clusters));

  const auto run_iteration = [&](std::size_t it) {
    const auto it_seed = mix_seed(seed, it);
    std::vector<std::vector<float>> m1, m2;
    for (std::size_t c = 0; c < n_clusters; ++c) {
      Rng rng(mix_seed(it_seed, c));
      const auto picks = rng.sample_indices(entities.size(), sample);
      m1.clear();
      m2.clear();
      for (auto e : picks) {
        const auto& ent = entities[e];
        m1.push_back(ent.m1);
        const bool touched = std::find(ent.token_cluster.begin(), ent.token_cluster.end(),
                                       static_cast<std::int32_t>(c)) != ent.token_cluster.end();
        if (!touched) {
          m2.push_back(ent.m1);
          continue;
        }
        std::vector<std::span<const float>> kept;
        for (std::size_t k = 0; k < ent.tokens.size(); ++k)
          if (ent.token_cluster[k] != static_cast<std::int32_t>(c)) kept.push_back(embedding.lookup(ent.tokens[k]));
        m2.push_back(kept.empty() ? ent.m1 : mean_of(kept, dim));
      }
      const auto pair_seed = mix_seed(it_seed, "pairs" + std::to_string(c));
      series[it][c] = {distance_variance(m1, params.pair_budget, pair_seed),
                       distance_variance(m2, params.pair_budget, pair_seed)};
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(params.threads, params.iterations));
  if (threads == 1) {
    for (std::size_t it = 0; it < params.iterations; ++it) run_iteration(it);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t it = t; it < params.iterations; it += threads) run_iteration(it);
      });
    for (auto& th : pool) th.join();
  }

  for (std::size_t c = 0; c < n_clusters; ++c) {
    ClusterTest test;
    for (auto i : clusters.clusters[c]) test.tokens.push_back(result.candidate_tokens[i]);
    for (std::size_t it = 0; it < params.iterations; ++it) {
      test.with_cluster.push_back(series[it][c].first);
      test.without_cluster.push_back(series[it][c].second);
    }
    try {
      test.p_value = stats::welch_t_test(test.with_cluster, test.without_cluster, params.alternative).p_value;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Numeric) throw;
    }
    test.selected = test.p_value && params.alpha > 0.0 && *test.p_value <= params.alpha;
    if (test.selected) result.stop.tokens.insert(test.tokens.begin(), test.tokens.end());
    result.clusters.push_back(std::move(test));
  }
  return result;
}

TaskOrientedResult task_oriented_stopwords(const KnowledgeGraph& kg, std::span<const Triple> positives,
                                           const EmbeddingModel& embedding, const Tokenizer& tokenizer,
                                           const TaskOrientedParams& params, std::uint64_t seed) {
  std::set<std::string> ids;
  for (const auto& t : positives) {
    ids.insert(t.subject);
    ids.insert(t.object);
  }
  std::vector<std::string> names;
  names.reserve(ids.size());
  for (const auto& id : ids) names.push_back(kg.entity(id).name);
  const auto freq = token_frequency_report(kg, positives, TokenPopulation::Both, tokenizer);
  return task_oriented_stopwords(names, freq, embedding, tokenizer, params, seed);
}

}  // namespace kgc
