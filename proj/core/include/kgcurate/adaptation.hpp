#pragma once

// Token selection: the naive length filter and the embedding-specific
// cluster + t-test stop-word identification, with their primitives.

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "kgcurate/stats.hpp"
#include "kgcurate/tokenizer.hpp"

namespace kgc {

class EmbeddingModel;
class KnowledgeGraph;
struct Triple;

enum class StopMethod { Naive, TaskOriented };
enum class DistanceMetric { Cosine, Euclidean };

std::string_view to_string(StopMethod m);
std::string_view to_string(DistanceMetric m);

/// Keeps tokens of 3+ characters; if none qualify the input is returned as is.
TokenList naive_filter(const TokenList& tokens);

struct TaskOrientedParams {
  double top_fraction = 0.25;
  std::size_t entities_per_iteration = 5000;
  std::size_t iterations = 10;
  double alpha = 0.05;
  std::optional<double> eps;  // unset: percentile of k-NN distances
  std::size_t min_pts = 3;
  DistanceMetric metric = DistanceMetric::Cosine;
  std::size_t pair_budget = 500000;
  std::size_t eps_k = 3;
  double eps_percentile = 0.10;
  stats::Alternative alternative = stats::Alternative::TwoSided;
  std::size_t threads = 1;
};

struct StopTokenSet {
  std::set<std::string> tokens;
  StopMethod method = StopMethod::TaskOriented;
  TaskOrientedParams params;
  std::uint64_t seed = 0;

  bool contains(const std::string& token) const { return tokens.contains(token); }
  std::string to_json() const;
  static StopTokenSet from_json(const std::string& text);
};

/// Drops stop tokens; an entity that would lose every token keeps them all.
TokenList apply_stop_tokens(const TokenList& tokens, const StopTokenSet& stop);

/// Cluster membership by point index.
struct ClusterSet {
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<std::size_t> noise;
};

double point_distance(std::span<const float> a, std::span<const float> b, DistanceMetric metric);

/// Density-based clustering. A point is core when at least `min_pts` points
/// (itself included) lie within `eps`. Points are visited and neighbours
/// expanded in index order, so the result is deterministic.
ClusterSet dbscan(std::span<const std::vector<float>> points, double eps, std::size_t min_pts,
                  DistanceMetric metric);

/// `percentile` quantile of each point's distance to its k-th nearest neighbour.
double knn_distance_percentile(std::span<const std::vector<float>> points, std::size_t k, double percentile,
                               DistanceMetric metric);

/// Population variance of pairwise Euclidean distances; all pairs when there
/// are at most `pair_budget`, otherwise a seeded sample of distinct pairs.
double distance_variance(std::span<const std::vector<float>> vectors, std::size_t pair_budget,
                         std::uint64_t seed);

struct ClusterTest {
  std::vector<std::string> tokens;
  std::vector<double> with_cluster;     // D1: variance series, all tokens
  std::vector<double> without_cluster;  // D2: variance series, cluster removed
  std::optional<double> p_value;        // unset when the test was inconclusive
  bool selected = false;
};

struct TaskOrientedResult {
  StopTokenSet stop;
  double eps = 0.0;
  std::vector<std::string> candidate_tokens;
  std::vector<std::string> noise_tokens;
  std::vector<ClusterTest> clusters;
};

/// Clusters the most frequent tokens by embedding and keeps a cluster as stop
/// words when removing it shifts the spread of entity centroids
/// significantly. `entity_names` is the unique entity population and
/// `frequency` the token counts over positive heads and tails.
TaskOrientedResult task_oriented_stopwords(std::span<const std::string> entity_names,
                                           const TokenFrequency& frequency, const EmbeddingModel& embedding,
                                           const Tokenizer& tokenizer, const TaskOrientedParams& params,
                                           std::uint64_t seed);

/// Same, with the entity population and frequencies taken from `positives`.
TaskOrientedResult task_oriented_stopwords(const KnowledgeGraph& kg, std::span<const Triple> positives,
                                           const EmbeddingModel& embedding, const Tokenizer& tokenizer,
                                           const TaskOrientedParams& params, std::uint64_t seed);

}  // namespace kgc
