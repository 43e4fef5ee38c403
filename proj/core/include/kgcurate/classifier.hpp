#pragma once

// Triple vectorization and a bagged CART ensemble with grid search.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgcurate/adaptation.hpp"
#include "kgcurate/common.hpp"
#include "kgcurate/tokenizer.hpp"

namespace kgc {

class EmbeddingModel;
class KnowledgeGraph;
struct Triple;
struct LabeledTriple;

enum class Adaptation { None, Naive, TaskOriented };

std::string_view to_string(Adaptation a);
Adaptation parse_adaptation(std::string_view text);

/// Token selection applied to each triple component before averaging.
struct TokenSelector {
  Adaptation mode = Adaptation::None;
  StopTokenSet stop;  // used by TaskOriented

  TokenList apply(const TokenList& tokens) const;
};

inline constexpr std::string_view kSeparatorToken = "sep";

using FeatureVector = std::vector<float>;

struct FeatureSequence {
  std::vector<std::vector<float>> steps;
  std::size_t separators[2] = {0, 0};  // step positions of the two separators
};

/// (subject, relation, object) given as display text, e.g. entity names.
struct NamedTriple {
  std::string subject;
  std::string relation;
  std::string object;
};

NamedTriple named(const KnowledgeGraph& kg, const Triple& t);

/// Mean token vector per component, concatenated as (s, l, o).
FeatureVector vectorize_flat(const NamedTriple& triple, const EmbeddingModel& emb, const TokenSelector& selector,
                             const Tokenizer& tokenizer = Tokenizer());

/// Subject tokens, separator, relation tokens, separator, object tokens.
FeatureSequence vectorize_sequence(const NamedTriple& triple, const EmbeddingModel& emb,
                                   const TokenSelector& selector, const Tokenizer& tokenizer = Tokenizer());

/// Row-major n x d matrix.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

/// vectorize_flat over every item, with per-text caching.
FeatureMatrix vectorize_dataset(const KnowledgeGraph& kg, std::span<const LabeledTriple> items,
                                const EmbeddingModel& emb, const TokenSelector& selector,
                                const Tokenizer& tokenizer = Tokenizer());

struct Hyperparams {
  std::size_t tree_count = 100;
  std::optional<std::size_t> max_depth;  // unset: grow until pure
  std::size_t min_samples_leaf = 1;
  std::optional<double> feature_subsample;  // unset: sqrt(d) features per node
  bool bootstrap = true;
  bool class_weighting = false;  // inverse class frequency
  std::size_t max_bins = 255;
  std::uint64_t seed = 0;
  std::size_t threads = 1;  // does not affect results

  std::string label() const;
};

struct Tree {
  std::vector<std::int32_t> feature;  // -1 at leaves
  std::vector<float> threshold;       // x <= threshold goes left
  std::vector<std::int32_t> left;
  std::vector<std::int32_t> right;
  std::vector<float> value;  // positive share at leaves

  bool vote(std::span<const float> x) const;
};

struct TrainedEnsemble {
  std::vector<Tree> trees;
  Hyperparams hyperparams;
  std::size_t feature_count = 0;
  std::vector<double> feature_importances;
  std::string dataset_hash;

  std::string to_json() const;
  static TrainedEnsemble from_json(const std::string& text);
};

/// Bagged CART with Gini splits on histogram-binned features (exact when a
/// feature has at most max_bins distinct values). Deterministic given
/// hp.seed at any thread count.
TrainedEnsemble fit_forest(const FeatureMatrix& x, std::span<const Label> y, const Hyperparams& hp);

/// Share of trees voting positive; a leaf votes positive at >= 0.5.
double predict_score(const TrainedEnsemble& model, std::span<const float> x);
/// score >= threshold
bool predict(const TrainedEnsemble& model, std::span<const float> x, double threshold = 0.5);
std::vector<double> predict_scores(const TrainedEnsemble& model, const FeatureMatrix& x);

/// Fold id per item; each class is spread evenly over the folds.
std::vector<std::size_t> stratified_folds(std::span<const Label> y, std::size_t folds, std::uint64_t seed);

struct GridCell {
  Hyperparams hyperparams;
  double mean_f1 = 0.0;
  std::vector<double> fold_f1;
};

struct GridSearchResult {
  Hyperparams best;
  std::vector<GridCell> cells;
};

/// Exhaustive k-fold evaluation; best mean F1 wins, ties to fewer trees then
/// shallower depth, then grid order.
GridSearchResult grid_search_cv(const FeatureMatrix& x, std::span<const Label> y, std::span<const Hyperparams> grid,
                                std::size_t folds = 5, std::uint64_t seed = 0);

/// tree_count {100, 300} x max_depth {none, 16} x min_samples_leaf {1, 5} x
/// feature_subsample {sqrt, 1.0}.
std::vector<Hyperparams> default_grid(std::uint64_t seed);

struct ImportanceReport {
  double subject = 0.0;
  double relation = 0.0;
  double object = 0.0;
  std::vector<double> per_dimension;

  std::string to_tsv() const;
};

ImportanceReport feature_importance_report(const TrainedEnsemble& model, std::size_t embedding_dim);

}  // namespace kgc
