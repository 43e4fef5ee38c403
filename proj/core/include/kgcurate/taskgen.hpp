#pragma once

// Positive/negative dataset construction for the three curation tasks, plus
// stratified splits, scarcity/imbalance scenarios and the ICL query pool.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgcurate/ontology.hpp"

namespace kgc {

class Tokenizer;

enum class TaskId { Task1 = 1, Task2 = 2, Task3 = 3 };
enum class Origin { Positive, RandomNegative, FlippedNegative, SiblingNegative };
enum class SplitTag { Train, Validation, Test, Unassigned };

std::string_view to_string(TaskId t);
std::string_view to_string(Origin o);
std::string_view to_string(SplitTag s);
TaskId parse_task(std::string_view text);
Origin parse_origin(std::string_view text);
SplitTag parse_split(std::string_view text);

struct LabeledTriple {
  Triple triple;
  bool label = false;
  Origin origin = Origin::Positive;

  bool operator==(const LabeledTriple&) const = default;
};

struct TaskDataset {
  TaskId task = TaskId::Task1;
  std::vector<LabeledTriple> items;
  std::uint64_t seed = 0;
  std::vector<SplitTag> splits;  // parallel to items

  std::vector<std::size_t> indices(SplitTag tag) const;
  std::size_t count(SplitTag tag, std::optional<bool> label = {}) const;
  std::size_t positives() const;
  std::size_t negatives() const { return items.size() - positives(); }

  bool operator==(const TaskDataset&) const = default;
};

/// Task1/Task3: every triple; Task2: every triple except `is tautomer of`.
std::vector<Triple> positives_for_task(const KnowledgeGraph& kg, TaskId task);

struct RandomNegativeOptions {
  /// Draw relations uniformly over the positives' labels instead of by
  /// their empirical frequency.
  bool uniform_relations = false;
};

/// |positives| distinct triples (s, o, l) with s != o and (s, o, l) not in the
/// graph. Throws Error(Generation) if the graph cannot host that many.
std::vector<Triple> gen_random_negatives(const KnowledgeGraph& kg, std::span<const Triple> positives,
                                         std::uint64_t seed, RandomNegativeOptions options = {});
std::vector<Triple> gen_random_negatives(const KnowledgeGraph& kg, std::span<const Triple> positives,
                                         std::size_t count, std::uint64_t seed,
                                         RandomNegativeOptions options = {});

/// Negatives paired with the index of the positive they were derived from.
struct DerivedNegatives {
  std::vector<Triple> triples;
  std::vector<std::size_t> source;
};

/// (o, s, l) for each positive (s, o, l) unless the flip is itself a known triple.
DerivedNegatives gen_flipped_negatives(const KnowledgeGraph& kg, std::span<const Triple> positives);

/// (s, o2, l) with o2 a uniformly chosen is_a sibling of o1 such that the
/// result is new, o2 != s, and not already produced; positives without such
/// a sibling contribute nothing.
DerivedNegatives gen_sibling_negatives(const KnowledgeGraph& kg, std::span<const Triple> positives,
                                       std::uint64_t seed);

/// Positives followed by the task's negatives, all tagged Unassigned.
TaskDataset build_task_dataset(const KnowledgeGraph& kg, TaskId task, std::uint64_t seed,
                               RandomNegativeOptions options = {});

/// Uniform seeded subsample keeping at most `per_class` items of each label.
TaskDataset balanced_subsample(const TaskDataset& dataset, std::size_t per_class, std::uint64_t seed);

/// Seeded subsample of `fraction` of the items, drawn per (label, relation).
TaskDataset fraction_subsample(const TaskDataset& dataset, double fraction, std::uint64_t seed);

struct SplitResult {
  TaskDataset dataset;
  std::vector<std::string> warnings;
};

/// Partitions every (label, relation) stratum by `ratios` (two parts:
/// Train/Test; three parts: Train/Validation/Test) after a seeded shuffle.
/// Part sizes follow largest-remainder rounding. Strata smaller than the
/// number of parts go to Train with a warning.
SplitResult stratified_split(const TaskDataset& dataset, std::span<const double> ratios, std::uint64_t seed);

/// Untags (to Unassigned) a seeded random surplus of the larger class within
/// `tag` so its positives and negatives differ by at most one.
TaskDataset balance_split(const TaskDataset& dataset, SplitTag tag, std::uint64_t seed);

struct ScenarioSpec {
  double train_test_ratio = 9.0;  // training items per test item
  double pos_neg_ratio = 1.0;     // positives per negative in training
  std::uint64_t seed = 0;
};

/// Train:test ratios visited when shrinking training data one step at a time.
inline const std::vector<double> kDefaultRatioLadder = {9, 8, 7, 6, 5, 4, 3, 2, 1, 0.5};

/// Five default scenarios from abundant/balanced to scarce/imbalanced.
std::vector<ScenarioSpec> default_scenarios(std::uint64_t seed);

/// Training sizes reached by successive shrinking: rung k keeps
/// round(size[k-1] * ladder[k] / ladder[k-1]) items; rung 0 is `base_train`.
std::vector<std::size_t> ladder_train_sizes(std::size_t base_train, std::span<const double> ladder);

/// Training size for `target_ratio`, walking the ladder from its first rung.
/// Ratios not on the ladder are appended after the last larger rung.
std::size_t scenario_train_size(std::size_t base_train, double target_ratio, std::span<const double> ladder);

struct ScenarioResult {
  TaskDataset dataset;          // Test items untouched, kept training items tagged Train
  std::size_t train_size = 0;   // after the train:test step
  std::size_t final_train_size = 0;  // after the pos:neg step
  std::size_t train_positives = 0;
  std::size_t train_negatives = 0;
};

/// Shrinks the Train part of a split dataset to the scenario's train:test
/// ratio (nested subsets along the ladder, class-proportional), then drops
/// positives to reach the pos:neg ratio. Ratios are met to within one item.
/// Throws Error(InvalidArgument) naming the binding class when infeasible.
ScenarioResult scenario_subset(const TaskDataset& split_dataset, const ScenarioSpec& spec,
                               std::span<const double> ladder = kDefaultRatioLadder);

struct IclPoolOptions {
  std::size_t n_pos = 50;
  std::size_t n_neg = 50;
  std::string relation = "is_a";  // empty: no relation filter
  std::size_t max_tokens = 60;    // exclusive bound on subject+relation+object tokens
  std::optional<SplitTag> split;  // restrict to one split when set
};

/// Uniform seeded sample of qualifying positives then negatives.
std::vector<LabeledTriple> sample_icl_pool(const TaskDataset& dataset, const KnowledgeGraph& kg,
                                           const Tokenizer& tokenizer, const IclPoolOptions& options,
                                           std::uint64_t seed);

/// TSV with header `subject relation object label origin split`.
void write_dataset(const TaskDataset& dataset, std::ostream& out);
TaskDataset read_dataset(std::istream& in, TaskId task = TaskId::Task1, std::uint64_t seed = 0);

}  // namespace kgc
