#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgcurate/common.hpp"

namespace kgc {

enum class Verdict { True, False, Unclassified };

std::string_view to_string(Verdict v);
Verdict parse_verdict_name(std::string_view text);

struct EvalReport {
  double accuracy = 0.0;
  // Positive class.
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Unweighted mean over both classes.
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::size_t n_total = 0;
  std::size_t n_unclassified = 0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  /// Set when a zero denominator forced a metric to 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  std::map<std::string, double> per_relation_auc;
  std::optional<double> auc;
  std::optional<double> kappa;

  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
};

/// Accuracy plus positive-class and macro precision/recall/F1.
EvalReport classification_report(std::span<const Label> predictions, std::span<const Label> truths);

/// Unclassified verdicts count as wrong for accuracy and are left out of
/// precision/recall/F1.
EvalReport verdict_report(std::span<const Verdict> verdicts, std::span<const Label> truths);

/// Mann-Whitney rank statistic; tied scores contribute one half. Throws
/// Error(InvalidArgument) unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const Label> truths);

struct GroupedAuc {
  std::map<std::string, double> auc;
  std::vector<std::string> warnings;
};

/// AUC per relation label; groups missing a class are omitted with a warning.
GroupedAuc roc_auc_by_relation(std::span<const double> scores, std::span<const Label> truths,
                               std::span<const std::string> relations);

/// Relation and AUC columns, sorted by relation.
std::string auc_tsv(const std::map<std::string, double>& auc);

/// Fleiss' kappa over an items x categories matrix of rating counts. Every
/// row must sum to the same n >= 2.
double fleiss_kappa(const std::vector<std::vector<std::size_t>>& ratings);

/// Builds the items x {True, False, Unclassified} count matrix from a
/// verdict table (rows = items). With `two_categories`, Unclassified
/// ratings are dropped and rows must still be equal-sized.
std::vector<std::vector<std::size_t>> verdict_counts(const std::vector<std::vector<Verdict>>& table,
                                                     bool two_categories = false);

}  // namespace kgc
