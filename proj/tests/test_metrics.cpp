#include <gtest/gtest.h>

#include "kgcurate/common.hpp"
#include "kgcurate/metrics.hpp"
#include "support.hpp"

using namespace kgc;

namespace {

std::vector<Label> make(std::initializer_list<std::pair<std::size_t, Label>> runs) {
  std::vector<Label> out;
  for (auto [n, v] : runs) out.insert(out.end(), n, v);
  return out;
}

}  // namespace

TEST(Classification, AllCorrect) {
  const std::vector<Label> y = {1, 0, 1, 1, 0};
  const auto r = classification_report(y, y);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.f1, 1.0);
  EXPECT_EQ(r.macro_f1, 1.0);
}

TEST(Classification, HandArithmetic) {
  // TP=8, FP=2, FN=4, TN=6
  const auto pred = make({{8, 1}, {2, 1}, {4, 0}, {6, 0}});
  const auto truth = make({{8, 1}, {2, 0}, {4, 1}, {6, 0}});
  const auto r = classification_report(pred, truth);
  EXPECT_EQ(r.tp, 8u);
  EXPECT_DOUBLE_EQ(r.precision, 0.8);
  EXPECT_DOUBLE_EQ(r.recall, 2.0 / 3.0);
  EXPECT_NEAR(r.f1, 0.7272727, 1e-6);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.7);
  // negative class: P = 6/10, R = 6/8
  EXPECT_DOUBLE_EQ(r.macro_precision, (0.8 + 0.6) / 2);
  EXPECT_DOUBLE_EQ(r.macro_recall, (2.0 / 3.0 + 0.75) / 2);
}

TEST(Classification, NoPredictedPositivesFlagged) {
  const std::vector<Label> pred = {0, 0, 0}, truth = {1, 0, 1};
  const auto r = classification_report(pred, truth);
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_TRUE(r.precision_undefined);
  EXPECT_EQ(r.f1, 0.0);
  EXPECT_THROW(classification_report(pred, std::vector<Label>{1}), Error);
}

TEST(Verdicts, TenPercentUnclassified) {
  std::vector<Verdict> v(100, Verdict::True);
  std::vector<Label> y(100, 1);
  for (int i = 0; i < 10; ++i) v[i] = Verdict::Unclassified;
  const auto r = verdict_report(v, y);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.9);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.n_unclassified, 10u);
}

TEST(Verdicts, AllUnclassified) {
  const std::vector<Verdict> v(4, Verdict::Unclassified);
  const std::vector<Label> y = {1, 0, 1, 0};
  const auto r = verdict_report(v, y);
  EXPECT_EQ(r.accuracy, 0.0);
  EXPECT_EQ(r.f1, 0.0);
  EXPECT_TRUE(r.precision_undefined);
  EXPECT_TRUE(r.recall_undefined);
}

TEST(Verdicts, NoRefusalsEqualsClassification) {
  Rng rng(2);
  std::vector<Verdict> v;
  std::vector<Label> pred, y;
  for (int i = 0; i < 50; ++i) {
    pred.push_back(rng.below(2));
    y.push_back(rng.below(2));
    v.push_back(pred.back() ? Verdict::True : Verdict::False);
  }
  EXPECT_EQ(verdict_report(v, y).to_json(), classification_report(pred, y).to_json());
}

TEST(Auc, SimpleCases) {
  const std::vector<Label> y = {0, 0, 1, 1};
  EXPECT_EQ(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, y), 1.0);
  EXPECT_EQ(roc_auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, y), 0.5);
  EXPECT_THROW(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<Label>{1, 1}), Error);
}

TEST(Auc, SixItemMixedCaseMatchesOracle) {
  const std::vector<double> s = {0.3, 0.7, 0.7, 0.1, 0.9, 0.3};
  const std::vector<Label> y = {1, 0, 1, 0, 1, 0};
  EXPECT_EQ(roc_auc(s, y), oracle::auc_oracle(s, y));
}

TEST(Auc, ByRelationWarnsOnSingleClassGroups) {
  const std::vector<double> s = {0.1, 0.9, 0.4, 0.6, 0.5};
  const std::vector<Label> y = {0, 1, 0, 1, 1};
  const std::vector<std::string> rel = {"is a", "is a", "has role", "has role", "has part"};
  const auto g = roc_auc_by_relation(s, y, rel);
  EXPECT_EQ(g.auc.at("is a"), 1.0);
  EXPECT_EQ(g.auc.at("has role"), 1.0);
  EXPECT_FALSE(g.auc.count("has part"));
  EXPECT_EQ(g.warnings.size(), 1u);
  EXPECT_EQ(auc_tsv(g.auc).substr(0, 13), "relation\tauc\n");
}

TEST(Kappa, Unanimous) {
  EXPECT_EQ(fleiss_kappa({{5, 0}, {0, 5}, {5, 0}}), 1.0);
  EXPECT_EQ(fleiss_kappa({{5, 0}, {5, 0}}), 1.0);
}

TEST(Kappa, ThreeItemsFiveRatersByHand) {
  // rows {4,1}, {2,3}, {5,0}: P_i = .6, .4, 1 -> Pbar = 2/3;
  // p = (11/15, 4/15) -> Pe = 137/225; kappa = (2/3 - 137/225) / (88/225) = 13/88
  EXPECT_NEAR(fleiss_kappa({{4, 1}, {2, 3}, {5, 0}}), 13.0 / 88.0, 1e-12);
}

TEST(Kappa, ConstructedTables) {
  for (const auto& c : oracle::kappa_cases()) EXPECT_NEAR(fleiss_kappa(c.table), c.expected, 1e-9);
}

TEST(Kappa, RandomRatingsNearZero) {
  Rng rng(3);
  std::vector<std::vector<std::size_t>> t;
  for (int i = 0; i < 4000; ++i) {
    std::vector<std::size_t> row(2);
    for (int r = 0; r < 5; ++r) ++row[rng.below(2)];
    t.push_back(row);
  }
  EXPECT_NEAR(fleiss_kappa(t), 0.0, 0.03);
}

TEST(Kappa, VerdictCounts) {
  const std::vector<std::vector<Verdict>> table = {{Verdict::True, Verdict::Unclassified, Verdict::True}};
  EXPECT_EQ(verdict_counts(table, false), (std::vector<std::vector<std::size_t>>{{2, 0, 1}}));
}

TEST(Report, JsonRoundTrip) {
  const std::vector<Label> p = {1, 0, 1, 1}, y = {1, 0, 0, 1};
  auto r = classification_report(p, y);
  r.auc = 0.75;
  r.kappa = 0.2;
  r.per_relation_auc = {{"is a", 0.5}};
  EXPECT_EQ(EvalReport::from_json(r.to_json()).to_json(), r.to_json());
}
