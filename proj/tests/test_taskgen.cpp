#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "kgcurate/synthetic.hpp"
#include "kgcurate/taskgen.hpp"
#include "kgcurate/tokenizer.hpp"
#include "support.hpp"

using namespace kgc;

namespace {

KnowledgeGraph graph_of(std::vector<Triple> triples, std::vector<std::string> extra = {}) {
  std::set<std::string> ids(extra.begin(), extra.end());
  for (const auto& t : triples) {
    ids.insert(t.subject);
    ids.insert(t.object);
  }
  std::vector<Entity> entities;
  for (const auto& id : ids) entities.push_back({id, id});
  return KnowledgeGraph::build(std::move(entities), std::move(triples));
}

KnowledgeGraph medium() {
  SyntheticOptions o;
  o.chemicals = 300;
  o.seed = 21;
  return remove_relation(synthetic_ontology(o), kIsConjugateAcidOf);
}

TaskDataset labelled(std::size_t pos, std::size_t neg) {
  TaskDataset ds;
  for (std::size_t i = 0; i < pos + neg; ++i)
    ds.items.push_back({{"s" + std::to_string(i), i % 3 ? "is a" : "has role", "o"}, i < pos, Origin::Positive});
  ds.splits.assign(ds.items.size(), SplitTag::Unassigned);
  return ds;
}

}  // namespace

TEST(Positives, Task2DropsTautomers) {
  const auto kg = graph_of({{"A", "is tautomer of", "B"}, {"A", "is a", "C"}, {"B", "is a", "C"}, {"D", "has role", "E"},
                            {"E", "is a", "C"}});
  EXPECT_EQ(positives_for_task(kg, TaskId::Task1).size(), 5u);
  EXPECT_EQ(positives_for_task(kg, TaskId::Task2).size(), 4u);
  EXPECT_EQ(positives_for_task(kg, TaskId::Task3).size(), 5u);
}

TEST(RandomNegatives, TinyGraphComplementOracle) {
  const auto kg = graph_of({{"A", "is a", "B"}}, {"C"});
  const auto pos = positives_for_task(kg, TaskId::Task1);
  const auto neg = gen_random_negatives(kg, pos, 1);
  ASSERT_EQ(neg.size(), 1u);
  std::set<Triple> complement;
  for (auto s : {"A", "B", "C"})
    for (auto o : {"A", "B", "C"})
      if (std::string(s) != o && !(std::string(s) == "A" && std::string(o) == "B")) complement.insert({s, "is a", o});
  EXPECT_TRUE(complement.count(neg[0]));
  EXPECT_TRUE(gen_random_negatives(kg, pos, 0, 1).empty());
}

TEST(RandomNegatives, ExhaustionIsAGenerationError) {
  const auto kg = graph_of({{"A", "is a", "B"}, {"B", "is a", "A"}});
  const auto pos = positives_for_task(kg, TaskId::Task1);
  try {
    gen_random_negatives(kg, pos, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Generation);
  }
}

TEST(RandomNegatives, DeterministicAndFollowRelationMix) {
  const auto kg = medium();
  const auto pos = positives_for_task(kg, TaskId::Task1);
  const auto a = gen_random_negatives(kg, pos, 5), b = gen_random_negatives(kg, pos, 5);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, gen_random_negatives(kg, pos, 6));
  std::map<std::string, double> want, got;
  for (const auto& t : pos) want[t.relation] += 1.0 / pos.size();
  for (const auto& t : a) got[t.relation] += 1.0 / a.size();
  for (const auto& [rel, share] : want) EXPECT_NEAR(got[rel], share, 0.08) << rel;
}

TEST(FlippedNegatives, WorkedExampleAndSymmetricPairs) {
  const auto kg = graph_of({{"androstadienedione", "has role", "androgen"}, {"X", "is a", "Y"}, {"Y", "is a", "X"}});
  const auto pos = positives_for_task(kg, TaskId::Task2);
  const auto neg = gen_flipped_negatives(kg, pos);
  ASSERT_EQ(neg.triples.size(), 1u);
  EXPECT_EQ(neg.triples[0], (Triple{"androgen", "has role", "androstadienedione"}));
}

TEST(SiblingNegatives, WorkedExampleAndParentless) {
  const auto kg = graph_of({{"androstadienedione", "has role", "androgen"},
                            {"androgen", "is a", "hormone"},
                            {"estrogen", "is a", "hormone"},
                            {"lonely", "has role", "orphan"}});
  const std::vector<Triple> pos = {{"androstadienedione", "has role", "androgen"}, {"lonely", "has role", "orphan"}};
  const auto neg = gen_sibling_negatives(kg, pos, 1);
  ASSERT_EQ(neg.triples.size(), 1u);
  EXPECT_EQ(neg.triples[0], (Triple{"androstadienedione", "has role", "estrogen"}));
  EXPECT_EQ(neg.source[0], 0u);
}

TEST(SiblingNegatives, OracleProperties) {
  const auto kg = medium();
  const auto truth = oracle::triple_set(kg);
  const auto parents = oracle::parent_map(kg);
  const auto pos = positives_for_task(kg, TaskId::Task3);
  const auto neg = gen_sibling_negatives(kg, pos, 3);
  EXPECT_LE(neg.triples.size(), pos.size());
  EXPECT_EQ(neg.triples, gen_sibling_negatives(kg, pos, 3).triples);
  for (std::size_t i = 0; i < neg.triples.size(); ++i) {
    EXPECT_FALSE(truth.count(neg.triples[i]));
    EXPECT_TRUE(oracle::share_parent(parents, neg.triples[i].object, pos[neg.source[i]].object));
  }
}

TEST(Dataset, BuildIsBalancedForTask1) {
  const auto ds = build_task_dataset(medium(), TaskId::Task1, 2);
  EXPECT_EQ(ds.positives(), ds.negatives());
  for (const auto& item : ds.items)
    EXPECT_EQ(item.origin == Origin::Positive, item.label);
}

TEST(Split, TenItemsHalfHalf) {
  const std::vector<double> r = {0.5, 0.5};
  TaskDataset ds;
  for (int i = 0; i < 10; ++i) ds.items.push_back({{"s" + std::to_string(i), "is a", "o"}, i < 5, Origin::Positive});
  ds.splits.assign(10, SplitTag::Unassigned);
  const auto out = stratified_split(ds, r, 1).dataset;
  EXPECT_EQ(out.count(SplitTag::Train), 5u);
  const auto tp = out.count(SplitTag::Test, true), tn = out.count(SplitTag::Test, false);
  EXPECT_LE(tp > tn ? tp - tn : tn - tp, 1u);
}

TEST(Split, PartitionLawAndStratumShares) {
  const auto ds = build_task_dataset(medium(), TaskId::Task1, 2);
  const std::vector<double> r = {0.9, 0.1};
  const auto out = stratified_split(ds, r, 5).dataset;
  ASSERT_EQ(out.items, ds.items);
  EXPECT_EQ(out.count(SplitTag::Train) + out.count(SplitTag::Test), ds.items.size());
  std::map<std::pair<bool, std::string>, std::pair<double, double>> strata;
  for (std::size_t i = 0; i < out.items.size(); ++i) {
    auto& s = strata[{out.items[i].label, out.items[i].triple.relation}];
    s.first += 1;
    s.second += out.splits[i] == SplitTag::Test;
  }
  for (const auto& [k, v] : strata)
    if (v.first >= 2) {
      EXPECT_LE(std::abs(v.second - 0.1 * v.first), 1.0);
    }
}

TEST(Split, TinyStratumGoesToTrainWithWarning) {
  TaskDataset ds = labelled(1, 0);
  const std::vector<double> r = {0.9, 0.1};
  const auto out = stratified_split(ds, r, 1);
  EXPECT_EQ(out.dataset.splits[0], SplitTag::Train);
  EXPECT_FALSE(out.warnings.empty());
}

TEST(Scenarios, LadderFromLargeBase) {
  const auto sizes = ladder_train_sizes(55835, kDefaultRatioLadder);
  EXPECT_EQ(sizes, (std::vector<std::size_t>{55835, 49631, 43427, 37223, 31019, 24815, 18611, 12407, 6204, 3102}));
  EXPECT_EQ(scenario_train_size(55835, 0.5, kDefaultRatioLadder), 3102u);
}

TEST(Scenarios, PosNegDownsampling) {
  auto ds = labelled(1000, 1000);
  ds.splits.assign(ds.items.size(), SplitTag::Train);
  ScenarioSpec spec;
  spec.pos_neg_ratio = 0.125;
  const auto r = scenario_subset(ds, spec);
  EXPECT_EQ(r.train_negatives, 1000u);
  EXPECT_EQ(r.train_positives, 125u);
}

TEST(Scenarios, InfeasibleNamesBindingClass) {
  auto ds = labelled(100, 300);
  ds.splits.assign(ds.items.size(), SplitTag::Train);
  ScenarioSpec spec;
  try {
    scenario_subset(ds, spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("positive"), std::string::npos);
  }
}

TEST(Scenarios, BalanceSplitTrimsLargerClass) {
  auto ds = labelled(40, 30);
  ds.splits.assign(ds.items.size(), SplitTag::Train);
  const auto b = balance_split(ds, SplitTag::Train, 1);
  EXPECT_EQ(b.count(SplitTag::Train, true), 31u);
  EXPECT_EQ(b.count(SplitTag::Train, false), 30u);
}

TEST(Scenarios, TestPartUntouchedAndNested) {
  auto ds = labelled(600, 600);
  for (std::size_t i = 0; i < ds.items.size(); ++i) ds.splits[i] = i % 10 == 0 ? SplitTag::Test : SplitTag::Train;
  ScenarioSpec big, small;
  big.train_test_ratio = 7;
  small.train_test_ratio = 4;
  const auto a = scenario_subset(ds, big), b = scenario_subset(ds, small);
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    EXPECT_EQ(a.dataset.splits[i] == SplitTag::Test, ds.splits[i] == SplitTag::Test);
    if (b.dataset.splits[i] == SplitTag::Train) {
      EXPECT_EQ(a.dataset.splits[i], SplitTag::Train);
    }
  }
}

TEST(IclPool, SampleRules) {
  const auto kg = medium();
  const auto ds = build_task_dataset(kg, TaskId::Task1, 1);
  IclPoolOptions o;
  o.n_pos = o.n_neg = 20;
  const auto pool = sample_icl_pool(ds, kg, Tokenizer(), o, 4);
  ASSERT_EQ(pool.size(), 40u);
  std::set<Triple> distinct;
  for (const auto& item : pool) {
    EXPECT_EQ(item.triple.relation, "is a");
    distinct.insert(item.triple);
  }
  EXPECT_EQ(distinct.size(), 40u);
  o.max_tokens = 1;
  EXPECT_THROW(sample_icl_pool(ds, kg, Tokenizer(), o, 4), Error);
}

TEST(IclPool, SixItemsAllTaken) {
  const auto kg = graph_of({{"a", "is a", "b"}, {"c", "is a", "d"}, {"e", "is a", "f"}});
  TaskDataset ds = labelled(0, 0);
  for (const auto& t : kg.triples()) ds.items.push_back({t, true, Origin::Positive});
  for (const auto& t : kg.triples()) ds.items.push_back({{t.object, t.relation, t.subject}, false, Origin::FlippedNegative});
  ds.splits.assign(6, SplitTag::Test);
  IclPoolOptions o;
  o.n_pos = o.n_neg = 3;
  const auto pool = sample_icl_pool(ds, kg, Tokenizer(), o, 1);
  std::set<Triple> distinct;
  for (const auto& i : pool) distinct.insert(i.triple);
  EXPECT_EQ(distinct.size(), 6u);
}

TEST(DatasetIo, RoundTripAndBadRow) {
  const auto ds = stratified_split(build_task_dataset(medium(), TaskId::Task3, 1), std::vector<double>{0.9, 0.1}, 1)
                      .dataset;
  std::stringstream io;
  write_dataset(ds, io);
  const auto back = read_dataset(io, TaskId::Task3, ds.seed);
  EXPECT_EQ(back.items, ds.items);
  EXPECT_EQ(back.splits, ds.splits);

  std::istringstream bad("subject\trelation\tobject\tlabel\torigin\tsplit\nA\tis a\tB\t1\tpositive\ttrain\nA\tis a\tC\n");
  try {
    read_dataset(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}
