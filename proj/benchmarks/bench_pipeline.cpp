#include <benchmark/benchmark.h>

#include <map>

#include "kgcurate/adaptation.hpp"
#include "kgcurate/classifier.hpp"
#include "kgcurate/embedding.hpp"
#include "kgcurate/metrics.hpp"
#include "kgcurate/synthetic.hpp"
#include "kgcurate/taskgen.hpp"

using namespace kgc;

namespace {

const KnowledgeGraph& graph(std::size_t chemicals) {
  static std::map<std::size_t, KnowledgeGraph> cache;
  auto it = cache.find(chemicals);
  if (it == cache.end()) {
    SyntheticOptions o;
    o.chemicals = chemicals;
    o.classes = chemicals / 8;
    o.roles = chemicals / 30;
    it = cache.emplace(chemicals, synthetic_ontology(o)).first;
  }
  return it->second;
}

void BM_RandomNegatives(benchmark::State& state) {
  const auto& kg = graph(static_cast<std::size_t>(state.range(0)));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(gen_random_negatives(kg, kg.triples(), ++seed));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(kg.triple_count()));
}
BENCHMARK(BM_RandomNegatives)->Arg(500)->Arg(4000);

void BM_Vectorize(benchmark::State& state) {
  const auto& kg = graph(2000);
  const auto ds = build_task_dataset(kg, TaskId::Task1, 1);
  const auto emb = EmbeddingModel::random(300, 1);
  const TokenSelector sel{Adaptation::Naive, {}};
  for (auto _ : state) benchmark::DoNotOptimize(vectorize_dataset(kg, ds.items, emb, sel));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ds.items.size()));
}
BENCHMARK(BM_Vectorize)->Unit(benchmark::kMillisecond);

void BM_FitForest(benchmark::State& state) {
  const auto& kg = graph(2000);
  const auto ds = build_task_dataset(kg, TaskId::Task1, 1);
  const auto x = vectorize_dataset(kg, ds.items, EmbeddingModel::random(64, 1), TokenSelector{});
  std::vector<Label> y;
  for (const auto& it : ds.items) y.push_back(it.label ? 1 : 0);
  Hyperparams hp;
  hp.tree_count = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fit_forest(x, y, hp));
}
BENCHMARK(BM_FitForest)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_Dbscan(benchmark::State& state) {
  Rng rng(5);
  std::vector<std::vector<float>> pts(static_cast<std::size_t>(state.range(0)), std::vector<float>(32));
  for (auto& p : pts)
    for (auto& v : p) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto _ : state) benchmark::DoNotOptimize(dbscan(pts, 0.5, 4, DistanceMetric::Cosine));
}
BENCHMARK(BM_Dbscan)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_RocAuc(benchmark::State& state) {
  Rng rng(9);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> scores(n);
  std::vector<Label> truth(n);
  for (std::size_t i = 0; i < n; ++i) {
    truth[i] = i % 2;
    scores[i] = rng.uniform01() + 0.3 * truth[i];
  }
  for (auto _ : state) benchmark::DoNotOptimize(roc_auc(scores, truth));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
