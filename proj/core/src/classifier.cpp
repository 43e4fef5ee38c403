#include "kgcurate/classifier.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "kgcurate/common.hpp"
#include "kgcurate/embedding.hpp"
#include "kgcurate/metrics.hpp"
#include "kgcurate/ontology.hpp"
#include "kgcurate/taskgen.hpp"

namespace kgc {

std::string_view to_string(Adaptation a) {
  switch (a) {
    case Adaptation::Naive: return "naive";
    case Adaptation::TaskOriented: return "task_oriented";
    default: return "none";
  }
}

Adaptation parse_adaptation(std::string_view text) {
  if (text == "none") return Adaptation::None;
  if (text == "naive") return Adaptation::Naive;
  if (text == "task_oriented") return Adaptation::TaskOriented;
  throw Error(ErrorKind::Config, "unknown adaptation: " + std::string(text));
}

TokenList TokenSelector::apply(const TokenList& tokens) const {
  switch (mode) {
    case Adaptation::Naive: return naive_filter(tokens);
    case Adaptation::TaskOriented: return apply_stop_tokens(tokens, stop);
    default: return tokens;
  }
}

NamedTriple named(const KnowledgeGraph& kg, const Triple& t) {
  return {kg.entity(t.subject).name, t.relation, kg.entity(t.object).name};
}

namespace {

void mean_into(const TokenList& tokens, const EmbeddingModel& emb, float* out) {
  const std::size_t d = emb.dimension();
  std::vector<double> acc(d, 0.0);
  for (const auto& t : tokens) {
    const auto v = emb.lookup(t);
    for (std::size_t k = 0; k < d; ++k) acc[k] += v[k];
  }
  const double n = tokens.empty() ? 1.0 : static_cast<double>(tokens.size());
  for (std::size_t k = 0; k < d; ++k) out[k] = static_cast<float>(acc[k] / n);
}

}  // namespace

FeatureVector vectorize_flat(const NamedTriple& triple, const EmbeddingModel& emb, const TokenSelector& selector,
                             const Tokenizer& tokenizer) {
  const std::size_t d = emb.dimension();
  FeatureVector out(3 * d);
  mean_into(selector.apply(tokenizer.tokenize(triple.subject)), emb, out.data());
  mean_into(selector.apply(tokenizer.tokenize(triple.relation)), emb, out.data() + d);
  mean_into(selector.apply(tokenizer.tokenize(triple.object)), emb, out.data() + 2 * d);
  return out;
}

FeatureSequence vectorize_sequence(const NamedTriple& triple, const EmbeddingModel& emb,
                                   const TokenSelector& selector, const Tokenizer& tokenizer) {
  FeatureSequence seq;
  const auto push = [&](const std::string& text) {
    for (const auto& t : selector.apply(tokenizer.tokenize(text))) {
      const auto v = emb.lookup(t);
      seq.steps.emplace_back(v.begin(), v.end());
    }
  };
  const auto sep = emb.lookup(kSeparatorToken);
  push(triple.subject);
  seq.separators[0] = seq.steps.size();
  seq.steps.emplace_back(sep.begin(), sep.end());
  push(triple.relation);
  seq.separators[1] = seq.steps.size();
  seq.steps.emplace_back(sep.begin(), sep.end());
  push(triple.object);
  return seq;
}

FeatureMatrix vectorize_dataset(const KnowledgeGraph& kg, std::span<const LabeledTriple> items,
                                const EmbeddingModel& emb, const TokenSelector& selector,
                                const Tokenizer& tokenizer) {
  const std::size_t d = emb.dimension();
  FeatureMatrix m;
  m.rows = items.size();
  m.cols = 3 * d;
  m.data.resize(m.rows * m.cols);
  std::unordered_map<std::string, std::vector<float>> cache;
  const auto block = [&](const std::string& text) -> const std::vector<float>& {
    auto it = cache.find(text);
    if (it == cache.end()) {
      std::vector<float> v(d);
      mean_into(selector.apply(tokenizer.tokenize(text)), emb, v.data());
      it = cache.emplace(text, std::move(v)).first;
    }
    return it->second;
  };
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto nt = named(kg, items[i].triple);
    float* row = m.data.data() + i * m.cols;
    std::copy_n(block(nt.subject).data(), d, row);
    std::copy_n(block(nt.relation).data(), d, row + d);
    std::copy_n(block(nt.object).data(), d, row + 2 * d);
  }
  return m;
}

std::vector<std::size_t> stratified_folds(std::span<const Label> y, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 folds");
  std::vector<std::size_t> fold(y.size());
  std::size_t offset = 0;
  for (const Label cls : {Label{1}, Label{0}}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i)
      if ((y[i] != 0) == (cls != 0)) idx.push_back(i);
    if (idx.size() < folds)
      throw Error(ErrorKind::InvalidArgument, std::string("too few ") + (cls ? "positives" : "negatives") +
                                                  " for " + std::to_string(folds) + " folds");
    Rng rng(mix_seed(seed, cls ? "folds+" : "folds-"));
    rng.shuffle(idx);
    // Continue the round robin across classes so fold sizes stay within one.
    for (std::size_t k = 0; k < idx.size(); ++k) fold[idx[k]] = (offset + k) % folds;
    offset = (offset + idx.size()) % folds;
  }
  return fold;
}

namespace {

FeatureMatrix take_rows(const FeatureMatrix& x, const std::vector<std::size_t>& rows) {
  FeatureMatrix out;
  out.rows = rows.size();
  out.cols = x.cols;
  out.data.resize(out.rows * out.cols);
  for (std::size_t k = 0; k < rows.size(); ++k) std::copy_n(x.row(rows[k]).data(), x.cols, out.data.data() + k * x.cols);
  return out;
}

bool better(const GridCell& a, const GridCell& b) {
  if (a.mean_f1 != b.mean_f1) return a.mean_f1 > b.mean_f1;
  if (a.hyperparams.tree_count != b.hyperparams.tree_count) return a.hyperparams.tree_count < b.hyperparams.tree_count;
  // Unlimited depth counts as deeper than any bound.
  const auto depth = [](const Hyperparams& h) { return h.max_depth.value_or(static_cast<std::size_t>(-1)); };
  return depth(a.hyperparams) < depth(b.hyperparams);
}

}  // namespace

GridSearchResult grid_search_cv(const FeatureMatrix& x, std::span<const Label> y, std::span<const Hyperparams> grid,
                                std::size_t folds, std::uint64_t seed) {
  if (grid.empty()) throw Error(ErrorKind::InvalidArgument, "empty hyperparameter grid");
  if (x.rows != y.size()) throw Error(ErrorKind::InvalidArgument, "feature rows and labels differ in length");
  const auto fold = stratified_folds(y, folds, seed);
  std::vector<FeatureMatrix> train_x(folds), val_x(folds);
  std::vector<std::vector<Label>> train_y(folds), val_y(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> tr, va;
    for (std::size_t i = 0; i < y.size(); ++i) (fold[i] == f ? va : tr).push_back(i);
    train_x[f] = take_rows(x, tr);
    val_x[f] = take_rows(x, va);
    for (auto i : tr) train_y[f].push_back(y[i]);
    for (auto i : va) val_y[f].push_back(y[i]);
  }
  GridSearchResult result;
  std::size_t best = 0;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    GridCell cell;
    cell.hyperparams = grid[c];
    for (std::size_t f = 0; f < folds; ++f) {
      const auto model = fit_forest(train_x[f], train_y[f], grid[c]);
      std::vector<Label> pred(val_y[f].size());
      for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = predict(model, val_x[f].row(i));
      const auto rep = classification_report(pred, val_y[f]);
      cell.fold_f1.push_back(rep.f1);
    }
    cell.mean_f1 = std::accumulate(cell.fold_f1.begin(), cell.fold_f1.end(), 0.0) / static_cast<double>(folds);
    result.cells.push_back(std::move(cell));
    if (c > 0 && better(result.cells[c], result.cells[best])) best = c;
  }
  result.best = result.cells[best].hyperparams;
  return result;
}

std::vector<Hyperparams> default_grid(std::uint64_t seed) {
  std::vector<Hyperparams> grid;
  for (std::size_t trees : {100, 300})
    for (std::optional<std::size_t> depth : {std::optional<std::size_t>{}, std::optional<std::size_t>{16}})
      for (std::size_t leaf : {1, 5})
        for (std::optional<double> feat : {std::optional<double>{}, std::optional<double>{1.0}}) {
          Hyperparams hp;
          hp.tree_count = trees;
          hp.max_depth = depth;
          hp.min_samples_leaf = leaf;
          hp.feature_subsample = feat;
          hp.seed = seed;
          grid.push_back(hp);
        }
  return grid;
}

ImportanceReport feature_importance_report(const TrainedEnsemble& model, std::size_t embedding_dim) {
  if (embedding_dim == 0 || model.feature_importances.size() != 3 * embedding_dim)
    throw Error(ErrorKind::InvalidArgument, "importances do not match 3 x embedding dimension");
  ImportanceReport r;
  r.per_dimension = model.feature_importances;
  const auto sum = [&](std::size_t block) {
    return std::accumulate(r.per_dimension.begin() + static_cast<std::ptrdiff_t>(block * embedding_dim),
                           r.per_dimension.begin() + static_cast<std::ptrdiff_t>((block + 1) * embedding_dim), 0.0);
  };
  r.subject = sum(0);
  r.relation = sum(1);
  r.object = sum(2);
  return r;
}

std::string ImportanceReport::to_tsv() const {
  std::ostringstream out;
  out.precision(17);
  out << "block\tdimension\timportance\n";
  const std::size_t d = per_dimension.size() / 3;
  static constexpr const char* kBlocks[] = {"subject", "relation", "object"};
  for (std::size_t i = 0; i < per_dimension.size(); ++i)
    out << kBlocks[i / d] << '\t' << i % d << '\t' << per_dimension[i] << '\n';
  return out.str();
}

}  // namespace kgc
