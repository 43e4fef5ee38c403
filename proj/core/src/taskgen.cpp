#include "kgcurate/taskgen.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include "kgcurate/common.hpp"
#include "kgcurate/tokenizer.hpp"

namespace kgc {

namespace {

using Index = KnowledgeGraph::Index;
using RelIndex = KnowledgeGraph::RelIndex;

std::uint64_t key_of(Index s, RelIndex r, Index o) {
  return (static_cast<std::uint64_t>(s) << 36) | (static_cast<std::uint64_t>(r) << 28) | o;
}

std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

}  // namespace

std::string_view to_string(TaskId t) {
  switch (t) {
    case TaskId::Task1: return "task1";
    case TaskId::Task2: return "task2";
    case TaskId::Task3: return "task3";
  }
  return "task1";
}

std::string_view to_string(Origin o) {
  switch (o) {
    case Origin::Positive: return "positive";
    case Origin::RandomNegative: return "random";
    case Origin::FlippedNegative: return "flipped";
    case Origin::SiblingNegative: return "sibling";
  }
  return "positive";
}

std::string_view to_string(SplitTag s) {
  switch (s) {
    case SplitTag::Train: return "train";
    case SplitTag::Validation: return "validation";
    case SplitTag::Test: return "test";
    case SplitTag::Unassigned: return "unassigned";
  }
  return "unassigned";
}

TaskId parse_task(std::string_view text) {
  if (text == "task1" || text == "1") return TaskId::Task1;
  if (text == "task2" || text == "2") return TaskId::Task2;
  if (text == "task3" || text == "3") return TaskId::Task3;
  throw Error(ErrorKind::InvalidArgument, "unknown task '" + std::string(text) + "'");
}

Origin parse_origin(std::string_view text) {
  for (auto o : {Origin::Positive, Origin::RandomNegative, Origin::FlippedNegative, Origin::SiblingNegative}) {
    if (to_string(o) == text) return o;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown origin '" + std::string(text) + "'");
}

SplitTag parse_split(std::string_view text) {
  for (auto s : {SplitTag::Train, SplitTag::Validation, SplitTag::Test, SplitTag::Unassigned}) {
    if (to_string(s) == text) return s;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown split '" + std::string(text) + "'");
}

std::vector<std::size_t> TaskDataset::indices(SplitTag tag) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (splits[i] == tag) out.push_back(i);
  }
  return out;
}

std::size_t TaskDataset::count(SplitTag tag, std::optional<bool> label) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (splits[i] == tag && (!label || items[i].label == *label)) ++n;
  }
  return n;
}

std::size_t TaskDataset::positives() const {
  return static_cast<std::size_t>(
      std::count_if(items.begin(), items.end(), [](const LabeledTriple& t) { return t.label; }));
}

std::vector<Triple> positives_for_task(const KnowledgeGraph& kg, TaskId task) {
  std::vector<Triple> out;
  out.reserve(kg.triple_count());
  for (const auto& t : kg.triples()) {
    if (task == TaskId::Task2 && t.relation == kIsTautomerOf) continue;
    out.push_back(t);
  }
  return out;
}

std::vector<Triple> gen_random_negatives(const KnowledgeGraph& kg, std::span<const Triple> positives,
                                         std::uint64_t seed, RandomNegativeOptions options) {
  return gen_random_negatives(kg, positives, positives.size(), seed, options);
}

std::vector<Triple> gen_random_negatives(const KnowledgeGraph& kg, std::span<const Triple> positives,
                                         std::size_t count, std::uint64_t seed,
                                         RandomNegativeOptions options) {
  if (count == 0) return {};
  const std::size_t n = kg.entity_count();
  if (n < 2) throw Error(ErrorKind::Generation, "random negatives need at least 2 entities");
  if (positives.empty()) throw Error(ErrorKind::Generation, "random negatives need a relation distribution");

  // Relation draw table: one slot per positive (empirical) or per label (uniform).
  std::vector<RelIndex> draw;
  std::map<RelIndex, std::size_t> weight;
  for (const auto& t : positives) {
    const auto r = kg.relation_index(t.relation);
    if (!r) throw Error(ErrorKind::Generation, "relation '" + t.relation + "' not in graph");
    ++weight[*r];
    if (!options.uniform_relations) draw.push_back(*r);
  }
  if (options.uniform_relations) {
    for (const auto& [r, w] : weight) draw.push_back(r);
  }

  // Candidate capacity per relation: ordered pairs s != o not already linked.
  std::map<RelIndex, std::size_t> capacity;
  const std::size_t pairs = n * (n - 1);
  for (const auto& [r, w] : weight) capacity[r] = pairs;
  for (const auto& e : kg.edges()) {
    if (auto it = capacity.find(e.relation); it != capacity.end() && e.subject != e.object) --it->second;
  }
  std::size_t total = 0;
  for (const auto& [r, c] : capacity) total += c;
  if (count > total) {
    throw Error(ErrorKind::Generation, "requested " + std::to_string(count) + " random negatives but only " +
                                           std::to_string(total) + " candidate triples exist (shortfall " +
                                           std::to_string(count - total) + ")");
  }

  std::unordered_set<std::uint64_t> produced;
  produced.reserve(count * 2);
  std::map<RelIndex, std::size_t> used;
  std::vector<Triple> out;
  out.reserve(count);
  constexpr std::size_t kMaxAttempts = 4096;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, i));
    bool done = false;
    for (std::size_t attempt = 0; attempt < kMaxAttempts && !done; ++attempt) {
      const RelIndex r = draw[rng.below(draw.size())];
      if (used[r] >= capacity[r]) continue;
      const auto s = static_cast<Index>(rng.below(n));
      auto o = static_cast<Index>(rng.below(n - 1));
      if (o >= s) ++o;
      if (kg.contains(s, r, o)) continue;
      if (!produced.insert(key_of(s, r, o)).second) continue;
      ++used[r];
      out.push_back({kg.entity_at(s).id, kg.relation_label(r), kg.entity_at(o).id});
      done = true;
    }
    if (done) continue;
    // Dense graphs: enumerate what is left and pick uniformly.
    std::vector<std::uint64_t> remaining;
    for (const auto& [r, c] : capacity) {
      if (used[r] >= c) continue;
      for (Index s = 0; s < n; ++s) {
        for (Index o = 0; o < n; ++o) {
          if (s == o || kg.contains(s, r, o)) continue;
          const auto k = key_of(s, r, o);
          if (!produced.contains(k)) remaining.push_back(k);
        }
      }
    }
    if (remaining.empty()) throw Error(ErrorKind::Generation, "random negative candidates exhausted");
    const auto k = remaining[rng.below(remaining.size())];
    produced.insert(k);
    const auto s = static_cast<Index>(k >> 36);
    const auto r = static_cast<RelIndex>((k >> 28) & 0xff);
    const auto o = static_cast<Index>(k & 0xfffffff);
    ++used[r];
    out.push_back({kg.entity_at(s).id, kg.relation_label(r), kg.entity_at(o).id});
  }
  return out;
}

DerivedNegatives gen_flipped_negatives(const KnowledgeGraph& kg, std::span<const Triple> positives) {
  DerivedNegatives out;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const auto& t = positives[i];
    Triple flipped{t.object, t.relation, t.subject};
    if (kg.contains(flipped)) continue;
    out.triples.push_back(std::move(flipped));
    out.source.push_back(i);
  }
  return out;
}

DerivedNegatives gen_sibling_negatives(const KnowledgeGraph& kg, std::span<const Triple> positives,
                                       std::uint64_t seed) {
  DerivedNegatives out;
  std::unordered_map<Index, std::vector<Index>> sibling_cache;
  std::unordered_set<std::uint64_t> produced;
  constexpr int kRejectionDraws = 32;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const auto& t = positives[i];
    const auto s = kg.index_of(t.subject);
    const auto o1 = kg.index_of(t.object);
    const auto r = kg.relation_index(t.relation);
    if (!s || !o1 || !r) throw Error(ErrorKind::Lookup, "positive triple does not resolve in graph");
    auto it = sibling_cache.find(*o1);
    if (it == sibling_cache.end()) it = sibling_cache.emplace(*o1, kg.sibling_indices(*o1)).first;
    const auto& sibs = it->second;
    if (sibs.empty()) continue;

    const auto valid = [&](Index c) {
      return c != *s && !kg.contains(*s, *r, c) && !produced.contains(key_of(*s, *r, c));
    };
    Rng rng(mix_seed(seed, i));
    std::optional<Index> pick;
    // Rejection draws are uniform over the valid set; the exhaustive fallback is too.
    for (int k = 0; k < kRejectionDraws && !pick; ++k) {
      const Index c = sibs[rng.below(sibs.size())];
      if (valid(c)) pick = c;
    }
    if (!pick) {
      std::vector<Index> candidates;
      for (Index c : sibs) {
        if (valid(c)) candidates.push_back(c);
      }
      if (candidates.empty()) continue;
      pick = candidates[rng.below(candidates.size())];
    }
    produced.insert(key_of(*s, *r, *pick));
    out.triples.push_back({t.subject, t.relation, kg.entity_at(*pick).id});
    out.source.push_back(i);
  }
  return out;
}

TaskDataset build_task_dataset(const KnowledgeGraph& kg, TaskId task, std::uint64_t seed,
                               RandomNegativeOptions options) {
  TaskDataset ds;
  ds.task = task;
  ds.seed = seed;
  const auto positives = positives_for_task(kg, task);
  std::vector<Triple> negatives;
  Origin origin = Origin::RandomNegative;
  switch (task) {
    case TaskId::Task1:
      negatives = gen_random_negatives(kg, positives, seed, options);
      break;
    case TaskId::Task2:
      negatives = gen_flipped_negatives(kg, positives).triples;
      origin = Origin::FlippedNegative;
      break;
    case TaskId::Task3:
      negatives = gen_sibling_negatives(kg, positives, seed).triples;
      origin = Origin::SiblingNegative;
      break;
  }
  ds.items.reserve(positives.size() + negatives.size());
  for (const auto& t : positives) ds.items.push_back({t, true, Origin::Positive});
  for (auto& t : negatives) ds.items.push_back({std::move(t), false, origin});
  ds.splits.assign(ds.items.size(), SplitTag::Unassigned);
  return ds;
}

namespace {

TaskDataset select(const TaskDataset& dataset, std::vector<std::size_t> keep) {
  std::sort(keep.begin(), keep.end());
  TaskDataset out;
  out.task = dataset.task;
  out.seed = dataset.seed;
  out.items.reserve(keep.size());
  out.splits.reserve(keep.size());
  for (auto i : keep) {
    out.items.push_back(dataset.items[i]);
    out.splits.push_back(dataset.splits[i]);
  }
  return out;
}

}  // namespace

TaskDataset balanced_subsample(const TaskDataset& dataset, std::size_t per_class, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < dataset.items.size(); ++i) (dataset.items[i].label ? pos : neg).push_back(i);
  Rng rng(mix_seed(seed, "balanced_subsample"));
  std::vector<std::size_t> keep;
  for (auto* group : {&pos, &neg}) {
    const auto k = std::min(per_class, group->size());
    for (auto j : rng.sample_indices(group->size(), k)) keep.push_back((*group)[j]);
  }
  return select(dataset, std::move(keep));
}

TaskDataset fraction_subsample(const TaskDataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw Error(ErrorKind::InvalidArgument, "subsample fraction must be in (0, 1]");
  std::map<std::pair<bool, std::string>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < dataset.items.size(); ++i)
    strata[{dataset.items[i].label, dataset.items[i].triple.relation}].push_back(i);
  std::vector<std::size_t> keep;
  for (const auto& [key, members] : strata) {
    Rng rng(mix_seed(mix_seed(seed, key.first ? 1u : 0u), key.second));
    const auto k = std::min(members.size(), round_half_up(fraction * static_cast<double>(members.size())));
    for (auto j : rng.sample_indices(members.size(), k)) keep.push_back(members[j]);
  }
  return select(dataset, std::move(keep));
}

SplitResult stratified_split(const TaskDataset& dataset, std::span<const double> ratios, std::uint64_t seed) {
  if (dataset.items.empty()) throw Error(ErrorKind::InvalidArgument, "cannot split an empty dataset");
  if (ratios.size() != 2 && ratios.size() != 3)
    throw Error(ErrorKind::InvalidArgument, "split needs 2 or 3 ratios");
  const double sum = std::accumulate(ratios.begin(), ratios.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::InvalidArgument, "split ratios must sum to 1");
  for (double r : ratios) {
    if (r < 0.0) throw Error(ErrorKind::InvalidArgument, "split ratios must be non-negative");
  }
  const std::vector<SplitTag> tags = ratios.size() == 2
                                         ? std::vector<SplitTag>{SplitTag::Train, SplitTag::Test}
                                         : std::vector<SplitTag>{SplitTag::Train, SplitTag::Validation, SplitTag::Test};

  SplitResult result;
  result.dataset = dataset;
  std::map<std::pair<bool, std::string>, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < dataset.items.size(); ++i)
    strata[{dataset.items[i].label, dataset.items[i].triple.relation}].push_back(i);

  // Leftover units go to the parts furthest behind their exact share so far,
  // so totals stay on target across strata.
  std::vector<double> deficit(ratios.size(), 0.0);
  for (auto& [key, members] : strata) {
    const std::size_t n = members.size();
    if (n < ratios.size()) {
      result.warnings.push_back("stratum (" + std::string(key.first ? "1" : "0") + ", " + key.second +
                                ") has " + std::to_string(n) + " item(s); assigned to train");
      for (auto i : members) result.dataset.splits[i] = SplitTag::Train;
      continue;
    }
    Rng rng(mix_seed(mix_seed(seed, key.first ? 1u : 0u), key.second));
    rng.shuffle(members);

    std::vector<std::size_t> counts(ratios.size());
    std::vector<std::pair<double, std::size_t>> priority;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < ratios.size(); ++k) {
      const double exact = ratios[k] * static_cast<double>(n);
      counts[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      assigned += counts[k];
      priority.emplace_back(exact - static_cast<double>(counts[k]) + deficit[k], k);
    }
    std::stable_sort(priority.begin(), priority.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first + 1e-9; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[priority[k % priority.size()].second];
    for (std::size_t k = 0; k < ratios.size(); ++k)
      deficit[k] += ratios[k] * static_cast<double>(n) - static_cast<double>(counts[k]);

    std::size_t pos = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      for (std::size_t c = 0; c < counts[k]; ++c) result.dataset.splits[members[pos++]] = tags[k];
    }
  }
  return result;
}

std::vector<ScenarioSpec> default_scenarios(std::uint64_t seed) {
  return {{9.0, 1.0, seed}, {7.0, 0.75, seed}, {4.0, 0.5, seed}, {1.0, 0.25, seed}, {0.5, 0.125, seed}};
}

std::vector<std::size_t> ladder_train_sizes(std::size_t base_train, std::span<const double> ladder) {
  std::vector<std::size_t> sizes;
  if (ladder.empty()) return sizes;
  sizes.push_back(base_train);
  for (std::size_t k = 1; k < ladder.size(); ++k) {
    if (!(ladder[k] > 0.0) || !(ladder[k] <= ladder[k - 1]))
      throw Error(ErrorKind::InvalidArgument, "ratio ladder must be positive and non-increasing");
    sizes.push_back(round_half_up(static_cast<double>(sizes.back()) * ladder[k] / ladder[k - 1]));
  }
  return sizes;
}

std::size_t scenario_train_size(std::size_t base_train, double target_ratio, std::span<const double> ladder) {
  if (!(target_ratio > 0.0)) throw Error(ErrorKind::InvalidArgument, "train:test ratio must be positive");
  if (ladder.empty()) throw Error(ErrorKind::InvalidArgument, "empty ratio ladder");
  if (target_ratio >= ladder.front()) return base_train;
  std::vector<double> path;
  for (double r : ladder) {
    if (r > target_ratio) path.push_back(r);
  }
  path.push_back(target_ratio);
  return ladder_train_sizes(base_train, path).back();
}

TaskDataset balance_split(const TaskDataset& dataset, SplitTag tag, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < dataset.items.size(); ++i)
    if (dataset.splits[i] == tag) (dataset.items[i].label ? pos : neg).push_back(i);
  auto& larger = pos.size() > neg.size() ? pos : neg;
  const auto target = std::min(pos.size(), neg.size()) + 1;
  TaskDataset out = dataset;
  if (larger.size() <= target) return out;
  Rng rng(mix_seed(seed, "balance_split"));
  rng.shuffle(larger);
  for (std::size_t k = target; k < larger.size(); ++k) out.splits[larger[k]] = SplitTag::Unassigned;
  return out;
}

ScenarioResult scenario_subset(const TaskDataset& split_dataset, const ScenarioSpec& spec,
                               std::span<const double> ladder) {
  if (!(spec.train_test_ratio > 0.0) || !(spec.pos_neg_ratio > 0.0))
    throw Error(ErrorKind::InvalidArgument, "scenario ratios must be strictly positive");

  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < split_dataset.items.size(); ++i) {
    if (split_dataset.splits[i] != SplitTag::Train) continue;
    (split_dataset.items[i].label ? pos : neg).push_back(i);
  }
  Rng rng(mix_seed(spec.seed, "scenario_order"));
  rng.shuffle(pos);
  rng.shuffle(neg);

  // Class-proportional interleave so every prefix keeps the class balance;
  // smaller scenarios are prefixes of larger ones.
  std::vector<std::size_t> order;
  order.reserve(pos.size() + neg.size());
  std::size_t cp = 0, cn = 0;
  while (cp < pos.size() || cn < neg.size()) {
    const bool take_pos = cn == neg.size() ||
                          (cp < pos.size() && (cp + 1) * neg.size() <= (cn + 1) * pos.size());
    order.push_back(take_pos ? pos[cp++] : neg[cn++]);
  }

  ScenarioResult result;
  result.train_size = scenario_train_size(order.size(), spec.train_test_ratio, ladder);
  std::vector<std::size_t> kept_pos, kept_neg;
  for (std::size_t k = 0; k < result.train_size; ++k) {
    const auto i = order[k];
    (split_dataset.items[i].label ? kept_pos : kept_neg).push_back(i);
  }

  const double wanted = spec.pos_neg_ratio * static_cast<double>(kept_neg.size());
  if (std::abs(static_cast<double>(kept_pos.size()) - wanted) > 1.0) {
    if (wanted > static_cast<double>(kept_pos.size())) {
      throw Error(ErrorKind::InvalidArgument,
                  "pos:neg ratio " + std::to_string(spec.pos_neg_ratio) + " needs " +
                      std::to_string(round_half_up(wanted)) + " positives but only " +
                      std::to_string(kept_pos.size()) + " are available (binding class: positive)");
    }
    // kept_pos is already a random order of positives; keep its prefix.
    kept_pos.resize(round_half_up(wanted));
  }

  result.dataset = split_dataset;
  for (std::size_t i = 0; i < result.dataset.splits.size(); ++i) {
    if (result.dataset.splits[i] == SplitTag::Train) result.dataset.splits[i] = SplitTag::Unassigned;
  }
  for (auto i : kept_pos) result.dataset.splits[i] = SplitTag::Train;
  for (auto i : kept_neg) result.dataset.splits[i] = SplitTag::Train;
  result.train_positives = kept_pos.size();
  result.train_negatives = kept_neg.size();
  result.final_train_size = kept_pos.size() + kept_neg.size();
  return result;
}

std::vector<LabeledTriple> sample_icl_pool(const TaskDataset& dataset, const KnowledgeGraph& kg,
                                           const Tokenizer& tokenizer, const IclPoolOptions& options,
                                           std::uint64_t seed) {
  const std::string relation = options.relation.empty() ? std::string() : normalize_relation(options.relation);
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < dataset.items.size(); ++i) {
    if (options.split && dataset.splits[i] != *options.split) continue;
    const auto& t = dataset.items[i].triple;
    if (!relation.empty() && t.relation != relation) continue;
    const std::size_t tokens = tokenizer.tokenize(kg.entity(t.subject).name).size() +
                               tokenizer.tokenize(t.relation).size() +
                               tokenizer.tokenize(kg.entity(t.object).name).size();
    if (tokens >= options.max_tokens) continue;
    (dataset.items[i].label ? pos : neg).push_back(i);
  }
  if (pos.size() < options.n_pos || neg.size() < options.n_neg) {
    throw Error(ErrorKind::InvalidArgument,
                "not enough qualifying items for the ICL pool: " + std::to_string(pos.size()) + " positive / " +
                    std::to_string(neg.size()) + " negative available, " + std::to_string(options.n_pos) +
                    " / " + std::to_string(options.n_neg) + " requested");
  }
  Rng rng(seed);
  std::vector<LabeledTriple> out;
  for (auto j : rng.sample_indices(pos.size(), options.n_pos)) out.push_back(dataset.items[pos[j]]);
  for (auto j : rng.sample_indices(neg.size(), options.n_neg)) out.push_back(dataset.items[neg[j]]);
  return out;
}

void write_dataset(const TaskDataset& dataset, std::ostream& out) {
  const auto check = [](const std::string& field) {
    if (field.find_first_of("\t\n\r") != std::string::npos)
      throw Error(ErrorKind::InvalidArgument, "field contains a tab or newline: " + field);
    return field;
  };
  out << "subject\trelation\tobject\tlabel\torigin\tsplit\n";
  for (std::size_t i = 0; i < dataset.items.size(); ++i) {
    const auto& item = dataset.items[i];
    out << check(item.triple.subject) << '\t' << check(item.triple.relation) << '\t'
        << check(item.triple.object) << '\t' << (item.label ? '1' : '0') << '\t' << to_string(item.origin)
        << '\t' << to_string(dataset.splits[i]) << '\n';
  }
}

TaskDataset read_dataset(std::istream& in, TaskId task, std::uint64_t seed) {
  TaskDataset ds;
  ds.task = task;
  ds.seed = seed;
  std::string line;
  std::size_t row = 0;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  ++row;
  if (trim(line) != "subject\trelation\tobject\tlabel\torigin\tsplit") throw ParseError(1, "unexpected header");
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 6)
      throw ParseError(row, "expected 6 columns, found " + std::to_string(cols.size()));
    LabeledTriple item;
    item.triple = {std::string(cols[0]), std::string(cols[1]), std::string(cols[2])};
    if (cols[3] == "1") item.label = true;
    else if (cols[3] == "0") item.label = false;
    else throw ParseError(row, "label must be 1 or 0");
    try {
      item.origin = parse_origin(cols[4]);
      ds.splits.push_back(parse_split(cols[5]));
    } catch (const Error& e) {
      throw ParseError(row, e.what());
    }
    if (item.label != (item.origin == Origin::Positive))
      throw ParseError(row, "label disagrees with origin");
    ds.items.push_back(std::move(item));
  }
  return ds;
}

}  // namespace kgc
