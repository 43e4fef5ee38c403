#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "json.hpp"
#include "kgcurate/classifier.hpp"
#include "kgcurate/common.hpp"

namespace kgc {

using nlohmann::json;

namespace {

struct Binned {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<std::uint8_t> codes;  // column-major, d x n
  std::vector<std::vector<float>> edges;

  std::uint8_t code(std::size_t f, std::size_t i) const { return codes[f * n + i]; }
};

float midpoint(float a, float b) {
  const auto m = static_cast<float>(0.5 * (static_cast<double>(a) + static_cast<double>(b)));
  return m < b ? m : a;
}

Binned bin_features(const FeatureMatrix& x, std::size_t max_bins) {
  Binned b;
  b.n = x.rows;
  b.d = x.cols;
  b.codes.resize(b.n * b.d);
  b.edges.resize(b.d);
  std::vector<float> col(b.n);
  std::vector<float> sorted;
  for (std::size_t f = 0; f < b.d; ++f) {
    for (std::size_t i = 0; i < b.n; ++i) col[i] = x.data[i * b.d + f];
    sorted = col;
    std::sort(sorted.begin(), sorted.end());
    auto& edges = b.edges[f];
    const auto unique_end = std::unique(sorted.begin(), sorted.end());
    const auto unique = static_cast<std::size_t>(unique_end - sorted.begin());
    if (unique <= max_bins) {
      for (std::size_t k = 1; k < unique; ++k) edges.push_back(midpoint(sorted[k - 1], sorted[k]));
    } else {
      sorted = col;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t k = 1; k < max_bins; ++k) {
        const std::size_t pos = k * b.n / max_bins;
        if (pos == 0 || sorted[pos - 1] == sorted[pos]) continue;
        const float e = midpoint(sorted[pos - 1], sorted[pos]);
        if (edges.empty() || e > edges.back()) edges.push_back(e);
      }
    }
    for (std::size_t i = 0; i < b.n; ++i)
      b.codes[f * b.n + i] =
          static_cast<std::uint8_t>(std::lower_bound(edges.begin(), edges.end(), col[i]) - edges.begin());
  }
  return b;
}

struct NodeStats {
  double w = 0.0;
  double wpos = 0.0;
  std::size_t count = 0;
};

// Weighted Gini impurity times weight: W * (1 - p^2 - q^2).
double weighted_gini(double w, double wpos) {
  if (w <= 0.0) return 0.0;
  const double wneg = w - wpos;
  return w - (wpos * wpos + wneg * wneg) / w;
}

struct Split {
  std::int32_t feature = -1;
  std::uint8_t bin = 0;
  double child_impurity = 0.0;
};

class Grower {
 public:
  Grower(const Binned& b, std::span<const Label> y, const double class_w[2], const Hyperparams& hp,
         std::size_t mtry, std::uint64_t seed, std::vector<double>& importance)
      : b_(b), y_(y), hp_(hp), mtry_(mtry), rng_(seed), importance_(importance), perm_(b.d) {
    w_[0] = class_w[0];
    w_[1] = class_w[1];
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  }

  Tree grow() {
    std::vector<std::uint32_t> idx(b_.n);
    if (hp_.bootstrap) {
      for (auto& i : idx) i = static_cast<std::uint32_t>(rng_.below(b_.n));
    } else {
      std::iota(idx.begin(), idx.end(), 0u);
    }
    struct Task {
      std::int32_t node;
      std::size_t begin, end, depth;
    };
    std::vector<Task> stack;
    stack.push_back({new_node(), 0, idx.size(), 0});
    while (!stack.empty()) {
      const auto task = stack.back();
      stack.pop_back();
      const std::span<std::uint32_t> range(idx.data() + task.begin, task.end - task.begin);
      const auto st = stats_of(range);
      tree_.value[task.node] = st.w > 0.0 ? static_cast<float>(st.wpos / st.w) : 0.0f;
      const bool pure = st.wpos <= 0.0 || st.wpos >= st.w;
      if (pure || (hp_.max_depth && task.depth >= *hp_.max_depth) || st.count < 2 * hp_.min_samples_leaf)
        continue;
      const double parent = weighted_gini(st.w, st.wpos);
      const auto split = best_split(range, st);
      if (split.feature < 0 || parent - split.child_impurity <= 1e-12 * st.w) continue;
      importance_[static_cast<std::size_t>(split.feature)] += parent - split.child_impurity;
      const auto f = static_cast<std::size_t>(split.feature);
      const auto mid = std::partition(range.begin(), range.end(),
                                      [&](std::uint32_t i) { return b_.code(f, i) <= split.bin; });
      const std::size_t cut = task.begin + static_cast<std::size_t>(mid - range.begin());
      tree_.feature[task.node] = split.feature;
      tree_.threshold[task.node] = b_.edges[f][split.bin];
      const auto l = new_node();
      const auto r = new_node();
      tree_.left[task.node] = l;
      tree_.right[task.node] = r;
      stack.push_back({r, cut, task.end, task.depth + 1});
      stack.push_back({l, task.begin, cut, task.depth + 1});
    }
    return std::move(tree_);
  }

 private:
  std::int32_t new_node() {
    tree_.feature.push_back(-1);
    tree_.threshold.push_back(0.0f);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    tree_.value.push_back(0.0f);
    return static_cast<std::int32_t>(tree_.feature.size() - 1);
  }

  NodeStats stats_of(std::span<const std::uint32_t> range) const {
    NodeStats s;
    for (auto i : range) {
      const double w = w_[y_[i] ? 1 : 0];
      s.w += w;
      if (y_[i]) s.wpos += w;
    }
    s.count = range.size();
    return s;
  }

  Split best_split(std::span<const std::uint32_t> range, const NodeStats& st) {
    Split best;
    best.child_impurity = weighted_gini(st.w, st.wpos);
    bool found = false;
    for (std::size_t k = 0; k < b_.d; ++k) {
      const auto j = k + static_cast<std::size_t>(rng_.below(b_.d - k));
      std::swap(perm_[k], perm_[j]);
      const auto f = perm_[k];
      if (!b_.edges[f].empty()) found |= evaluate(f, range, st, best);
      if (k + 1 >= mtry_ && found) break;
    }
    return best;
  }

  // Scans split points of feature f in bin order; updates `best` on strict improvement.
  bool evaluate(std::size_t f, std::span<const std::uint32_t> range, const NodeStats& st, Split& best) {
    const std::size_t nb = b_.edges[f].size() + 1;
    const std::size_t msl = hp_.min_samples_leaf;
    bool improved = false;
    double wl = 0.0, pl = 0.0;
    std::size_t cl = 0;
    const auto consider = [&](std::uint8_t bin) {
      if (cl < msl || st.count - cl < msl) return;
      const double imp = weighted_gini(wl, pl) + weighted_gini(st.w - wl, st.wpos - pl);
      if (imp < best.child_impurity) {
        best.child_impurity = imp;
        best.feature = static_cast<std::int32_t>(f);
        best.bin = bin;
        improved = true;
      }
    };
    if (range.size() * 4 < nb) {
      sorted_.clear();
      for (auto i : range) sorted_.emplace_back(b_.code(f, i), i);
      std::sort(sorted_.begin(), sorted_.end());
      for (std::size_t k = 0; k < sorted_.size();) {
        const auto code = sorted_[k].first;
        for (; k < sorted_.size() && sorted_[k].first == code; ++k) {
          const auto i = sorted_[k].second;
          const double w = w_[y_[i] ? 1 : 0];
          wl += w;
          if (y_[i]) pl += w;
          ++cl;
        }
        if (k < sorted_.size()) consider(code);
      }
      return improved;
    }
    std::fill_n(hist_w_, nb, 0.0);
    std::fill_n(hist_p_, nb, 0.0);
    std::fill_n(hist_c_, nb, std::size_t{0});
    const std::uint8_t* col = b_.codes.data() + f * b_.n;
    for (auto i : range) {
      const auto c = col[i];
      const double w = w_[y_[i] ? 1 : 0];
      hist_w_[c] += w;
      if (y_[i]) hist_p_[c] += w;
      ++hist_c_[c];
    }
    for (std::size_t bin = 0; bin + 1 < nb; ++bin) {
      if (hist_c_[bin] == 0) continue;
      wl += hist_w_[bin];
      pl += hist_p_[bin];
      cl += hist_c_[bin];
      if (cl == st.count) break;
      consider(static_cast<std::uint8_t>(bin));
    }
    return improved;
  }

  const Binned& b_;
  std::span<const Label> y_;
  const Hyperparams& hp_;
  std::size_t mtry_;
  Rng rng_;
  std::vector<double>& importance_;
  std::vector<std::size_t> perm_;
  double w_[2];
  Tree tree_;
  double hist_w_[256];
  double hist_p_[256];
  std::size_t hist_c_[256];
  std::vector<std::pair<std::uint8_t, std::uint32_t>> sorted_;
};

}  // namespace

bool Tree::vote(std::span<const float> x) const {
  std::int32_t node = 0;
  while (feature[node] >= 0) node = x[feature[node]] <= threshold[node] ? left[node] : right[node];
  return value[node] >= 0.5f;
}

std::string Hyperparams::label() const {
  std::string s = "trees=" + std::to_string(tree_count);
  s += " depth=" + (max_depth ? std::to_string(*max_depth) : std::string("none"));
  s += " leaf=" + std::to_string(min_samples_leaf);
  if (feature_subsample) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", *feature_subsample);
    s += std::string(" features=") + buf;
  } else {
    s += " features=sqrt";
  }
  return s;
}

TrainedEnsemble fit_forest(const FeatureMatrix& x, std::span<const Label> y, const Hyperparams& hp) {
  if (x.rows != y.size()) throw Error(ErrorKind::InvalidArgument, "feature rows and labels differ in length");
  if (x.rows < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 training items");
  if (x.cols == 0 || x.data.size() != x.rows * x.cols) throw Error(ErrorKind::InvalidArgument, "malformed feature matrix");
  if (hp.tree_count < 1) throw Error(ErrorKind::InvalidArgument, "tree_count must be >= 1");
  if (hp.min_samples_leaf < 1) throw Error(ErrorKind::InvalidArgument, "min_samples_leaf must be >= 1");
  if (hp.feature_subsample && !(*hp.feature_subsample > 0.0 && *hp.feature_subsample <= 1.0))
    throw Error(ErrorKind::InvalidArgument, "feature_subsample must be in (0, 1]");
  if (hp.max_bins < 2 || hp.max_bins > 256) throw Error(ErrorKind::InvalidArgument, "max_bins must be in [2, 256]");
  const auto npos = static_cast<std::size_t>(std::count_if(y.begin(), y.end(), [](Label v) { return v != 0; }));
  if (npos == 0 || npos == y.size()) throw Error(ErrorKind::InvalidArgument, "training labels contain a single class");
  for (float v : x.data)
    if (!std::isfinite(v)) throw Error(ErrorKind::Numeric, "non-finite feature value");

  const auto binned = bin_features(x, hp.max_bins);
  const double n = static_cast<double>(y.size());
  double class_w[2] = {1.0, 1.0};
  if (hp.class_weighting) {
    class_w[0] = n / (2.0 * static_cast<double>(y.size() - npos));
    class_w[1] = n / (2.0 * static_cast<double>(npos));
  }
  const std::size_t mtry =
      hp.feature_subsample
          ? std::max<std::size_t>(1, static_cast<std::size_t>(*hp.feature_subsample * static_cast<double>(x.cols)))
          : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(x.cols))));

  TrainedEnsemble model;
  model.hyperparams = hp;
  model.feature_count = x.cols;
  model.trees.resize(hp.tree_count);
  std::vector<std::vector<double>> imp(hp.tree_count, std::vector<double>(x.cols, 0.0));
  const auto grow = [&](std::size_t t) {
    Grower g(binned, y, class_w, hp, mtry, mix_seed(hp.seed, t), imp[t]);
    model.trees[t] = g.grow();
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(hp.threads, hp.tree_count));
  if (threads == 1) {
    for (std::size_t t = 0; t < hp.tree_count; ++t) grow(t);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < hp.tree_count; t += threads) grow(t);
      });
    for (auto& th : pool) th.join();
  }

  model.feature_importances.assign(x.cols, 0.0);
  for (const auto& ti : imp)
    for (std::size_t f = 0; f < x.cols; ++f) model.feature_importances[f] += ti[f];
  const double total = std::accumulate(model.feature_importances.begin(), model.feature_importances.end(), 0.0);
  for (auto& v : model.feature_importances)
    v = total > 0.0 ? v / total : 1.0 / static_cast<double>(x.cols);
  return model;
}

double predict_score(const TrainedEnsemble& model, std::span<const float> x) {
  if (x.size() != model.feature_count)
    throw Error(ErrorKind::InvalidArgument, "feature vector has dimension " + std::to_string(x.size()) +
                                                ", model expects " + std::to_string(model.feature_count));
  if (model.trees.empty()) throw Error(ErrorKind::InvalidArgument, "model has no trees");
  std::size_t votes = 0;
  for (const auto& t : model.trees) votes += t.vote(x) ? 1 : 0;
  return static_cast<double>(votes) / static_cast<double>(model.trees.size());
}

bool predict(const TrainedEnsemble& model, std::span<const float> x, double threshold) {
  return predict_score(model, x) >= threshold;
}

std::vector<double> predict_scores(const TrainedEnsemble& model, const FeatureMatrix& x) {
  std::vector<double> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) out[i] = predict_score(model, x.row(i));
  return out;
}

namespace {

json hyperparams_json(const Hyperparams& hp) {
  json j;
  j["tree_count"] = hp.tree_count;
  j["max_depth"] = hp.max_depth ? json(*hp.max_depth) : json(nullptr);
  j["min_samples_leaf"] = hp.min_samples_leaf;
  j["feature_subsample"] = hp.feature_subsample ? json(*hp.feature_subsample) : json("sqrt");
  j["bootstrap"] = hp.bootstrap;
  j["class_weighting"] = hp.class_weighting;
  j["max_bins"] = hp.max_bins;
  j["seed"] = hp.seed;
  return j;
}

Hyperparams hyperparams_from(const json& j) {
  Hyperparams hp;
  hp.tree_count = j.at("tree_count");
  if (!j.at("max_depth").is_null()) hp.max_depth = j["max_depth"].get<std::size_t>();
  hp.min_samples_leaf = j.at("min_samples_leaf");
  if (j.at("feature_subsample").is_number()) hp.feature_subsample = j["feature_subsample"].get<double>();
  hp.bootstrap = j.value("bootstrap", true);
  hp.class_weighting = j.value("class_weighting", false);
  hp.max_bins = j.value("max_bins", std::size_t{255});
  hp.seed = j.at("seed");
  return hp;
}

}  // namespace

std::string TrainedEnsemble::to_json() const {
  json j;
  j["format"] = "kgcurate-forest-1";
  j["hyperparams"] = hyperparams_json(hyperparams);
  j["feature_count"] = feature_count;
  j["dataset_hash"] = dataset_hash;
  j["feature_importances"] = feature_importances;
  j["trees"] = json::array();
  for (const auto& t : trees) {
    j["trees"].push_back(
        {{"feature", t.feature}, {"threshold", t.threshold}, {"left", t.left}, {"right", t.right}, {"value", t.value}});
  }
  return j.dump() + "\n";
}

TrainedEnsemble TrainedEnsemble::from_json(const std::string& text) {
  TrainedEnsemble m;
  try {
    const auto j = json::parse(text);
    if (j.at("format") != "kgcurate-forest-1") throw Error(ErrorKind::Parse, "unknown model format");
    m.hyperparams = hyperparams_from(j.at("hyperparams"));
    m.feature_count = j.at("feature_count");
    m.dataset_hash = j.value("dataset_hash", std::string());
    m.feature_importances = j.at("feature_importances").get<std::vector<double>>();
    for (const auto& tj : j.at("trees")) {
      Tree t;
      t.feature = tj.at("feature").get<std::vector<std::int32_t>>();
      t.threshold = tj.at("threshold").get<std::vector<float>>();
      t.left = tj.at("left").get<std::vector<std::int32_t>>();
      t.right = tj.at("right").get<std::vector<std::int32_t>>();
      t.value = tj.at("value").get<std::vector<float>>();
      const auto n = t.feature.size();
      if (n == 0 || t.threshold.size() != n || t.left.size() != n || t.right.size() != n || t.value.size() != n)
        throw Error(ErrorKind::Parse, "malformed tree");
      for (std::size_t k = 0; k < n; ++k) {
        if (t.feature[k] < 0) continue;
        if (static_cast<std::size_t>(t.feature[k]) >= m.feature_count || t.left[k] <= static_cast<std::int32_t>(k) ||
            t.right[k] <= static_cast<std::int32_t>(k) || static_cast<std::size_t>(t.left[k]) >= n ||
            static_cast<std::size_t>(t.right[k]) >= n)
          throw Error(ErrorKind::Parse, "malformed tree node");
      }
      m.trees.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("model JSON: ") + e.what());
  }
  return m;
}

}  // namespace kgc
