#include "kgcurate/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "kgcurate/common.hpp"

namespace kgc {

using nlohmann::json;

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::True: return "True";
    case Verdict::False: return "False";
    default: return "Unclassified";
  }
}

Verdict parse_verdict_name(std::string_view text) {
  if (text == "True") return Verdict::True;
  if (text == "False") return Verdict::False;
  if (text == "Unclassified") return Verdict::Unclassified;
  throw Error(ErrorKind::Parse, "unknown verdict: " + std::string(text));
}

namespace {

double ratio(std::size_t num, std::size_t den, bool* undefined) {
  if (den == 0) {
    if (undefined) *undefined = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

void fill_prf(EvalReport& r) {
  r.precision = ratio(r.tp, r.tp + r.fp, &r.precision_undefined);
  r.recall = ratio(r.tp, r.tp + r.fn, &r.recall_undefined);
  r.f1 = harmonic(r.precision, r.recall);
  const double np = ratio(r.tn, r.tn + r.fn, nullptr);
  const double nr = ratio(r.tn, r.tn + r.fp, nullptr);
  r.macro_precision = 0.5 * (r.precision + np);
  r.macro_recall = 0.5 * (r.recall + nr);
  r.macro_f1 = 0.5 * (r.f1 + harmonic(np, nr));
}

}  // namespace

EvalReport classification_report(std::span<const Label> predictions, std::span<const Label> truths) {
  if (predictions.size() != truths.size())
    throw Error(ErrorKind::InvalidArgument, "predictions and truths differ in length");
  if (predictions.empty()) throw Error(ErrorKind::InvalidArgument, "empty evaluation set");
  EvalReport r;
  r.n_total = truths.size();
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (predictions[i] && truths[i]) ++r.tp;
    else if (predictions[i]) ++r.fp;
    else if (truths[i]) ++r.fn;
    else ++r.tn;
  }
  r.accuracy = ratio(r.tp + r.tn, r.n_total, nullptr);
  fill_prf(r);
  return r;
}

EvalReport verdict_report(std::span<const Verdict> verdicts, std::span<const Label> truths) {
  if (verdicts.size() != truths.size()) throw Error(ErrorKind::InvalidArgument, "verdicts and truths differ in length");
  if (verdicts.empty()) throw Error(ErrorKind::InvalidArgument, "empty evaluation set");
  EvalReport r;
  r.n_total = truths.size();
  for (std::size_t i = 0; i < truths.size(); ++i) {
    switch (verdicts[i]) {
      case Verdict::Unclassified: ++r.n_unclassified; break;
      case Verdict::True: truths[i] ? ++r.tp : ++r.fp; break;
      case Verdict::False: truths[i] ? ++r.fn : ++r.tn; break;
    }
  }
  r.accuracy = ratio(r.tp + r.tn, r.n_total, nullptr);
  fill_prf(r);
  return r;
}

namespace {

template <typename Truth>
double auc_impl(std::span<const double> scores, Truth truth) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  // Twice the average rank, so tie groups stay integral.
  std::uint64_t pos = 0, rank_sum2 = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const std::uint64_t twice_avg = (i + 1) + j;
    for (std::size_t k = i; k < j; ++k)
      if (truth(order[k])) {
        ++pos;
        rank_sum2 += twice_avg;
      }
    i = j;
  }
  const std::uint64_t neg = n - pos;
  if (pos == 0 || neg == 0) throw Error(ErrorKind::InvalidArgument, "AUC needs both classes");
  const double u2 = static_cast<double>(rank_sum2) - static_cast<double>(pos * (pos + 1));
  return u2 / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const Label> truths) {
  if (scores.size() != truths.size()) throw Error(ErrorKind::InvalidArgument, "scores and truths differ in length");
  return auc_impl(scores, [&](std::size_t i) { return truths[i]; });
}

GroupedAuc roc_auc_by_relation(std::span<const double> scores, std::span<const Label> truths,
                               std::span<const std::string> relations) {
  if (scores.size() != truths.size() || scores.size() != relations.size())
    throw Error(ErrorKind::InvalidArgument, "scores, truths and relations differ in length");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < relations.size(); ++i) groups[relations[i]].push_back(i);
  GroupedAuc out;
  for (const auto& [rel, idx] : groups) {
    std::vector<double> s;
    std::vector<char> t;
    for (auto i : idx) {
      s.push_back(scores[i]);
      t.push_back(truths[i]);
    }
    const auto npos = static_cast<std::size_t>(std::count(t.begin(), t.end(), 1));
    if (npos == 0 || npos == t.size()) {
      out.warnings.push_back("relation '" + rel + "' lacks " + (npos ? "negatives" : "positives") +
                             "; AUC omitted");
      continue;
    }
    out.auc[rel] = auc_impl(s, [&](std::size_t i) { return t[i] != 0; });
  }
  return out;
}

std::string auc_tsv(const std::map<std::string, double>& auc) {
  std::ostringstream out;
  out << "relation\tauc\n";
  for (const auto& [rel, v] : auc) out << rel << '\t' << v << '\n';
  return out.str();
}

double fleiss_kappa(const std::vector<std::vector<std::size_t>>& ratings) {
  if (ratings.empty()) throw Error(ErrorKind::InvalidArgument, "kappa needs at least one item");
  const std::size_t k = ratings.front().size();
  const std::size_t n = std::accumulate(ratings.front().begin(), ratings.front().end(), std::size_t{0});
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "kappa needs at least 2 ratings per item");
  std::vector<double> p(k, 0.0);
  double p_bar = 0.0;
  for (const auto& row : ratings) {
    if (row.size() != k) throw Error(ErrorKind::InvalidArgument, "ragged rating matrix");
    const std::size_t sum = std::accumulate(row.begin(), row.end(), std::size_t{0});
    if (sum != n) throw Error(ErrorKind::InvalidArgument, "items have different numbers of ratings");
    double agree = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      p[j] += static_cast<double>(row[j]);
      agree += static_cast<double>(row[j]) * static_cast<double>(row[j] - (row[j] > 0 ? 1 : 0));
    }
    p_bar += agree / (static_cast<double>(n) * static_cast<double>(n - 1));
  }
  const double items = static_cast<double>(ratings.size());
  p_bar /= items;
  double p_e = 0.0;
  for (auto& pj : p) {
    pj /= items * static_cast<double>(n);
    p_e += pj * pj;
  }
  if (1.0 - p_e <= 1e-15) return 1.0;
  return (p_bar - p_e) / (1.0 - p_e);
}

std::vector<std::vector<std::size_t>> verdict_counts(const std::vector<std::vector<Verdict>>& table,
                                                     bool two_categories) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(table.size());
  for (const auto& row : table) {
    std::vector<std::size_t> c(two_categories ? 2 : 3, 0);
    for (auto v : row) {
      if (v == Verdict::True) ++c[0];
      else if (v == Verdict::False) ++c[1];
      else if (!two_categories) ++c[2];
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::string EvalReport::to_json() const {
  json j;
  j["accuracy"] = accuracy;
  j["precision"] = precision;
  j["recall"] = recall;
  j["f1"] = f1;
  j["macro_precision"] = macro_precision;
  j["macro_recall"] = macro_recall;
  j["macro_f1"] = macro_f1;
  j["n_total"] = n_total;
  j["n_unclassified"] = n_unclassified;
  j["confusion"] = {{"tp", tp}, {"fp", fp}, {"fn", fn}, {"tn", tn}};
  j["precision_undefined"] = precision_undefined;
  j["recall_undefined"] = recall_undefined;
  j["auc"] = auc ? json(*auc) : json(nullptr);
  j["kappa"] = kappa ? json(*kappa) : json(nullptr);
  j["per_relation_auc"] = json::object();
  for (const auto& [rel, v] : per_relation_auc) j["per_relation_auc"][rel] = v;
  return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json(const std::string& text) {
  EvalReport r;
  try {
    const auto j = json::parse(text);
    r.accuracy = j.at("accuracy").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.macro_precision = j.value("macro_precision", 0.0);
    r.macro_recall = j.value("macro_recall", 0.0);
    r.macro_f1 = j.value("macro_f1", 0.0);
    r.n_total = j.at("n_total").get<std::size_t>();
    r.n_unclassified = j.value("n_unclassified", std::size_t{0});
    if (j.contains("confusion")) {
      const auto& c = j["confusion"];
      r.tp = c.at("tp");
      r.fp = c.at("fp");
      r.fn = c.at("fn");
      r.tn = c.at("tn");
    }
    r.precision_undefined = j.value("precision_undefined", false);
    r.recall_undefined = j.value("recall_undefined", false);
    if (j.contains("auc") && !j["auc"].is_null()) r.auc = j["auc"].get<double>();
    if (j.contains("kappa") && !j["kappa"].is_null()) r.kappa = j["kappa"].get<double>();
    if (j.contains("per_relation_auc"))
      for (const auto& [rel, v] : j["per_relation_auc"].items()) r.per_relation_auc[rel] = v.get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("report JSON: ") + e.what());
  }
  return r;
}

}  // namespace kgc
