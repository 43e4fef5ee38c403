#include "kgcurate/runner.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "json.hpp"
#include "kgcurate/common.hpp"
#include "kgcurate/embedding.hpp"
#include "kgcurate/metrics.hpp"
#include "kgcurate/ontology.hpp"

namespace kgc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kVersion = "0.1.0";

// ---- config (de)serialization ----

json hp_to_json(const Hyperparams& hp) {
  return {{"tree_count", hp.tree_count},
          {"max_depth", hp.max_depth ? json(*hp.max_depth) : json(nullptr)},
          {"min_samples_leaf", hp.min_samples_leaf},
          {"feature_subsample", hp.feature_subsample ? json(*hp.feature_subsample) : json("sqrt")},
          {"bootstrap", hp.bootstrap},
          {"class_weighting", hp.class_weighting},
          {"max_bins", hp.max_bins}};
}

Hyperparams hp_from_json(const json& j) {
  Hyperparams hp;
  hp.tree_count = j.value("tree_count", hp.tree_count);
  if (j.contains("max_depth") && !j["max_depth"].is_null()) hp.max_depth = j["max_depth"].get<std::size_t>();
  hp.min_samples_leaf = j.value("min_samples_leaf", hp.min_samples_leaf);
  if (j.contains("feature_subsample") && j["feature_subsample"].is_number())
    hp.feature_subsample = j["feature_subsample"].get<double>();
  hp.bootstrap = j.value("bootstrap", hp.bootstrap);
  hp.class_weighting = j.value("class_weighting", hp.class_weighting);
  hp.max_bins = j.value("max_bins", hp.max_bins);
  return hp;
}

json to_params_json(const TaskOrientedParams& p) {
  return {{"top_fraction", p.top_fraction},
          {"entities_per_iteration", p.entities_per_iteration},
          {"iterations", p.iterations},
          {"alpha", p.alpha},
          {"eps", p.eps ? json(*p.eps) : json(nullptr)},
          {"min_pts", p.min_pts},
          {"metric", std::string(to_string(p.metric))},
          {"pair_budget", p.pair_budget},
          {"eps_k", p.eps_k},
          {"eps_percentile", p.eps_percentile},
          {"alternative", p.alternative == stats::Alternative::TwoSided ? "two_sided"
                          : p.alternative == stats::Alternative::Less   ? "less"
                                                                        : "greater"}};
}

TaskOrientedParams params_from_json(const json& j) {
  TaskOrientedParams p;
  p.top_fraction = j.value("top_fraction", p.top_fraction);
  p.entities_per_iteration = j.value("entities_per_iteration", p.entities_per_iteration);
  p.iterations = j.value("iterations", p.iterations);
  p.alpha = j.value("alpha", p.alpha);
  if (j.contains("eps") && !j["eps"].is_null()) p.eps = j["eps"].get<double>();
  p.min_pts = j.value("min_pts", p.min_pts);
  const auto metric = j.value("metric", std::string("cosine"));
  if (metric != "cosine" && metric != "euclidean") throw Error(ErrorKind::Config, "unknown metric: " + metric);
  p.metric = metric == "cosine" ? DistanceMetric::Cosine : DistanceMetric::Euclidean;
  p.pair_budget = j.value("pair_budget", p.pair_budget);
  p.eps_k = j.value("eps_k", p.eps_k);
  p.eps_percentile = j.value("eps_percentile", p.eps_percentile);
  const auto alt = j.value("alternative", std::string("two_sided"));
  if (alt == "two_sided") p.alternative = stats::Alternative::TwoSided;
  else if (alt == "less") p.alternative = stats::Alternative::Less;
  else if (alt == "greater") p.alternative = stats::Alternative::Greater;
  else throw Error(ErrorKind::Config, "unknown alternative: " + alt);
  return p;
}

json tasks_json(const std::vector<TaskId>& tasks) {
  json a = json::array();
  for (auto t : tasks) a.push_back(static_cast<int>(t));
  return a;
}

std::vector<TaskId> tasks_from(const json& j) {
  std::vector<TaskId> out;
  for (const auto& t : j) {
    const int v = t.get<int>();
    if (v < 1 || v > 3) throw Error(ErrorKind::Config, "task must be 1, 2 or 3");
    out.push_back(static_cast<TaskId>(v));
  }
  return out;
}

json scenarios_json(const std::vector<ScenarioSpec>& s) {
  json a = json::array();
  for (const auto& x : s) a.push_back({{"train_test_ratio", x.train_test_ratio}, {"pos_neg_ratio", x.pos_neg_ratio}});
  return a;
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw Error(ErrorKind::Config, "unknown key '" + key + "' in " + std::string(where));
  }
}

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || path == "random" || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

// ---- artifacts ----

std::string task_name(TaskId t) { return "task" + std::to_string(static_cast<int>(t)); }

// Hash of the config fields a stage's outputs depend on.
std::string stage_hash(const ExperimentConfig& cfg, std::string_view stage) {
  static const std::map<std::string_view, std::vector<std::string>> keys = {
      {"ingest", {"ontology", "synthetic"}},
      {"gen", {"ontology", "synthetic", "tasks", "negatives", "subsample_per_class", "split", "token_pattern", "seed"}},
      {"train", {"ontology", "synthetic", "tasks", "negatives", "subsample_per_class", "split", "token_pattern", "seed",
                 "embeddings", "adaptations", "task_oriented", "classifier"}},
      {"simulate", {"ontology", "synthetic", "tasks", "negatives", "subsample_per_class", "split", "token_pattern",
                    "seed", "embeddings", "task_oriented", "classifier", "simulate"}},
      {"icl", {"ontology", "synthetic", "tasks", "negatives", "subsample_per_class", "split", "token_pattern", "seed",
               "icl"}},
  };
  const auto full = json::parse(cfg.canonical_json());
  auto it = keys.find(stage == "eval" || stage == "report" ? std::string_view("train") : stage);
  if (it == keys.end()) return cfg.hash();
  json sub = json::object();
  for (const auto& k : it->second) sub[k] = full.at(k);
  return hex64(fnv1a64(sub.dump()));
}

class Stage {
 public:
  Stage(const ExperimentConfig& cfg, std::string name) : cfg_(cfg), name_(std::move(name)) {
    fs::create_directories(dir());
  }

  fs::path dir() const { return fs::path(cfg_.out_dir) / name_; }

  void emit(const std::string& rel, std::string_view contents) {
    write_file((dir() / rel).string(), contents);
    outputs_[rel] = hex64(fnv1a64(contents));
  }

  void input(const std::string& stage, const json& manifest) { inputs_[stage] = manifest.at("outputs"); }

  json& extra() { return extra_; }

  CommandResult finish(std::string summary) {
    json m;
    m["command"] = name_;
    m["version"] = std::string(kVersion);
    m["config_hash"] = cfg_.hash();
    m["stage_hash"] = stage_hash(cfg_, name_);
    m["seed"] = cfg_.seed;
    m["stage_seed"] = stage_seed(cfg_, name_);
    m["inputs"] = inputs_;
    m["outputs"] = json::object();
    for (const auto& [k, v] : outputs_) m["outputs"][k] = v;
    m["details"] = extra_;
    m["created_at"] = static_cast<std::int64_t>(std::chrono::duration_cast<std::chrono::seconds>(
                                                    std::chrono::system_clock::now().time_since_epoch())
                                                    .count());
    write_file((dir() / "manifest.json").string(), m.dump(2) + "\n");
    CommandResult r;
    for (const auto& [k, v] : outputs_) r.outputs.push_back(name_ + "/" + k);
    r.outputs.push_back(name_ + "/manifest.json");
    r.summary = std::move(summary);
    return r;
  }

 private:
  const ExperimentConfig& cfg_;
  std::string name_;
  std::map<std::string, std::string> outputs_;
  json inputs_ = json::object();
  json extra_ = json::object();
};

json require_manifest(const ExperimentConfig& cfg, const std::string& stage) {
  const auto path = fs::path(cfg.out_dir) / stage / "manifest.json";
  if (!fs::exists(path))
    throw Error(ErrorKind::Prerequisite,
                "missing " + path.string() + "; run `kgcurate " + stage + "` first");
  const auto m = json::parse(read_file(path.string()));
  if (m.value("stage_hash", std::string()) != stage_hash(cfg, stage))
    throw Error(ErrorKind::Prerequisite, "artifacts in " + (fs::path(cfg.out_dir) / stage).string() +
                                             " were built from a different config; rerun `kgcurate " + stage + "`");
  return m;
}

KnowledgeGraph load_graph(const ExperimentConfig& cfg) {
  return parse_obo_file((fs::path(cfg.out_dir) / "ingest" / "graph.obo").string()).graph;
}

TaskDataset load_dataset(const ExperimentConfig& cfg, TaskId task) {
  std::ifstream in(fs::path(cfg.out_dir) / "gen" / (task_name(task) + ".tsv"));
  if (!in) throw Error(ErrorKind::Io, "cannot read dataset for " + task_name(task));
  return read_dataset(in, task, stage_seed(cfg, "gen"));
}

std::vector<Label> labels_of(const TaskDataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<Label> y;
  y.reserve(idx.size());
  for (auto i : idx) y.push_back(ds.items[i].label ? 1 : 0);
  return y;
}

std::vector<LabeledTriple> items_of(const TaskDataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<LabeledTriple> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(ds.items[i]);
  return out;
}

FeatureMatrix take(const FeatureMatrix& x, const std::vector<std::size_t>& rows) {
  FeatureMatrix out;
  out.rows = rows.size();
  out.cols = x.cols;
  out.data.resize(out.rows * out.cols);
  for (std::size_t k = 0; k < rows.size(); ++k) std::copy_n(x.row(rows[k]).data(), x.cols, out.data.data() + k * x.cols);
  return out;
}

const EmbeddingSpec& find_embedding(const ExperimentConfig& cfg, const std::string& name) {
  for (const auto& e : cfg.embeddings)
    if (e.name == name) return e;
  throw Error(ErrorKind::Config, "embedding '" + name + "' is not in the roster");
}

// Stop tokens computed from the training positives, or nullopt when the
// pass does not apply to this embedding.
std::optional<TaskOrientedResult> stop_tokens_for(const ExperimentConfig& cfg, const KnowledgeGraph& kg,
                                                  const TaskDataset& ds, const EmbeddingModel& emb,
                                                  const Tokenizer& tokenizer, std::uint64_t seed) {
  if (emb.kind() == EmbeddingKind::Random) return std::nullopt;
  std::vector<Triple> positives;
  for (auto i : ds.indices(SplitTag::Train))
    if (ds.items[i].label) positives.push_back(ds.items[i].triple);
  auto params = cfg.task_oriented;
  params.threads = cfg.threads;
  return task_oriented_stopwords(kg, positives, emb, tokenizer, params, seed);
}

std::string fmt_num(double v, int precision = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

std::string model_key(TaskId task, const std::string& emb, Adaptation a) {
  return task_name(task) + "/" + emb + "/" + std::string(to_string(a));
}

}  // namespace

std::string ExperimentConfig::canonical_json() const {
  json j;
  j["ontology"] = ontology;
  j["synthetic"] = {{"chemicals", synthetic.chemicals},       {"classes", synthetic.classes},
                    {"roles", synthetic.roles},               {"obsolete_terms", synthetic.obsolete_terms},
                    {"conjugate_pairs", synthetic.conjugate_pairs}, {"seed", synthetic.seed}};
  j["tasks"] = tasks_json(tasks);
  j["negatives"] = {{"uniform_relations", negatives.uniform_relations}};
  j["subsample_per_class"] = subsample_per_class ? json(*subsample_per_class) : json(nullptr);
  j["split"] = split;
  j["embeddings"] = json::array();
  for (const auto& e : embeddings)
    j["embeddings"].push_back({{"name", e.name}, {"path", e.path}, {"dimension", e.dimension}});
  j["adaptations"] = json::array();
  for (auto a : adaptations) j["adaptations"].push_back(std::string(to_string(a)));
  j["token_pattern"] = token_pattern;
  j["task_oriented"] = to_params_json(task_oriented);
  json grid_j = json::array();
  for (const auto& hp : grid) grid_j.push_back(hp_to_json(hp));
  j["classifier"] = {{"grid_search", grid_search}, {"folds", cv_folds}, {"grid", grid_j},
                     {"hyperparams", hp_to_json(hyperparams)}};
  j["simulate"] = {{"task", static_cast<int>(simulate.task)},
                   {"embedding", simulate.embedding},
                   {"adaptation", std::string(to_string(simulate.adaptation))},
                   {"scenarios", scenarios_json(simulate.scenarios)},
                   {"repeats", simulate.repeats},
                   {"enabled", simulate.enabled}};
  json variants = json::array();
  for (auto v : icl.variants) variants.push_back(std::string(to_string(v)));
  j["icl"] = {{"tasks", tasks_json(icl.tasks)},
              {"variants", variants},
              {"repeats", icl.repeats},
              {"pool",
               {{"n_pos", icl.pool.n_pos},
                {"n_neg", icl.pool.n_neg},
                {"relation", icl.pool.relation},
                {"max_tokens", icl.pool.max_tokens}}},
              {"endpoint",
               {{"url", icl.endpoint.url},
                {"path", icl.endpoint.path},
                {"model", icl.endpoint.model},
                {"temperature", icl.endpoint.temperature},
                {"max_tokens", icl.endpoint.max_tokens}}}};
  j["seed"] = seed;
  return j.dump();
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a64(canonical_json())); }

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
  ExperimentConfig cfg;
  try {
    const auto j = json::parse(text);
    check_keys(j,
               {"ontology", "synthetic", "tasks", "negatives", "subsample_per_class", "split", "embeddings",
                "adaptations", "token_pattern", "task_oriented", "classifier", "simulate", "icl", "seed", "out",
                "threads"},
               "config");
    if (j.contains("ontology") && !j["ontology"].is_null()) cfg.ontology = resolve(j["ontology"], base_dir);
    if (j.contains("synthetic")) {
      const auto& s = j["synthetic"];
      check_keys(s, {"chemicals", "classes", "roles", "obsolete_terms", "conjugate_pairs", "seed"}, "synthetic");
      cfg.synthetic.chemicals = s.value("chemicals", cfg.synthetic.chemicals);
      cfg.synthetic.classes = s.value("classes", cfg.synthetic.classes);
      cfg.synthetic.roles = s.value("roles", cfg.synthetic.roles);
      cfg.synthetic.obsolete_terms = s.value("obsolete_terms", cfg.synthetic.obsolete_terms);
      cfg.synthetic.conjugate_pairs = s.value("conjugate_pairs", cfg.synthetic.conjugate_pairs);
      cfg.synthetic.seed = s.value("seed", cfg.synthetic.seed);
    }
    if (j.contains("tasks")) cfg.tasks = tasks_from(j["tasks"]);
    if (j.contains("negatives")) cfg.negatives.uniform_relations = j["negatives"].value("uniform_relations", false);
    if (j.contains("subsample_per_class") && !j["subsample_per_class"].is_null())
      cfg.subsample_per_class = j["subsample_per_class"].get<std::size_t>();
    if (j.contains("split")) cfg.split = j["split"].get<std::vector<double>>();
    if (j.contains("embeddings")) {
      cfg.embeddings.clear();
      for (const auto& e : j["embeddings"]) {
        EmbeddingSpec spec;
        spec.name = e.at("name").get<std::string>();
        spec.path = resolve(e.value("path", std::string("random")), base_dir);
        spec.dimension = e.value("dimension", spec.dimension);
        cfg.embeddings.push_back(spec);
      }
    }
    if (j.contains("adaptations")) {
      cfg.adaptations.clear();
      for (const auto& a : j["adaptations"]) cfg.adaptations.push_back(parse_adaptation(a.get<std::string>()));
    }
    cfg.token_pattern = j.value("token_pattern", cfg.token_pattern);
    if (j.contains("task_oriented")) cfg.task_oriented = params_from_json(j["task_oriented"]);
    if (j.contains("classifier")) {
      const auto& c = j["classifier"];
      check_keys(c, {"grid_search", "folds", "grid", "hyperparams"}, "classifier");
      cfg.grid_search = c.value("grid_search", cfg.grid_search);
      cfg.cv_folds = c.value("folds", cfg.cv_folds);
      if (c.contains("grid"))
        for (const auto& g : c["grid"]) cfg.grid.push_back(hp_from_json(g));
      if (c.contains("hyperparams")) cfg.hyperparams = hp_from_json(c["hyperparams"]);
    }
    if (j.contains("simulate")) {
      const auto& s = j["simulate"];
      check_keys(s, {"task", "embedding", "adaptation", "scenarios", "repeats", "enabled"}, "simulate");
      if (s.contains("task")) cfg.simulate.task = tasks_from(json::array({s["task"]})).front();
      cfg.simulate.embedding = s.value("embedding", cfg.simulate.embedding);
      if (s.contains("adaptation")) cfg.simulate.adaptation = parse_adaptation(s["adaptation"].get<std::string>());
      if (s.contains("scenarios"))
        for (const auto& x : s["scenarios"])
          cfg.simulate.scenarios.push_back({x.at("train_test_ratio").get<double>(), x.at("pos_neg_ratio").get<double>(), 0});
      cfg.simulate.repeats = s.value("repeats", cfg.simulate.repeats);
      cfg.simulate.enabled = s.value("enabled", cfg.simulate.enabled);
    }
    if (j.contains("icl")) {
      const auto& s = j["icl"];
      check_keys(s, {"tasks", "variants", "repeats", "pool", "endpoint"}, "icl");
      if (s.contains("tasks")) cfg.icl.tasks = tasks_from(s["tasks"]);
      if (s.contains("variants")) {
        cfg.icl.variants.clear();
        for (const auto& v : s["variants"]) cfg.icl.variants.push_back(parse_variant(v.get<std::string>()));
      }
      cfg.icl.repeats = s.value("repeats", cfg.icl.repeats);
      if (s.contains("pool")) {
        const auto& p = s["pool"];
        cfg.icl.pool.n_pos = p.value("n_pos", cfg.icl.pool.n_pos);
        cfg.icl.pool.n_neg = p.value("n_neg", cfg.icl.pool.n_neg);
        cfg.icl.pool.relation = p.value("relation", cfg.icl.pool.relation);
        cfg.icl.pool.max_tokens = p.value("max_tokens", cfg.icl.pool.max_tokens);
      }
      if (s.contains("endpoint")) {
        const auto& e = s["endpoint"];
        auto& ep = cfg.icl.endpoint;
        ep.url = e.value("url", ep.url);
        ep.path = e.value("path", ep.path);
        ep.model = e.value("model", ep.model);
        ep.temperature = e.value("temperature", ep.temperature);
        ep.max_tokens = e.value("max_tokens", ep.max_tokens);
        ep.api_key_env = e.value("api_key_env", ep.api_key_env);
        ep.max_retries = e.value("max_retries", ep.max_retries);
        ep.backoff_initial_ms = e.value("backoff_initial_ms", ep.backoff_initial_ms);
        ep.backoff_max_ms = e.value("backoff_max_ms", ep.backoff_max_ms);
        ep.timeout_s = e.value("timeout_s", ep.timeout_s);
        ep.requests_per_minute = e.value("requests_per_minute", ep.requests_per_minute);
        ep.concurrency = e.value("concurrency", ep.concurrency);
      }
    }
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("out")) cfg.out_dir = resolve(j["out"].get<std::string>(), base_dir);
    cfg.threads = j.value("threads", cfg.threads);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("config: ") + e.what());
  }
  if (cfg.split.size() != 2 && cfg.split.size() != 3) throw Error(ErrorKind::Config, "split needs 2 or 3 ratios");
  if (cfg.embeddings.empty()) throw Error(ErrorKind::Config, "embedding roster is empty");
  for (const auto& e : cfg.embeddings)
    if (e.path != "random" && !fs::exists(e.path))
      throw Error(ErrorKind::Config, "embedding file not found: " + e.path);
  if (!cfg.ontology.empty() && !fs::exists(cfg.ontology))
    throw Error(ErrorKind::Config, "ontology file not found: " + cfg.ontology);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  return parse_config(read_file(path), fs::path(path).parent_path().string());
}

std::uint64_t stage_seed(const ExperimentConfig& cfg, std::string_view stage) { return mix_seed(cfg.seed, stage); }

EmbeddingModel load_embedding(const ExperimentConfig& cfg, const EmbeddingSpec& spec) {
  if (spec.path == "random") return EmbeddingModel::random(spec.dimension, mix_seed(cfg.seed, "embedding:" + spec.name));
  return load_text_vectors_file(spec.path, spec.dimension, mix_seed(cfg.seed, "oov:" + spec.name)).model;
}

CommandResult cmd_ingest(const ExperimentConfig& cfg) {
  Stage stage(cfg, "ingest");
  OboParseResult parsed;
  if (cfg.ontology.empty()) {
    std::istringstream in(synthetic_obo(cfg.synthetic));
    parsed = parse_obo(in);
  } else {
    parsed = parse_obo_file(cfg.ontology);
  }
  const auto before = parsed.graph.triple_count();
  const auto kg = remove_relation(parsed.graph, kIsConjugateAcidOf);
  std::ostringstream obo;
  write_obo(kg, obo);
  stage.emit("graph.obo", obo.str());
  const auto st = graph_stats(kg);
  json s;
  s["entities"] = st.entity_count;
  s["triples"] = st.triple_count;
  s["removed_inverse_triples"] = before - kg.triple_count();
  s["obsolete_terms"] = parsed.obsolete_terms;
  s["per_relation"] = st.per_relation;
  s["per_sub_ontology"] = json::object();
  for (const auto& [k, v] : st.per_sub_ontology) s["per_sub_ontology"][std::string(to_string(k))] = v;
  stage.emit("stats.json", s.dump(2) + "\n");
  std::string warnings;
  for (const auto& w : parsed.warnings) warnings += w + "\n";
  stage.emit("warnings.txt", warnings);
  return stage.finish(std::to_string(st.entity_count) + " entities, " + std::to_string(st.triple_count) +
                      " triples (" + std::to_string(before - kg.triple_count()) + " inverse triples removed)\n");
}

CommandResult cmd_gen(const ExperimentConfig& cfg) {
  const auto ingest = require_manifest(cfg, "ingest");
  Stage stage(cfg, "gen");
  stage.input("ingest", ingest);
  const auto kg = load_graph(cfg);
  const Tokenizer tokenizer(cfg.token_pattern);
  const auto seed = stage_seed(cfg, "gen");
  std::string summary;
  for (auto task : cfg.tasks) {
    const auto name = task_name(task);
    const auto tseed = mix_seed(seed, name);
    auto ds = build_task_dataset(kg, task, tseed, cfg.negatives);
    const auto full_pos = ds.positives();
    const auto full_neg = ds.negatives();
    if (cfg.subsample_per_class) ds = balanced_subsample(ds, *cfg.subsample_per_class, mix_seed(tseed, "subsample"));
    auto split = stratified_split(ds, cfg.split, mix_seed(tseed, "split"));
    std::ostringstream tsv;
    write_dataset(split.dataset, tsv);
    stage.emit(name + ".tsv", tsv.str());

    json s;
    s["task"] = static_cast<int>(task);
    s["positives_full"] = full_pos;
    s["negatives_full"] = full_neg;
    s["positives"] = split.dataset.positives();
    s["negatives"] = split.dataset.negatives();
    for (auto tag : {SplitTag::Train, SplitTag::Validation, SplitTag::Test}) {
      s["splits"][std::string(to_string(tag))] = {{"positives", split.dataset.count(tag, true)},
                                                  {"negatives", split.dataset.count(tag, false)}};
    }
    std::map<std::string, std::size_t> per_relation;
    for (const auto& item : split.dataset.items)
      if (item.label) ++per_relation[item.triple.relation];
    s["positives_per_relation"] = per_relation;
    s["warnings"] = split.warnings;
    stage.emit(name + "_stats.json", s.dump(2) + "\n");

    const auto positives = positives_for_task(kg, task);
    stage.emit(name + "_tokens_heads.tsv",
               token_frequency_report(kg, positives, TokenPopulation::Heads, tokenizer).to_tsv());
    stage.emit(name + "_tokens_tails.tsv",
               token_frequency_report(kg, positives, TokenPopulation::Tails, tokenizer).to_tsv());
    summary += name + ": " + std::to_string(full_pos) + " positives, " + std::to_string(full_neg) + " negatives";
    if (cfg.subsample_per_class) summary += " (subsampled to " + std::to_string(split.dataset.items.size()) + ")";
    summary += "\n";
  }
  return stage.finish(summary);
}

CommandResult cmd_train(const ExperimentConfig& cfg) {
  const auto gen = require_manifest(cfg, "gen");
  Stage stage(cfg, "train");
  stage.input("gen", gen);
  const auto kg = load_graph(cfg);
  const Tokenizer tokenizer(cfg.token_pattern);
  const auto seed = stage_seed(cfg, "train");
  std::string summary;
  json skipped = json::array();
  for (const auto& espec : cfg.embeddings) {
    const auto emb = load_embedding(cfg, espec);
    for (auto task : cfg.tasks) {
      const auto ds = load_dataset(cfg, task);
      const auto dataset_hash = gen.at("outputs").at(task_name(task) + ".tsv").get<std::string>();
      {
        std::vector<Triple> positives;
        for (const auto& item : ds.items)
          if (item.label) positives.push_back(item.triple);
        const auto freq = token_frequency_report(kg, positives, TokenPopulation::Both, tokenizer);
        const auto oov = oov_stats(emb, freq);
        std::ostringstream o;
        o << "distinct_tokens\toov_tokens\toov_fraction\n"
          << oov.distinct_tokens << '\t' << oov.oov_tokens << '\t' << fmt_num(oov.fraction, 6) << '\n';
        stage.emit("oov_" + espec.name + "_" + task_name(task) + ".tsv", o.str());
      }
      const auto train_idx = ds.indices(SplitTag::Train);
      const auto y = labels_of(ds, train_idx);
      const auto items = items_of(ds, train_idx);
      for (auto adaptation : cfg.adaptations) {
        const auto key = model_key(task, espec.name, adaptation);
        const auto kseed = mix_seed(seed, key);
        TokenSelector selector;
        selector.mode = adaptation;
        if (adaptation == Adaptation::TaskOriented) {
          auto result = stop_tokens_for(cfg, kg, ds, emb, tokenizer, mix_seed(kseed, "stop"));
          if (!result) {
            skipped.push_back(key);
            continue;
          }
          selector.stop = result->stop;
          stage.emit(key + "/stop_tokens.json", result->stop.to_json());
          json c = json::array();
          for (const auto& ct : result->clusters)
            c.push_back({{"tokens", ct.tokens},
                         {"with_cluster", ct.with_cluster},
                         {"without_cluster", ct.without_cluster},
                         {"p_value", ct.p_value ? json(*ct.p_value) : json(nullptr)},
                         {"selected", ct.selected}});
          stage.emit(key + "/clusters.json",
                     json({{"eps", result->eps}, {"noise", result->noise_tokens}, {"clusters", c}}).dump(2) + "\n");
        }
        const auto x = vectorize_dataset(kg, items, emb, selector, tokenizer);
        Hyperparams hp = cfg.hyperparams;
        hp.seed = mix_seed(kseed, "forest");
        hp.threads = cfg.threads;
        if (cfg.grid_search) {
          auto grid = cfg.grid.empty() ? default_grid(hp.seed) : cfg.grid;
          for (auto& g : grid) {
            g.seed = hp.seed;
            g.threads = cfg.threads;
          }
          const auto gs = grid_search_cv(x, y, grid, cfg.cv_folds, mix_seed(kseed, "folds"));
          std::ostringstream cv;
          cv << "cell\thyperparams\tmean_f1\tfold_f1\n";
          for (std::size_t c = 0; c < gs.cells.size(); ++c) {
            cv << c << '\t' << gs.cells[c].hyperparams.label() << '\t' << fmt_num(gs.cells[c].mean_f1, 6) << '\t';
            for (std::size_t f = 0; f < gs.cells[c].fold_f1.size(); ++f)
              cv << (f ? "," : "") << fmt_num(gs.cells[c].fold_f1[f], 6);
            cv << '\n';
          }
          stage.emit(key + "/cv.tsv", cv.str());
          hp = gs.best;
        }
        auto model = fit_forest(x, y, hp);
        model.dataset_hash = dataset_hash;
        stage.emit(key + "/model.json", model.to_json());
        stage.emit(key + "/importance.tsv", feature_importance_report(model, emb.dimension()).to_tsv());
        summary += key + ": " + hp.label() + "\n";
      }
    }
  }
  stage.extra()["skipped"] = skipped;
  for (const auto& s : skipped) summary += s.get<std::string>() + ": skipped (random embedding)\n";
  return stage.finish(summary);
}

CommandResult cmd_eval(const ExperimentConfig& cfg) {
  const auto gen = require_manifest(cfg, "gen");
  const auto train = require_manifest(cfg, "train");
  Stage stage(cfg, "eval");
  stage.input("gen", gen);
  stage.input("train", train);
  const auto kg = load_graph(cfg);
  const Tokenizer tokenizer(cfg.token_pattern);
  const fs::path train_dir = fs::path(cfg.out_dir) / "train";
  std::string summary;
  for (const auto& espec : cfg.embeddings) {
    const auto emb = load_embedding(cfg, espec);
    for (auto task : cfg.tasks) {
      const auto ds = load_dataset(cfg, task);
      const auto test_idx = ds.indices(SplitTag::Test);
      const auto y = labels_of(ds, test_idx);
      const auto items = items_of(ds, test_idx);
      for (auto adaptation : cfg.adaptations) {
        const auto key = model_key(task, espec.name, adaptation);
        const auto model_path = train_dir / key / "model.json";
        if (!fs::exists(model_path)) continue;  // skipped in training
        const auto model = TrainedEnsemble::from_json(read_file(model_path.string()));
        TokenSelector selector;
        selector.mode = adaptation;
        if (adaptation == Adaptation::TaskOriented)
          selector.stop = StopTokenSet::from_json(read_file((train_dir / key / "stop_tokens.json").string()));
        const auto x = vectorize_dataset(kg, items, emb, selector, tokenizer);
        const auto scores = predict_scores(model, x);
        std::vector<Label> pred(scores.size());
        for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] >= 0.5 ? 1 : 0;
        auto report = classification_report(pred, y);
        std::vector<std::string> relations;
        for (const auto& it : items) relations.push_back(it.triple.relation);
        try {
          report.auc = roc_auc(scores, y);
        } catch (const Error&) {
        }
        const auto grouped = roc_auc_by_relation(scores, y, relations);
        report.per_relation_auc = grouped.auc;
        auto rj = json::parse(report.to_json());
        rj["dataset_hash"] = model.dataset_hash;
        rj["task"] = static_cast<int>(task);
        rj["embedding"] = espec.name;
        rj["adaptation"] = std::string(to_string(adaptation));
        rj["warnings"] = grouped.warnings;
        stage.emit(key + "/report.json", rj.dump(2) + "\n");
        stage.emit(key + "/auc_by_relation.tsv", auc_tsv(grouped.auc));
        std::ostringstream p;
        p << "subject\trelation\tobject\tlabel\tscore\tprediction\n";
        for (std::size_t i = 0; i < items.size(); ++i)
          p << items[i].triple.subject << '\t' << items[i].triple.relation << '\t' << items[i].triple.object << '\t'
            << int(y[i]) << '\t' << fmt_num(scores[i], 6) << '\t' << int(pred[i]) << '\n';
        stage.emit(key + "/predictions.tsv", p.str());
        summary += key + ": P=" + fmt_num(report.precision) + " R=" + fmt_num(report.recall) +
                   " F1=" + fmt_num(report.f1) + "\n";
      }
    }
  }
  return stage.finish(summary);
}

CommandResult cmd_simulate(const ExperimentConfig& cfg) {
  const auto gen = require_manifest(cfg, "gen");
  Stage stage(cfg, "simulate");
  stage.input("gen", gen);
  const auto kg = load_graph(cfg);
  const Tokenizer tokenizer(cfg.token_pattern);
  const auto seed = stage_seed(cfg, "simulate");
  const auto& sim = cfg.simulate;
  if (std::find(cfg.tasks.begin(), cfg.tasks.end(), sim.task) == cfg.tasks.end())
    throw Error(ErrorKind::Config, "simulate task " + task_name(sim.task) + " is not among the generated tasks");
  const auto ds = balance_split(load_dataset(cfg, sim.task), SplitTag::Train, mix_seed(seed, "balance"));
  const auto emb = load_embedding(cfg, find_embedding(cfg, sim.embedding));
  TokenSelector selector;
  selector.mode = sim.adaptation;
  if (sim.adaptation == Adaptation::TaskOriented) {
    auto result = stop_tokens_for(cfg, kg, ds, emb, tokenizer, mix_seed(seed, "stop"));
    if (!result) throw Error(ErrorKind::Config, "task-oriented adaptation does not apply to a random embedding");
    selector.stop = result->stop;
  }
  const auto x = vectorize_dataset(kg, ds.items, emb, selector, tokenizer);
  const auto scenarios = sim.scenarios.empty() ? default_scenarios(seed) : sim.scenarios;

  std::ostringstream tsv;
  tsv << "scenario\ttrain_test_ratio\tpos_neg_ratio\trepeat\ttrain_size\tfinal_train_size\ttrain_positives\t"
         "train_negatives\ttest_size\tprecision\trecall\tf1\n";
  json rows = json::array();
  std::string summary;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    std::vector<double> f1s;
    json reps = json::array();
    for (std::size_t r = 0; r < sim.repeats; ++r) {
      ScenarioSpec spec = scenarios[s];
      spec.seed = mix_seed(mix_seed(seed, "scenario" + std::to_string(s)), r);
      const auto res = scenario_subset(ds, spec);
      const auto train_idx = res.dataset.indices(SplitTag::Train);
      const auto test_idx = res.dataset.indices(SplitTag::Test);
      Hyperparams hp = cfg.hyperparams;
      hp.seed = mix_seed(spec.seed, "forest");
      hp.threads = cfg.threads;
      const auto model = fit_forest(take(x, train_idx), labels_of(res.dataset, train_idx), hp);
      const auto test_x = take(x, test_idx);
      const auto y = labels_of(res.dataset, test_idx);
      std::vector<Label> pred(test_idx.size());
      for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = predict(model, test_x.row(i)) ? 1 : 0;
      const auto rep = classification_report(pred, y);
      f1s.push_back(rep.f1);
      tsv << s << '\t' << spec.train_test_ratio << '\t' << spec.pos_neg_ratio << '\t' << r << '\t' << res.train_size
          << '\t' << res.final_train_size << '\t' << res.train_positives << '\t' << res.train_negatives << '\t'
          << test_idx.size() << '\t' << fmt_num(rep.precision, 6) << '\t' << fmt_num(rep.recall, 6) << '\t'
          << fmt_num(rep.f1, 6) << '\n';
      reps.push_back({{"repeat", r},
                      {"train_size", res.train_size},
                      {"final_train_size", res.final_train_size},
                      {"train_positives", res.train_positives},
                      {"train_negatives", res.train_negatives},
                      {"test_size", test_idx.size()},
                      {"report", json::parse(rep.to_json())}});
    }
    auto sorted = f1s;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted.size() % 2 ? sorted[sorted.size() / 2]
                                            : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
    rows.push_back({{"scenario", s},
                    {"train_test_ratio", scenarios[s].train_test_ratio},
                    {"pos_neg_ratio", scenarios[s].pos_neg_ratio},
                    {"median_f1", median},
                    {"repeats", reps}});
    summary += "scenario " + std::to_string(s) + " (" + fmt_num(scenarios[s].train_test_ratio, 2) + ":1, pos:neg " +
               fmt_num(scenarios[s].pos_neg_ratio, 3) + "): median F1 " + fmt_num(median) + "\n";
  }
  stage.emit("results.tsv", tsv.str());
  stage.emit("report.json", json({{"task", static_cast<int>(sim.task)},
                                  {"embedding", sim.embedding},
                                  {"adaptation", std::string(to_string(sim.adaptation))},
                                  {"scenarios", rows}})
                                    .dump(2) +
                                "\n");
  return stage.finish(summary);
}

CommandResult cmd_icl(const ExperimentConfig& cfg, const ChatFn* chat) {
  const auto gen = require_manifest(cfg, "gen");
  Stage stage(cfg, "icl");
  stage.input("gen", gen);
  const auto kg = load_graph(cfg);
  const Tokenizer tokenizer(cfg.token_pattern);
  const auto seed = stage_seed(cfg, "icl");
  ChatFn fn;
  std::optional<ChatClient> client;
  if (chat) {
    fn = *chat;
  } else {
    client.emplace(cfg.icl.endpoint);
    fn = [&client](const std::string& prompt) { return client->send(prompt); };
  }
  std::string summary;
  for (auto task : cfg.icl.tasks) {
    if (std::find(cfg.tasks.begin(), cfg.tasks.end(), task) == cfg.tasks.end())
      throw Error(ErrorKind::Config, "prompting task " + task_name(task) + " is not among the generated tasks");
    const auto ds = load_dataset(cfg, task);
    const auto tseed = mix_seed(seed, task_name(task));
    auto pool_opts = cfg.icl.pool;
    pool_opts.split = SplitTag::Test;
    const auto pool = sample_icl_pool(ds, kg, tokenizer, pool_opts, mix_seed(tseed, "pool"));
    const std::string relation = cfg.icl.pool.relation.empty() ? "" : normalize_relation(cfg.icl.pool.relation);
    std::vector<LabeledTriple> source;
    for (auto i : ds.indices(SplitTag::Train))
      if (relation.empty() || ds.items[i].triple.relation == relation) source.push_back(ds.items[i]);
    for (auto variant : cfg.icl.variants) {
      const std::string rel = task_name(task) + "/" + std::string(to_string(variant));
      IclRunOptions opts;
      opts.variant = variant;
      opts.repeats = cfg.icl.repeats;
      opts.seed = mix_seed(tseed, "prompts");
      opts.out_dir = (stage.dir() / rel).string();
      opts.concurrency = cfg.icl.endpoint.concurrency;
      const auto run = run_icl(kg, pool, source, fn, opts);
      for (const auto* f : {"prompts.jsonl", "verdicts.tsv", "report.json"}) {
        const auto path = stage.dir() / rel / f;
        if (fs::exists(path)) stage.emit(rel + "/" + f, read_file(path.string()));
      }
      summary += rel + ": accuracy " + fmt_num(run.report.accuracy) + ", F1 " + fmt_num(run.report.f1) +
                 ", unclassified " + std::to_string(run.report.n_unclassified) + ", kappa " +
                 (run.report.kappa ? fmt_num(*run.report.kappa) : std::string("n/a")) + "\n";
    }
  }
  stage.extra()["model"] = cfg.icl.endpoint.model;
  stage.extra()["temperature"] = cfg.icl.endpoint.temperature;
  return stage.finish(summary);
}

CommandResult cmd_report(const ExperimentConfig& cfg) {
  const auto gen = require_manifest(cfg, "gen");
  const auto eval = require_manifest(cfg, "eval");
  Stage stage(cfg, "report");
  stage.input("gen", gen);
  stage.input("eval", eval);
  const fs::path eval_dir = fs::path(cfg.out_dir) / "eval";
  json table = json::array();
  // rows: embedding x adaptation; columns: P/R/F1 per task
  std::ostringstream txt;
  txt << std::left << std::setw(14) << "embedding" << std::setw(15) << "adaptation";
  for (auto task : cfg.tasks)
    for (const char* m : {"P", "R", "F1"}) txt << std::setw(9) << (task_name(task) + ":" + m);
  txt << '\n';
  for (const auto& espec : cfg.embeddings) {
    for (auto adaptation : cfg.adaptations) {
      json row = {{"embedding", espec.name}, {"adaptation", std::string(to_string(adaptation))}};
      txt << std::setw(14) << espec.name << std::setw(15) << to_string(adaptation);
      for (auto task : cfg.tasks) {
        const auto key = model_key(task, espec.name, adaptation);
        const auto path = eval_dir / key / "report.json";
        if (!fs::exists(path)) {
          row[task_name(task)] = nullptr;
          for (int k = 0; k < 3; ++k) txt << std::setw(9) << "-";
          continue;
        }
        const auto rj = json::parse(read_file(path.string()));
        const auto expected = gen.at("outputs").at(task_name(task) + ".tsv").get<std::string>();
        if (rj.at("dataset_hash") != expected)
          throw Error(ErrorKind::Prerequisite,
                      key + " was evaluated on a different dataset; rerun `kgcurate train` and `kgcurate eval`");
        row[task_name(task)] = {{"precision", rj["precision"]},     {"recall", rj["recall"]},
                                {"f1", rj["f1"]},                   {"macro_precision", rj["macro_precision"]},
                                {"macro_recall", rj["macro_recall"]}, {"macro_f1", rj["macro_f1"]},
                                {"auc", rj["auc"]}};
        for (const char* m : {"precision", "recall", "f1"}) txt << std::setw(9) << fmt_num(rj[m].get<double>());
        const auto auc_path = eval_dir / key / "auc_by_relation.tsv";
        stage.emit("auc/" + task_name(task) + "_" + espec.name + "_" + std::string(to_string(adaptation)) + ".tsv",
                   read_file(auc_path.string()));
      }
      txt << '\n';
      table.push_back(row);
    }
  }
  json summary = {{"table", table}};
  const auto sim_report = fs::path(cfg.out_dir) / "simulate" / "report.json";
  if (fs::exists(sim_report)) summary["simulate"] = json::parse(read_file(sim_report.string()));
  stage.emit("summary.json", summary.dump(2) + "\n");
  stage.emit("summary.txt", txt.str());
  return stage.finish(txt.str());
}

CommandResult cmd_all(const ExperimentConfig& cfg) {
  CommandResult all;
  const auto add = [&](CommandResult r) {
    all.outputs.insert(all.outputs.end(), r.outputs.begin(), r.outputs.end());
    all.summary += r.summary;
  };
  add(cmd_ingest(cfg));
  add(cmd_gen(cfg));
  add(cmd_train(cfg));
  add(cmd_eval(cfg));
  if (cfg.simulate.enabled) add(cmd_simulate(cfg));
  add(cmd_report(cfg));
  return all;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Parse: return 3;
    case ErrorKind::Lookup: return 4;
    case ErrorKind::Generation: return 5;
    case ErrorKind::Io: return 6;
    case ErrorKind::Numeric: return 7;
    case ErrorKind::Transport: return 8;
    case ErrorKind::Auth: return 9;
    case ErrorKind::Prerequisite: return 10;
    case ErrorKind::InvalidArgument: return 11;
  }
  return 1;
}

}  // namespace kgc
