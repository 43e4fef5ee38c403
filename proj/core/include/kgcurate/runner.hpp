#pragma once

// Config-driven pipeline: ingest -> gen -> train -> eval -> report, plus the
// scenario simulation and prompting runs. Every stage writes a manifest.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kgcurate/adaptation.hpp"
#include "kgcurate/classifier.hpp"
#include "kgcurate/icl.hpp"
#include "kgcurate/synthetic.hpp"
#include "kgcurate/taskgen.hpp"

namespace kgc {

struct EmbeddingSpec {
  std::string name = "random";
  std::string path = "random";  // "random" or a text vector file
  std::size_t dimension = 300;
};

struct SimulateConfig {
  TaskId task = TaskId::Task1;
  std::string embedding = "random";
  Adaptation adaptation = Adaptation::Naive;
  std::vector<ScenarioSpec> scenarios;  // empty: the five defaults
  std::size_t repeats = 1;              // seeds per scenario
  bool enabled = false;                 // run as part of cmd_all
};

struct IclConfig {
  std::vector<TaskId> tasks = {TaskId::Task1};
  std::vector<PromptVariant> variants = {PromptVariant::Base};
  std::size_t repeats = 5;
  IclPoolOptions pool;
  EndpointConfig endpoint;
};

struct ExperimentConfig {
  std::string ontology;  // OBO path; empty: synthetic ontology
  SyntheticOptions synthetic;
  std::vector<TaskId> tasks = {TaskId::Task1, TaskId::Task2, TaskId::Task3};
  RandomNegativeOptions negatives;
  std::optional<std::size_t> subsample_per_class;
  std::vector<double> split = {0.9, 0.1};
  std::vector<EmbeddingSpec> embeddings = {EmbeddingSpec{}};
  std::vector<Adaptation> adaptations = {Adaptation::None, Adaptation::Naive, Adaptation::TaskOriented};
  std::string token_pattern = std::string(Tokenizer::kDefaultPattern);
  TaskOrientedParams task_oriented;
  bool grid_search = false;
  std::size_t cv_folds = 5;
  std::vector<Hyperparams> grid;  // empty: default grid
  Hyperparams hyperparams;        // used when grid_search is off
  SimulateConfig simulate;
  IclConfig icl;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::size_t threads = 1;  // never changes outputs

  /// Canonical JSON of every field that can change outputs.
  std::string canonical_json() const;
  std::string hash() const;
};

/// Parses the JSON config; relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

/// Stage seed derived from the master seed.
std::uint64_t stage_seed(const ExperimentConfig& cfg, std::string_view stage);

struct CommandResult {
  std::vector<std::string> outputs;  // paths relative to out_dir
  std::string summary;
};

CommandResult cmd_ingest(const ExperimentConfig& cfg);
CommandResult cmd_gen(const ExperimentConfig& cfg);
CommandResult cmd_train(const ExperimentConfig& cfg);
CommandResult cmd_eval(const ExperimentConfig& cfg);
CommandResult cmd_simulate(const ExperimentConfig& cfg);
CommandResult cmd_icl(const ExperimentConfig& cfg, const ChatFn* chat = nullptr);
CommandResult cmd_report(const ExperimentConfig& cfg);

/// ingest, gen, train, eval, simulate (when configured) and report.
CommandResult cmd_all(const ExperimentConfig& cfg);

/// Loads the configured embedding model by roster name.
EmbeddingModel load_embedding(const ExperimentConfig& cfg, const EmbeddingSpec& spec);

/// Process exit code for an error category (0 is success).
int exit_code(ErrorKind kind);

}  // namespace kgc
