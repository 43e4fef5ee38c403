#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "kgcurate/runner.hpp"
#include "kgcurate/synthetic.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config, "JSON experiment config");
  sub->add_option("--seed", c.seed, "master seed (overrides config)");
  sub->add_option("-o,--out", c.out, "output directory (overrides config)");
  sub->add_option("-j,--threads", c.threads, "worker threads");
}

kgc::ExperimentConfig resolve(const Common& c) {
  auto cfg = c.config.empty() ? kgc::ExperimentConfig{} : kgc::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (c.threads) cfg.threads = std::max<std::size_t>(1, *c.threads);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-graph curation experiments"};
  app.require_subcommand(1);
  Common common;

  using Cmd = kgc::CommandResult (*)(const kgc::ExperimentConfig&);
  const std::pair<const char*, Cmd> stages[] = {
      {"ingest", kgc::cmd_ingest},     {"gen", kgc::cmd_gen},       {"train", kgc::cmd_train},
      {"eval", kgc::cmd_eval},         {"simulate", kgc::cmd_simulate}, {"report", kgc::cmd_report},
      {"all", kgc::cmd_all},
  };
  std::vector<std::pair<CLI::App*, Cmd>> subs;
  for (const auto& [name, fn] : stages) {
    auto* sub = app.add_subcommand(name, std::string("run the ") + name + " stage");
    add_common(sub, common);
    subs.emplace_back(sub, fn);
  }
  auto* icl = app.add_subcommand("icl", "run the few-shot prompting experiment");
  add_common(icl, common);

  auto* synth = app.add_subcommand("synth", "write a synthetic OBO ontology");
  kgc::SyntheticOptions synth_opts;
  std::string synth_out = "synthetic.obo";
  synth->add_option("--chemicals", synth_opts.chemicals);
  synth->add_option("--classes", synth_opts.classes);
  synth->add_option("--roles", synth_opts.roles);
  synth->add_option("--seed", synth_opts.seed);
  synth->add_option("-o,--out", synth_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      kgc::write_file(synth_out, kgc::synthetic_obo(synth_opts));
      std::cout << synth_out << '\n';
      return 0;
    }
    const auto cfg = resolve(common);
    kgc::CommandResult result;
    if (icl->parsed()) {
      result = kgc::cmd_icl(cfg);
    } else {
      for (const auto& [sub, fn] : subs)
        if (sub->parsed()) result = fn(cfg);
    }
    std::cout << result.summary;
    if (!result.summary.empty() && result.summary.back() != '\n') std::cout << '\n';
    return 0;
  } catch (const kgc::Error& e) {
    std::cerr << "error (" << kgc::to_string(e.kind()) << "): " << e.what() << '\n';
    return kgc::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
