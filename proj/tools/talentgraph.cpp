#include <cstdio>
#include <fstream>
#include <optional>
#include <iterator>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "talentgraph/errors.hpp"
#include "talentgraph/pipeline.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitUsage = 64;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k;
  std::optional<double> lambda;
  std::optional<double> theta;
  std::optional<std::string> conv;
  std::optional<std::string> head;
  std::optional<int> epochs;
  std::optional<std::size_t> trials;
  std::optional<std::string> out;
};

void add_common_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON configuration file");
  cmd->add_option("--seed", o.seed, "seed for synthesis, splits, initialization and search");
  cmd->add_option("--k", o.k, "nearest neighbors per keyword vector");
  cmd->add_option("--lambda", o.lambda, "similarity scale");
  cmd->add_option("--theta", o.theta, "similarity threshold");
  cmd->add_option("--conv", o.conv, "convolution kind")->check(CLI::IsMember({"gcn", "rgcn"}));
  cmd->add_option("--head", o.head, "task head")->check(CLI::IsMember({"ordinal", "multilabel"}));
  cmd->add_option("--epochs", o.epochs, "training epochs");
  cmd->add_option("--trials", o.trials, "random-search trials (0 trains the configured model)");
  cmd->add_option("--out", o.out, "run directory");
}

talent::PipelineConfig effective_config(const Overrides& o, bool default_synth) {
  talent::PipelineConfig cfg;
  nlohmann::json file_json = nlohmann::json::object();
  if (!o.config.empty()) {
    std::ifstream in(o.config, std::ios::binary);
    if (!in) throw talent::ValidationError("missing config file: " + o.config);
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    try {
      file_json = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw talent::ValidationError("config " + o.config + ": " + e.what());
    }
    cfg = talent::pipeline_config_from_json(file_json);
  }
  if (default_synth && !cfg.synth && cfg.paths.cvs.empty()) cfg.synth = talent::SynthConfig{};
  if (o.seed) cfg.seed = *o.seed;
  else if (cfg.synth && !file_json.contains("seed")) cfg.seed = cfg.synth->seed;
  if (o.k) cfg.graph.k = *o.k;
  if (o.lambda) cfg.graph.lambda = *o.lambda;
  if (o.theta) cfg.graph.theta = *o.theta;
  if (o.conv) cfg.model.conv = talent::parse_conv_kind(*o.conv);
  if (o.head) cfg.train.head = talent::parse_head_kind(*o.head);
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.trials) cfg.trials = *o.trials;
  if (o.out) cfg.out = *o.out;
  cfg.apply_seed();
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Candidate similarity graphs and heterogeneous GNN stage prediction"};
  app.require_subcommand(1);
  Overrides o;

  struct Command {
    const char* name;
    const char* help;
    talent::StageResult (*run)(const talent::PipelineConfig&);
    bool default_synth;
  };
  const Command commands[] = {
      {"synth", "generate a synthetic dataset", talent::run_synth, true},
      {"extract", "extract entity keywords from CV text", talent::run_extract, false},
      {"embed", "embed profile keywords into the vector store", talent::run_embed, false},
      {"build-graph", "build the heterogeneous similarity graph", talent::run_build_graph, false},
      {"train", "train a model (or search hyperparameters)", talent::run_train, false},
      {"evaluate", "score the trained model on the test fold", talent::run_evaluate, false},
      {"predict", "predict stages for every labeled pair", talent::run_predict, false},
      {"pipeline", "run all stages in order", talent::run_pipeline, true},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_common_flags(sub, o);
    subs.emplace_back(sub, &c);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  for (const auto& [sub, command] : subs) {
    if (!sub->parsed()) continue;
    try {
      const auto cfg = effective_config(o, command->default_synth);
      talent::RunLock lock(cfg.out);
      const auto result = command->run(cfg);
      for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      std::fprintf(stderr, "%s: done (%s)\n", command->name, cfg.out.string().c_str());
      return 0;
    } catch (const talent::ValidationError& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return kExitValidation;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return kExitRuntime;
    }
  }
  return kExitUsage;
}
