#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "talentgraph/embedding_service.hpp"
#include "talentgraph/gnn_core.hpp"
#include "talentgraph/knn_index.hpp"
#include "talentgraph/learning.hpp"
#include "talentgraph/similarity_graph.hpp"
#include "talentgraph/synthgen.hpp"

namespace talent {

/// File locations. Empty paths resolve to the default file name inside `out`.
struct PipelinePaths {
  std::filesystem::path cvs;         // extract input: {"candidate_id","text","traits"} per line
  std::filesystem::path dictionary;  // extract input: {"phrase": "category_key"}
  std::filesystem::path profiles;
  std::filesystem::path outcomes;
  std::filesystem::path embeddings;
  std::filesystem::path graph;
  std::filesystem::path trait_stats;
  std::filesystem::path split;
  std::filesystem::path model;
  std::filesystem::path reports;  // directory for metrics, reports and predictions
};

struct PipelineConfig {
  std::filesystem::path out = "run";
  std::uint64_t seed = 0;
  PipelinePaths paths;
  GraphBuildConfig graph;
  IndexOptions index;
  ProviderConfig provider;
  ModelSpec model;
  TrainConfig train;
  std::size_t trials = 0;  // 0 trains `model` directly; otherwise random search
  SearchGrid grid;
  std::optional<SynthConfig> synth;

  /// Propagates `seed` into the synth, index, provider and training seeds.
  void apply_seed();
  void validate() const;

  std::filesystem::path resolve(const std::filesystem::path& configured,
                                const char* default_name) const;
  std::filesystem::path profiles_path() const;
  std::filesystem::path outcomes_path() const;
  std::filesystem::path embeddings_path() const;
  std::filesystem::path graph_path() const;
  std::filesystem::path trait_stats_path() const;
  std::filesystem::path split_path() const;
  std::filesystem::path model_path() const;
  std::filesystem::path reports_dir() const;
};

/// Keys mirror the struct fields; missing keys keep their defaults.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PipelineConfig& cfg);

struct StageResult {
  std::vector<std::string> warnings;
};

// Stages. Each reads its inputs, writes its outputs and appends an entry to
// <out>/run_manifest.json.
StageResult run_synth(const PipelineConfig& cfg);
StageResult run_extract(const PipelineConfig& cfg);
StageResult run_embed(const PipelineConfig& cfg);
StageResult run_build_graph(const PipelineConfig& cfg);
StageResult run_train(const PipelineConfig& cfg);
StageResult run_evaluate(const PipelineConfig& cfg);
StageResult run_predict(const PipelineConfig& cfg);
/// synth (when configured) or extract, then embed (skipped after synth, which
/// writes the embedding store itself), build-graph, train and evaluate.
StageResult run_pipeline(const PipelineConfig& cfg);

/// Exclusive lock on a run directory, released on destruction.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace talent
