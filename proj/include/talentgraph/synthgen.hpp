#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "talentgraph/embedding_service.hpp"
#include "talentgraph/profile_store.hpp"

namespace talent {

struct SynthConfig {
  std::size_t num_candidates = 500;
  std::size_t num_selections = 5;
  std::size_t dim = 64;
  // Mean keyword count per category (Poisson), in category order.
  std::array<double, kNumCategories> keywords_per_category = {10.0, 12.0, 6.0, 6.0, 6.0};
  // Pooled stage percentages; per-selection counts are jittered around them.
  // Stage 0 is the remainder of the three minority stages.
  std::array<double, kNumStages> stage_marginals = {93.63, 3.95, 1.47, 0.95};
  double marginal_jitter = 0.2;
  // Fraction of candidates that also apply to a second selection.
  double second_application_rate = 6624.0 / 5461.0 - 1.0;
  double missing_trait_rate = 0.02;
  // Trait mean shift per stage (in standard deviations) at full signal.
  double trait_shift = 1.0;
  // Approximate number of pooled vectors per generic keyword cluster.
  double generic_cluster_size = 12.0;
  // Noise scale of generic keywords around their cluster center.
  double generic_spread = 0.35;
  // Probability, per best stage and before scaling by `signal`, that a keyword is
  // drawn near the selection prototype instead of a generic cluster.
  std::array<double, kNumStages> prototype_affinity = {0.0, 1.0, 1.0, 1.0};
  // Prototype keywords of stage y sit near p + ladder_step * (y - 2) * q, with q a
  // second per-selection direction orthogonal to the prototype p.
  double ladder_step = 0.5;
  double signal = 0.8;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const SynthConfig& cfg);
/// Missing keys keep their defaults.
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct SynthDataset {
  std::vector<CandidateProfile> profiles;  // raw traits, sorted by candidate_id
  std::vector<EmbeddingSet> store;         // one set per (candidate, category)
  std::vector<SelectionOutcome> outcomes;  // sorted by (selection_id, candidate_id)
  nlohmann::json manifest;
  std::vector<std::string> warnings;
};

/// Planted-signal dataset. Each selection gets a prototype vector per category;
/// candidates rank within a selection by a latent score mixed with noise
/// (weight `signal` on the latent), and rank determines stage counts drawn from
/// the marginals. Higher stages draw more keywords near the selection prototype
/// (noise scaled by 1 - signal) and shift the traits. Everything else comes from
/// generic keyword clusters and unshifted traits.
SynthDataset generate(const SynthConfig& cfg);

/// Writes profiles.jsonl, embeddings.emb, embeddings.keywords.jsonl,
/// outcomes.jsonl and manifest.json into `dir`.
void write_dataset(const SynthDataset& data, const std::filesystem::path& dir);

}  // namespace talent
