#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "talentgraph/knn_index.hpp"
#include "talentgraph/matrix.hpp"
#include "talentgraph/profile_store.hpp"

namespace talent {

enum class OverlapRule {
  // Count embeddings on each side whose closed neighborhood N(x) = kNN(x) + {x}
  // intersects the neighborhood of some embedding on the other side.
  SharedNeighbor,
  // Count vector pairs (v, w) with kNN(v) a subset of kNN(w). Asymmetric and can
  // exceed 1; kept for comparison only and clamped to 1 when building graphs.
  Subset,
};

struct GraphBuildConfig {
  std::size_t k = 10;
  double lambda = 2.0;
  double theta = 0.2;
  OverlapRule rule = OverlapRule::SharedNeighbor;

  void validate() const;
};

struct OverlapResult {
  std::string candidate_i;
  std::string candidate_j;
  EntityCategory category = EntityCategory::SoftSkills;
  std::size_t numerator = 0;
  std::size_t denominator = 0;
  double value = 0.0;
};

/// kNN-Jaccard overlap of two candidates in one category. Returns nullopt when
/// either candidate has no vector in the table (the overlap is undefined).
std::optional<OverlapResult> overlap(const std::string& candidate_i, const std::string& candidate_j,
                                     const NeighborTable& table,
                                     OverlapRule rule = OverlapRule::SharedNeighbor);

/// max(1 - exp(-lambda * J) - theta, 0)
double similarity(double overlap_value, const GraphBuildConfig& config);

/// Candidate pairs (lexicographically ordered, first < second) that have at least
/// one pair of vectors with intersecting closed neighborhoods.
std::vector<std::pair<std::string, std::string>> candidate_pairs(const NeighborTable& table);

struct WeightedEdge {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  double weight = 0.0;

  bool operator==(const WeightedEdge&) const = default;
};

/// Candidate nodes with trait features and one undirected weighted edge list per
/// category. Edges are stored once with i < j, sorted by (i, j).
struct HeteroGraph {
  std::vector<std::string> nodes;
  Matrix features;
  std::array<std::vector<WeightedEdge>, kNumCategories> edges;

  std::optional<std::size_t> node_index(const std::string& candidate_id) const;
  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_edges() const;
  const std::vector<WeightedEdge>& relation(EntityCategory c) const {
    return edges[category_index(c)];
  }
};

/// Feature matrix from profiles whose traits are all present (i.e. normalized).
Matrix feature_matrix(const std::vector<CandidateProfile>& normalized_profiles);

/// Nodes are the profiles (sorted by id); every candidate referenced by a table
/// must have a profile.
HeteroGraph build_graph(const std::vector<CandidateProfile>& normalized_profiles,
                        const std::map<EntityCategory, NeighborTable>& tables,
                        const GraphBuildConfig& config);

/// graph.jsonl: header {"nodes":[...], "feature_dim":18} then one edge per line.
/// Weights are written with 9 significant digits. Features are not part of the file.
void write_graph(const HeteroGraph& graph, const std::filesystem::path& path);
std::string encode_graph(const HeteroGraph& graph);
/// Reads nodes and edges; `features` is left empty.
HeteroGraph read_graph(const std::filesystem::path& path);
HeteroGraph decode_graph(std::string_view text);

}  // namespace talent
