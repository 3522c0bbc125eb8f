#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "talentgraph/embedding_service.hpp"
#include "talentgraph/profile_store.hpp"

namespace talent {

struct VectorId {
  std::string candidate_id;
  EntityCategory category = EntityCategory::SoftSkills;
  std::uint32_t position = 0;

  // Tie-break order for equal similarities: category, candidate_id, position.
  auto operator<=>(const VectorId&) const = default;
};

enum class SearchMode { Exact, Approximate };

struct IndexOptions {
  SearchMode mode = SearchMode::Exact;
  // Approximate mode only: number of inverted lists (0 = round(sqrt(n))) and
  // lists probed per query (0 = half of the lists, at least 1).
  std::size_t num_lists = 0;
  std::size_t num_probes = 0;
  std::uint64_t seed = 0;
};

/// Cosine nearest-neighbor index over one category's vectors. Vectors are
/// normalized on insertion; entries are kept in VectorId order, which is also the
/// tie-break order for equal similarities.
class VectorIndex {
 public:
  VectorIndex(std::vector<std::pair<VectorId, std::vector<double>>> entries,
              IndexOptions options = {});

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  SearchMode mode() const { return options_.mode; }
  const VectorId& id(std::size_t index) const { return ids_[index]; }
  const std::vector<VectorId>& ids() const { return ids_; }
  std::optional<std::size_t> find(const VectorId& id) const;

  /// Up to k neighbors of an arbitrary query vector, nearest first.
  std::vector<VectorId> query(std::span<const double> q, std::size_t k) const;
  /// Up to k neighbors of an indexed vector, excluding itself.
  std::vector<VectorId> query(const VectorId& indexed, std::size_t k) const;
  /// Index-level variant; `exclude` is skipped when set.
  std::vector<std::uint32_t> query_indices(std::span<const double> q, std::size_t k,
                                           std::optional<std::size_t> exclude) const;

  std::span<const double> unit_vector(std::size_t index) const {
    return {unit_.data() + index * dim_, dim_};
  }

 private:
  void build_lists();

  IndexOptions options_;
  std::size_t dim_ = 0;
  std::vector<VectorId> ids_;
  std::vector<double> unit_;
  // approximate mode
  std::vector<double> centroids_;
  std::vector<std::vector<std::uint32_t>> lists_;
};

/// kNN lists for every vector of one category. Entries are in VectorId order so a
/// candidate's vectors occupy one contiguous range.
struct NeighborTable {
  EntityCategory category = EntityCategory::SoftSkills;
  std::size_t k = 0;
  std::vector<VectorId> ids;
  std::vector<std::vector<std::uint32_t>> neighbors;
  std::map<std::string, std::pair<std::uint32_t, std::uint32_t>> ranges;

  /// [begin, end) indices of the candidate's vectors; empty range if absent.
  std::pair<std::uint32_t, std::uint32_t> members(const std::string& candidate_id) const;
  std::size_t size() const { return ids.size(); }
};

NeighborTable make_neighbor_table(const VectorIndex& index, std::size_t k);

/// One table per category that has at least one vector; categories are pooled separately.
std::map<EntityCategory, NeighborTable> neighbor_tables(const std::vector<EmbeddingSet>& store,
                                                        std::size_t k, IndexOptions options = {});

/// JSONL dump: {"vector_id":{...}, "neighbors":[{...}, ...]} per vector.
void write_neighbor_tables(const std::map<EntityCategory, NeighborTable>& tables,
                           const std::filesystem::path& path);

}  // namespace talent
