#include "talentgraph/knn_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "io_util.hpp"
#include "talentgraph/errors.hpp"

namespace talent {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct Scored {
  double score;
  std::uint32_t index;
};

// Higher similarity first, then lower index (= VectorId order).
bool nearer(const Scored& a, const Scored& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.index < b.index;
}

std::vector<std::uint32_t> take_top(std::vector<Scored>& scored, std::size_t k) {
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                    nearer);
  std::vector<std::uint32_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = scored[i].index;
  return out;
}

nlohmann::json id_json(const VectorId& id) {
  return {{"candidate", id.candidate_id},
          {"category", static_cast<int>(id.category)},
          {"position", id.position}};
}

}  // namespace

VectorIndex::VectorIndex(std::vector<std::pair<VectorId, std::vector<double>>> entries,
                         IndexOptions options)
    : options_(options) {
  if (entries.empty()) throw ValidationError("cannot build an index over an empty pool");
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  dim_ = entries.front().second.size();
  if (dim_ == 0) throw ValidationError("zero-dimensional vectors");
  ids_.reserve(entries.size());
  unit_.reserve(entries.size() * dim_);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& [id, v] = entries[i];
    if (v.size() != dim_) {
      throw ValidationError("dimension mismatch in index pool: " + std::to_string(v.size()) +
                            " vs " + std::to_string(dim_));
    }
    if (!ids_.empty() && ids_.back() == id) {
      throw ValidationError("duplicate vector id for candidate " + id.candidate_id);
    }
    const double norm = std::sqrt(dot(v, v));
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw ValidationError("zero or non-finite vector for candidate " + id.candidate_id);
    }
    for (double x : v) unit_.push_back(x / norm);
    ids_.push_back(std::move(id));
  }
  if (options_.mode == SearchMode::Approximate) build_lists();
}

void VectorIndex::build_lists() {
  const std::size_t n = ids_.size();
  std::size_t nlist = options_.num_lists != 0
                          ? options_.num_lists
                          : static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n))));
  nlist = std::clamp<std::size_t>(nlist, 1, n);

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0U);
  std::mt19937_64 rng(options_.seed);
  std::shuffle(order.begin(), order.end(), rng);
  centroids_.assign(nlist * dim_, 0.0);
  for (std::size_t c = 0; c < nlist; ++c) {
    auto src = unit_vector(order[c]);
    std::copy(src.begin(), src.end(), centroids_.begin() + static_cast<std::ptrdiff_t>(c * dim_));
  }

  std::vector<std::uint32_t> assign(n, 0);
  auto centroid = [&](std::size_t c) {
    return std::span<const double>(centroids_.data() + c * dim_, dim_);
  };
  for (int iter = 0; iter < 10; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = -2.0;
      for (std::size_t c = 0; c < nlist; ++c) {
        const double s = dot(unit_vector(i), centroid(c));
        if (s > best) {
          best = s;
          assign[i] = static_cast<std::uint32_t>(c);
        }
      }
    }
    std::vector<double> sums(nlist * dim_, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto v = unit_vector(i);
      for (std::size_t d = 0; d < dim_; ++d) sums[assign[i] * dim_ + d] += v[d];
    }
    for (std::size_t c = 0; c < nlist; ++c) {
      double norm = 0.0;
      for (std::size_t d = 0; d < dim_; ++d) norm += sums[c * dim_ + d] * sums[c * dim_ + d];
      norm = std::sqrt(norm);
      if (norm == 0.0) continue;  // empty cluster keeps its previous centroid
      for (std::size_t d = 0; d < dim_; ++d) centroids_[c * dim_ + d] = sums[c * dim_ + d] / norm;
    }
  }
  lists_.assign(nlist, {});
  for (std::size_t i = 0; i < n; ++i) lists_[assign[i]].push_back(static_cast<std::uint32_t>(i));
}

std::optional<std::size_t> VectorIndex::find(const VectorId& id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - ids_.begin());
}

std::vector<std::uint32_t> VectorIndex::query_indices(std::span<const double> q, std::size_t k,
                                                      std::optional<std::size_t> exclude) const {
  if (q.size() != dim_) {
    throw ValidationError("query dimension " + std::to_string(q.size()) + " != index dimension " +
                          std::to_string(dim_));
  }
  if (k == 0) throw ValidationError("k must be >= 1");
  const double qnorm = std::sqrt(dot(q, q));
  std::vector<double> qu(q.begin(), q.end());
  if (qnorm > 0.0) {
    for (auto& x : qu) x /= qnorm;
  }

  std::vector<Scored> scored;
  auto consider = [&](std::uint32_t i) {
    if (exclude && *exclude == i) return;
    scored.push_back({dot(qu, unit_vector(i)), i});
  };

  if (options_.mode == SearchMode::Exact) {
    scored.reserve(ids_.size());
    for (std::uint32_t i = 0; i < ids_.size(); ++i) consider(i);
  } else {
    const std::size_t nlist = lists_.size();
    std::vector<Scored> lists_by_score(nlist);
    for (std::size_t c = 0; c < nlist; ++c) {
      lists_by_score[c] = {dot(qu, std::span<const double>(centroids_.data() + c * dim_, dim_)),
                           static_cast<std::uint32_t>(c)};
    }
    std::size_t probes = options_.num_probes != 0 ? options_.num_probes : (nlist + 1) / 2;
    probes = std::clamp<std::size_t>(probes, 1, nlist);
    for (auto c : take_top(lists_by_score, probes)) {
      for (auto i : lists_[c]) consider(i);
    }
  }
  return take_top(scored, k);
}

std::vector<VectorId> VectorIndex::query(std::span<const double> q, std::size_t k) const {
  std::vector<VectorId> out;
  for (auto i : query_indices(q, k, std::nullopt)) out.push_back(ids_[i]);
  return out;
}

std::vector<VectorId> VectorIndex::query(const VectorId& indexed, std::size_t k) const {
  auto pos = find(indexed);
  if (!pos) throw ValidationError("vector id not in index: " + indexed.candidate_id);
  std::vector<VectorId> out;
  for (auto i : query_indices(unit_vector(*pos), k, pos)) out.push_back(ids_[i]);
  return out;
}

std::pair<std::uint32_t, std::uint32_t> NeighborTable::members(
    const std::string& candidate_id) const {
  auto it = ranges.find(candidate_id);
  if (it == ranges.end()) return {0, 0};
  return it->second;
}

NeighborTable make_neighbor_table(const VectorIndex& index, std::size_t k) {
  if (k == 0) throw ValidationError("k must be >= 1");
  NeighborTable table;
  table.category = index.id(0).category;
  table.k = k;
  table.ids = index.ids();
  table.neighbors.resize(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    table.neighbors[i] = index.query_indices(index.unit_vector(i), k, i);
  }
  for (std::uint32_t i = 0; i < table.ids.size(); ++i) {
    auto [it, inserted] = table.ranges.try_emplace(table.ids[i].candidate_id, i, i + 1);
    if (!inserted) it->second.second = i + 1;
  }
  return table;
}

std::map<EntityCategory, NeighborTable> neighbor_tables(const std::vector<EmbeddingSet>& store,
                                                        std::size_t k, IndexOptions options) {
  std::array<std::vector<std::pair<VectorId, std::vector<double>>>, kNumCategories> pools;
  for (const auto& set : store) {
    auto& pool = pools[category_index(set.category)];
    for (std::size_t p = 0; p < set.size(); ++p) {
      auto v = set.vector(p);
      pool.emplace_back(VectorId{set.candidate_id, set.category, static_cast<std::uint32_t>(p)},
                        std::vector<double>(v.begin(), v.end()));
    }
  }
  std::map<EntityCategory, NeighborTable> tables;
  for (auto cat : kAllCategories) {
    auto& pool = pools[category_index(cat)];
    if (pool.empty()) continue;
    VectorIndex index(std::move(pool), options);
    tables.emplace(cat, make_neighbor_table(index, k));
  }
  return tables;
}

void write_neighbor_tables(const std::map<EntityCategory, NeighborTable>& tables,
                           const std::filesystem::path& path) {
  std::string text;
  for (const auto& [cat, table] : tables) {
    for (std::size_t i = 0; i < table.size(); ++i) {
      nlohmann::json nbrs = nlohmann::json::array();
      for (auto j : table.neighbors[i]) nbrs.push_back(id_json(table.ids[j]));
      nlohmann::json line = {{"vector_id", id_json(table.ids[i])}, {"neighbors", std::move(nbrs)}};
      text += line.dump();
      text += '\n';
    }
  }
  detail::write_file(path, text);
}

}  // namespace talent
