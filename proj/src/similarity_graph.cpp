#include "talentgraph/similarity_graph.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "io_util.hpp"
#include "talentgraph/errors.hpp"

namespace talent {

namespace {

using Range = std::pair<std::uint32_t, std::uint32_t>;

std::vector<std::uint32_t> closed_neighborhood(const NeighborTable& table, std::uint32_t x) {
  std::vector<std::uint32_t> n = table.neighbors[x];
  n.push_back(x);
  std::sort(n.begin(), n.end());
  return n;
}

bool intersects(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia == *ib) return true;
    if (*ia < *ib) {
      ++ia;
    } else {
      ++ib;
    }
  }
  return false;
}

std::size_t shared_neighbor_count(const NeighborTable& table, Range ri, Range rj) {
  std::vector<std::vector<std::uint32_t>> ni, nj;
  for (auto v = ri.first; v < ri.second; ++v) ni.push_back(closed_neighborhood(table, v));
  for (auto w = rj.first; w < rj.second; ++w) nj.push_back(closed_neighborhood(table, w));
  std::vector<bool> hit_j(nj.size(), false);
  std::size_t count = 0;
  for (const auto& a : ni) {
    bool hit = false;
    for (std::size_t b = 0; b < nj.size(); ++b) {
      if (intersects(a, nj[b])) {
        hit = true;
        hit_j[b] = true;
      }
    }
    count += hit ? 1 : 0;
  }
  return count + static_cast<std::size_t>(std::count(hit_j.begin(), hit_j.end(), true));
}

std::size_t subset_count(const NeighborTable& table, Range ri, Range rj) {
  std::size_t count = 0;
  for (auto v = ri.first; v < ri.second; ++v) {
    auto a = table.neighbors[v];
    std::sort(a.begin(), a.end());
    for (auto w = rj.first; w < rj.second; ++w) {
      auto b = table.neighbors[w];
      std::sort(b.begin(), b.end());
      if (std::includes(b.begin(), b.end(), a.begin(), a.end())) ++count;
    }
  }
  return count;
}

// Candidate ordinal (position in table.ranges) for each vector index.
std::vector<std::uint32_t> owners(const NeighborTable& table) {
  std::vector<std::uint32_t> owner(table.size(), 0);
  std::uint32_t ordinal = 0;
  for (const auto& [id, range] : table.ranges) {
    for (auto x = range.first; x < range.second; ++x) owner[x] = ordinal;
    ++ordinal;
  }
  return owner;
}

// Pairs of candidate ordinals (a < b) with intersecting closed neighborhoods: two
// vectors share a neighbor u exactly when both appear in the inverted list of u.
std::vector<std::pair<std::uint32_t, std::uint32_t>> ordinal_pairs(const NeighborTable& table) {
  const auto owner = owners(table);
  std::vector<std::vector<std::uint32_t>> inverted(table.size());
  for (std::uint32_t x = 0; x < table.size(); ++x) {
    inverted[x].push_back(owner[x]);
    for (auto u : table.neighbors[x]) inverted[u].push_back(owner[x]);
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  for (auto& holders : inverted) {
    std::sort(holders.begin(), holders.end());
    holders.erase(std::unique(holders.begin(), holders.end()), holders.end());
    for (std::size_t a = 0; a < holders.size(); ++a) {
      for (std::size_t b = a + 1; b < holders.size(); ++b) pairs.emplace_back(holders[a], holders[b]);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

}  // namespace

void GraphBuildConfig::validate() const {
  if (k < 1) throw ValidationError("k must be >= 1");
  if (!(lambda > 0.0)) throw ValidationError("lambda must be > 0");
  if (!(theta >= 0.0 && theta < 1.0)) throw ValidationError("theta must lie in [0, 1)");
}

std::optional<OverlapResult> overlap(const std::string& candidate_i, const std::string& candidate_j,
                                     const NeighborTable& table, OverlapRule rule) {
  if (candidate_i == candidate_j) throw ValidationError("overlap of a candidate with itself");
  const Range ri = table.members(candidate_i);
  const Range rj = table.members(candidate_j);
  const std::size_t size_i = ri.second - ri.first;
  const std::size_t size_j = rj.second - rj.first;
  if (size_i == 0 || size_j == 0) return std::nullopt;

  OverlapResult r;
  r.candidate_i = candidate_i;
  r.candidate_j = candidate_j;
  r.category = table.category;
  r.numerator = rule == OverlapRule::SharedNeighbor ? shared_neighbor_count(table, ri, rj)
                                                    : subset_count(table, ri, rj);
  r.denominator = size_i + size_j;
  r.value = static_cast<double>(r.numerator) / static_cast<double>(r.denominator);
  return r;
}

double similarity(double overlap_value, const GraphBuildConfig& config) {
  return std::max(1.0 - std::exp(-config.lambda * overlap_value) - config.theta, 0.0);
}

std::vector<std::pair<std::string, std::string>> candidate_pairs(const NeighborTable& table) {
  std::vector<const std::string*> names;
  for (const auto& [id, range] : table.ranges) names.push_back(&id);
  std::vector<std::pair<std::string, std::string>> out;
  for (auto [a, b] : ordinal_pairs(table)) out.emplace_back(*names[a], *names[b]);
  return out;
}

std::optional<std::size_t> HeteroGraph::node_index(const std::string& candidate_id) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), candidate_id);
  if (it == nodes.end() || *it != candidate_id) return std::nullopt;
  return static_cast<std::size_t>(it - nodes.begin());
}

std::size_t HeteroGraph::num_edges() const {
  std::size_t n = 0;
  for (const auto& e : edges) n += e.size();
  return n;
}

Matrix feature_matrix(const std::vector<CandidateProfile>& profiles) {
  Matrix x(profiles.size(), kNumTraits);
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    for (std::size_t t = 0; t < kNumTraits; ++t) {
      if (!profiles[i].traits[t]) {
        throw ValidationError("candidate " + profiles[i].candidate_id +
                              " has a missing trait; normalize traits first");
      }
      x(i, t) = *profiles[i].traits[t];
    }
  }
  return x;
}

HeteroGraph build_graph(const std::vector<CandidateProfile>& profiles,
                        const std::map<EntityCategory, NeighborTable>& tables,
                        const GraphBuildConfig& config) {
  config.validate();
  if (profiles.empty()) throw ValidationError("cannot build a graph without candidates");

  std::vector<CandidateProfile> sorted = profiles;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.candidate_id < b.candidate_id; });
  HeteroGraph g;
  for (const auto& p : sorted) {
    if (!g.nodes.empty() && g.nodes.back() == p.candidate_id) {
      throw ValidationError("duplicate candidate " + p.candidate_id);
    }
    g.nodes.push_back(p.candidate_id);
  }
  g.features = feature_matrix(sorted);

  for (const auto& [cat, table] : tables) {
    std::vector<std::uint32_t> node_of;
    std::vector<const std::string*> names;
    for (const auto& [id, range] : table.ranges) {
      auto node = g.node_index(id);
      if (!node) throw ValidationError("embedding store references unknown candidate " + id);
      node_of.push_back(static_cast<std::uint32_t>(*node));
      names.push_back(&id);
    }
    auto& edges = g.edges[category_index(cat)];
    for (auto [a, b] : ordinal_pairs(table)) {
      auto r = overlap(*names[a], *names[b], table, config.rule);
      if (!r) continue;
      const double w = similarity(std::min(r->value, 1.0), config);
      if (w > 0.0) edges.push_back({node_of[a], node_of[b], w});
    }
    std::sort(edges.begin(), edges.end(), [](const auto& x, const auto& y) {
      return std::pair(x.i, x.j) < std::pair(y.i, y.j);
    });
  }
  return g;
}

std::string encode_graph(const HeteroGraph& graph) {
  nlohmann::json header = {{"nodes", graph.nodes}, {"feature_dim", kNumTraits}};
  std::string text = header.dump();
  text += '\n';
  for (auto cat : kAllCategories) {
    for (const auto& e : graph.relation(cat)) {
      text += "{\"category\":" + std::to_string(category_index(cat)) +
              ",\"i\":" + std::to_string(e.i) + ",\"j\":" + std::to_string(e.j) +
              ",\"weight\":" + detail::format_double(e.weight, 9) + "}\n";
    }
  }
  return text;
}

void write_graph(const HeteroGraph& graph, const std::filesystem::path& path) {
  detail::write_file(path, encode_graph(graph));
}

HeteroGraph decode_graph(std::string_view text) {
  HeteroGraph g;
  bool have_header = false;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
    if (!have_header) {
      if (!obj.contains("nodes") || !obj["nodes"].is_array()) {
        throw ParseError(line_no, "graph header must contain a nodes array");
      }
      g.nodes = obj["nodes"].get<std::vector<std::string>>();
      if (!std::is_sorted(g.nodes.begin(), g.nodes.end()) ||
          std::adjacent_find(g.nodes.begin(), g.nodes.end()) != g.nodes.end()) {
        throw ParseError(line_no, "graph nodes must be sorted and unique");
      }
      have_header = true;
      return;
    }
    try {
      const auto cat = category_from_code(obj.at("category").get<int>());
      WeightedEdge e{obj.at("i").get<std::uint32_t>(), obj.at("j").get<std::uint32_t>(),
                     obj.at("weight").get<double>()};
      if (e.i >= e.j || e.j >= g.nodes.size()) throw ValidationError("invalid edge endpoints");
      if (!(e.weight > 0.0)) throw ValidationError("edge weight must be positive");
      g.edges[category_index(cat)].push_back(e);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(line_no, e.what());
    }
  });
  if (!have_header) throw ParseError(1, "empty graph file");
  for (auto& edges : g.edges) {
    std::sort(edges.begin(), edges.end(), [](const auto& x, const auto& y) {
      return std::pair(x.i, x.j) < std::pair(y.i, y.j);
    });
    for (std::size_t n = 1; n < edges.size(); ++n) {
      if (edges[n].i == edges[n - 1].i && edges[n].j == edges[n - 1].j) {
        throw ValidationError("duplicate edge in graph file");
      }
    }
  }
  return g;
}

HeteroGraph read_graph(const std::filesystem::path& path) {
  return decode_graph(detail::read_file(path));
}

}  // namespace talent
