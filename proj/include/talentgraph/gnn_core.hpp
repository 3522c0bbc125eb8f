#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "talentgraph/matrix.hpp"
#include "talentgraph/profile_store.hpp"
#include "talentgraph/similarity_graph.hpp"

namespace talent {

enum class ConvKind { GCN, RGCN };
enum class Activation { LeakyReLU, ELU, Tanh, Sigmoid, Identity };

inline constexpr double kLeakyReluSlope = 0.01;

std::string_view to_string(ConvKind kind);
std::string_view to_string(Activation act);
ConvKind parse_conv_kind(std::string_view s);
Activation parse_activation(std::string_view s);

double activate(Activation act, double z);
/// d act(z) / dz
double activate_derivative(Activation act, double z);

struct ModelSpec {
  ConvKind conv = ConvKind::GCN;
  std::size_t hidden = 32;
  std::size_t depth = 2;
  Activation activation = Activation::LeakyReLU;

  bool operator==(const ModelSpec&) const = default;
};

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Normalized relation operators

struct AdjacencyEntry {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  double coefficient = 0.0;
};

/// Sparse operator for one relation. `num_edges` counts the undirected input
/// edges; a relation with none is skipped by the convolution layers.
struct RelationAdjacency {
  EntityCategory category = EntityCategory::SoftSkills;
  std::size_t num_nodes = 0;
  std::size_t num_edges = 0;
  bool weighted = true;
  std::vector<AdjacencyEntry> entries;  // sorted by (row, col)

  /// out = A * h
  Matrix apply(const Matrix& h) const;
  /// out = A^T * g
  Matrix apply_transpose(const Matrix& g) const;
  Matrix dense() const;
};

using AdjacencySet = std::map<EntityCategory, RelationAdjacency>;

/// GCN: D^-1/2 (A_w + I) D^-1/2 with weighted degrees.
/// RGCN: edge weights ignored, no self-loop, coefficient 1/|N(i)| on (i, j).
RelationAdjacency normalize_adjacency(std::size_t num_nodes, std::span<const WeightedEdge> edges,
                                      ConvKind mode,
                                      EntityCategory category = EntityCategory::SoftSkills);

AdjacencySet build_adjacency(const HeteroGraph& graph, ConvKind mode);

// ---------------------------------------------------------------------------
// Layers

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

/// One heterogeneous convolution: per-relation transforms summed before a single
/// activation.
///   GCN:  H' = act( sum_r A_r H W_r + b )
///   RGCN: H' = act( H W_0 + sum_r A_r H W_r + b )
class HeteroConvLayer {
 public:
  HeteroConvLayer(ConvKind kind, std::vector<EntityCategory> relations, std::size_t in_dim,
                  std::size_t out_dim, Activation activation, std::mt19937_64& rng,
                  std::string name_prefix = "layer0");

  Matrix forward(const Matrix& h, const AdjacencySet& adjacency);
  /// Accumulates parameter gradients and returns dLoss/dH for the layer input.
  Matrix backward(const Matrix& grad_out);

  std::vector<Parameter*> parameters();
  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }

 private:
  ConvKind kind_;
  std::vector<EntityCategory> relations_;
  std::size_t in_dim_;
  std::size_t out_dim_;
  Activation activation_;
  std::vector<Parameter> weights_;  // one per relation
  std::optional<Parameter> self_weight_;
  Parameter bias_;

  // forward cache
  bool has_forward_ = false;
  AdjacencySet adjacency_;
  Matrix input_;
  std::vector<std::optional<Matrix>> aggregated_;  // A_r H, nullopt for skipped relations
  Matrix pre_activation_;
};

/// Stack of `depth` heterogeneous convolutions: in_dim -> hidden -> ... -> hidden.
class HeteroGnn {
 public:
  HeteroGnn(const ModelSpec& spec, std::vector<EntityCategory> relations, std::size_t in_dim,
            std::uint64_t seed);

  Matrix forward(const Matrix& x, const AdjacencySet& adjacency);
  Matrix backward(const Matrix& grad_out);
  std::vector<Parameter*> parameters();
  void zero_grad();

  const ModelSpec& spec() const { return spec_; }
  const std::vector<EntityCategory>& relations() const { return relations_; }
  std::vector<std::size_t> widths() const;

 private:
  ModelSpec spec_;
  std::vector<EntityCategory> relations_;
  std::size_t in_dim_;
  std::vector<HeteroConvLayer> layers_;
};

// ---------------------------------------------------------------------------
// Checkpoints: "TGC1" | u32 version | u32 header_len | JSON header |
// u32 tensor_count | tensors, tensor = u32 name_len | name | u32 rows | u32 cols | f32 payload.

struct NamedTensor {
  std::string name;
  Matrix value;
};

struct Checkpoint {
  nlohmann::json header;
  std::vector<NamedTensor> tensors;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace talent
