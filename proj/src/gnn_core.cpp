#include "talentgraph/gnn_core.hpp"

#include <algorithm>
#include <cmath>

#include "io_util.hpp"
#include "talentgraph/errors.hpp"

namespace talent {

using nlohmann::json;

std::string_view to_string(ConvKind kind) { return kind == ConvKind::GCN ? "gcn" : "rgcn"; }

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::LeakyReLU: return "leaky_relu";
    case Activation::ELU: return "elu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Identity: return "identity";
  }
  return "identity";
}

ConvKind parse_conv_kind(std::string_view s) {
  if (s == "gcn" || s == "GCN") return ConvKind::GCN;
  if (s == "rgcn" || s == "RGCN") return ConvKind::RGCN;
  throw ValidationError("unknown conv kind '" + std::string(s) + "'");
}

Activation parse_activation(std::string_view s) {
  for (auto a : {Activation::LeakyReLU, Activation::ELU, Activation::Tanh, Activation::Sigmoid,
                 Activation::Identity}) {
    if (to_string(a) == s) return a;
  }
  throw ValidationError("unknown activation '" + std::string(s) + "'");
}

double activate(Activation act, double z) {
  switch (act) {
    case Activation::LeakyReLU: return z > 0.0 ? z : kLeakyReluSlope * z;
    case Activation::ELU: return z > 0.0 ? z : std::expm1(z);
    case Activation::Tanh: return std::tanh(z);
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::Identity: return z;
  }
  return z;
}

double activate_derivative(Activation act, double z) {
  switch (act) {
    case Activation::LeakyReLU: return z > 0.0 ? 1.0 : kLeakyReluSlope;
    case Activation::ELU: return z > 0.0 ? 1.0 : std::exp(z);
    case Activation::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::Sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 - s);
    }
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

json to_json(const ModelSpec& spec) {
  return {{"conv", to_string(spec.conv)},
          {"hidden", spec.hidden},
          {"depth", spec.depth},
          {"activation", to_string(spec.activation)}};
}

ModelSpec model_spec_from_json(const json& j) {
  ModelSpec spec;
  spec.conv = parse_conv_kind(j.at("conv").get<std::string>());
  spec.hidden = j.at("hidden").get<std::size_t>();
  spec.depth = j.at("depth").get<std::size_t>();
  spec.activation = parse_activation(j.at("activation").get<std::string>());
  return spec;
}

// ---------------------------------------------------------------------------

Matrix RelationAdjacency::apply(const Matrix& h) const {
  require_shape(h, num_nodes, h.cols(), "adjacency apply");
  Matrix out(num_nodes, h.cols());
  for (const auto& e : entries) {
    auto src = h.row(e.col);
    auto dst = out.row(e.row);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] += e.coefficient * src[c];
  }
  return out;
}

Matrix RelationAdjacency::apply_transpose(const Matrix& g) const {
  require_shape(g, num_nodes, g.cols(), "adjacency apply_transpose");
  Matrix out(num_nodes, g.cols());
  for (const auto& e : entries) {
    auto src = g.row(e.row);
    auto dst = out.row(e.col);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] += e.coefficient * src[c];
  }
  return out;
}

Matrix RelationAdjacency::dense() const {
  Matrix m(num_nodes, num_nodes);
  for (const auto& e : entries) m(e.row, e.col) += e.coefficient;
  return m;
}

RelationAdjacency normalize_adjacency(std::size_t num_nodes, std::span<const WeightedEdge> edges,
                                      ConvKind mode, EntityCategory category) {
  RelationAdjacency adj;
  adj.category = category;
  adj.num_nodes = num_nodes;
  adj.num_edges = edges.size();
  adj.weighted = mode == ConvKind::GCN;

  for (const auto& e : edges) {
    if (e.i >= num_nodes || e.j >= num_nodes) throw ValidationError("edge endpoint out of range");
    if (e.i == e.j) throw ValidationError("self-loop in relation edge list");
    if (e.weight < 0.0 || !std::isfinite(e.weight)) {
      throw ValidationError("negative or non-finite edge weight");
    }
  }

  if (mode == ConvKind::GCN) {
    std::vector<double> degree(num_nodes, 1.0);
    for (const auto& e : edges) {
      degree[e.i] += e.weight;
      degree[e.j] += e.weight;
    }
    std::vector<double> inv_sqrt(num_nodes);
    for (std::size_t n = 0; n < num_nodes; ++n) inv_sqrt[n] = 1.0 / std::sqrt(degree[n]);
    adj.entries.reserve(num_nodes + 2 * edges.size());
    for (std::uint32_t n = 0; n < num_nodes; ++n) {
      adj.entries.push_back({n, n, inv_sqrt[n] * inv_sqrt[n]});
    }
    for (const auto& e : edges) {
      const double c = e.weight * inv_sqrt[e.i] * inv_sqrt[e.j];
      adj.entries.push_back({e.i, e.j, c});
      adj.entries.push_back({e.j, e.i, c});
    }
  } else {
    std::vector<std::size_t> degree(num_nodes, 0);
    for (const auto& e : edges) {
      degree[e.i] += 1;
      degree[e.j] += 1;
    }
    adj.entries.reserve(2 * edges.size());
    for (const auto& e : edges) {
      adj.entries.push_back({e.i, e.j, 1.0 / static_cast<double>(degree[e.i])});
      adj.entries.push_back({e.j, e.i, 1.0 / static_cast<double>(degree[e.j])});
    }
  }
  std::sort(adj.entries.begin(), adj.entries.end(), [](const auto& a, const auto& b) {
    return std::pair(a.row, a.col) < std::pair(b.row, b.col);
  });
  return adj;
}

AdjacencySet build_adjacency(const HeteroGraph& graph, ConvKind mode) {
  AdjacencySet set;
  for (auto cat : kAllCategories) {
    set.emplace(cat, normalize_adjacency(graph.num_nodes(), graph.relation(cat), mode, cat));
  }
  return set;
}

// ---------------------------------------------------------------------------

namespace {

Parameter glorot(std::string name, std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Parameter p{std::move(name), Matrix(rows, cols), Matrix(rows, cols)};
  for (auto& v : p.value.values()) v = dist(rng);
  return p;
}

void accumulate(Matrix& dst, const Matrix& src) { add_inplace(dst, src); }

}  // namespace

HeteroConvLayer::HeteroConvLayer(ConvKind kind, std::vector<EntityCategory> relations,
                                 std::size_t in_dim, std::size_t out_dim, Activation activation,
                                 std::mt19937_64& rng, std::string name_prefix)
    : kind_(kind),
      relations_(std::move(relations)),
      in_dim_(in_dim),
      out_dim_(out_dim),
      activation_(activation),
      bias_{name_prefix + ".bias", Matrix(1, out_dim), Matrix(1, out_dim)} {
  if (in_dim == 0 || out_dim == 0) throw ValidationError("layer widths must be positive");
  if (kind_ == ConvKind::RGCN) {
    self_weight_ = glorot(name_prefix + ".W_self", in_dim, out_dim, rng);
  }
  for (auto r : relations_) {
    weights_.push_back(glorot(name_prefix + ".W_" + std::string(category_key(r)), in_dim, out_dim, rng));
  }
}

std::vector<Parameter*> HeteroConvLayer::parameters() {
  std::vector<Parameter*> out;
  if (self_weight_) out.push_back(&*self_weight_);
  for (auto& w : weights_) out.push_back(&w);
  out.push_back(&bias_);
  return out;
}

Matrix HeteroConvLayer::forward(const Matrix& h, const AdjacencySet& adjacency) {
  if (h.cols() != in_dim_) {
    throw ValidationError("layer input has " + std::to_string(h.cols()) + " columns, expected " +
                          std::to_string(in_dim_));
  }
  if (!h.all_finite()) throw ValidationError("non-finite values in layer input");
  const std::size_t n = h.rows();

  Matrix z(n, out_dim_);
  aggregated_.assign(relations_.size(), std::nullopt);
  for (std::size_t r = 0; r < relations_.size(); ++r) {
    auto it = adjacency.find(relations_[r]);
    if (it == adjacency.end()) {
      throw ValidationError("no adjacency for relation " + std::string(category_key(relations_[r])));
    }
    const auto& adj = it->second;
    if (adj.num_nodes != n) throw ValidationError("adjacency node count differs from feature rows");
    if (adj.num_edges == 0) continue;
    Matrix ah = adj.apply(h);
    add_inplace(z, matmul(ah, weights_[r].value));
    aggregated_[r] = std::move(ah);
  }
  if (self_weight_) add_inplace(z, matmul(h, self_weight_->value));
  for (std::size_t i = 0; i < n; ++i) {
    auto row = z.row(i);
    for (std::size_t c = 0; c < out_dim_; ++c) row[c] += bias_.value(0, c);
  }

  Matrix out(n, out_dim_);
  for (std::size_t k = 0; k < z.size(); ++k) out.values()[k] = activate(activation_, z.values()[k]);
  if (!out.all_finite()) throw Error("non-finite layer output");

  input_ = h;
  pre_activation_ = std::move(z);
  adjacency_ = adjacency;
  has_forward_ = true;
  return out;
}

Matrix HeteroConvLayer::backward(const Matrix& grad_out) {
  if (!has_forward_) throw UsageError("backward called before forward");
  require_shape(grad_out, pre_activation_.rows(), out_dim_, "layer backward gradient");

  Matrix dz(grad_out.rows(), out_dim_);
  for (std::size_t k = 0; k < dz.size(); ++k) {
    dz.values()[k] = grad_out.values()[k] * activate_derivative(activation_, pre_activation_.values()[k]);
  }
  for (std::size_t i = 0; i < dz.rows(); ++i) {
    for (std::size_t c = 0; c < out_dim_; ++c) bias_.grad(0, c) += dz(i, c);
  }

  Matrix dh(input_.rows(), in_dim_);
  if (self_weight_) {
    accumulate(self_weight_->grad, matmul_tn(input_, dz));
    add_inplace(dh, matmul_nt(dz, self_weight_->value));
  }
  for (std::size_t r = 0; r < relations_.size(); ++r) {
    if (!aggregated_[r]) continue;
    accumulate(weights_[r].grad, matmul_tn(*aggregated_[r], dz));
    const auto& adj = adjacency_.at(relations_[r]);
    add_inplace(dh, adj.apply_transpose(matmul_nt(dz, weights_[r].value)));
  }
  return dh;
}

HeteroGnn::HeteroGnn(const ModelSpec& spec, std::vector<EntityCategory> relations,
                     std::size_t in_dim, std::uint64_t seed)
    : spec_(spec), relations_(std::move(relations)), in_dim_(in_dim) {
  if (spec.depth < 1) throw ValidationError("depth must be >= 1");
  if (spec.hidden < 1) throw ValidationError("hidden width must be >= 1");
  std::mt19937_64 rng(seed);
  std::size_t width = in_dim;
  for (std::size_t l = 0; l < spec.depth; ++l) {
    layers_.emplace_back(spec.conv, relations_, width, spec.hidden, spec.activation, rng,
                         "layer" + std::to_string(l));
    width = spec.hidden;
  }
}

std::vector<std::size_t> HeteroGnn::widths() const {
  std::vector<std::size_t> w{in_dim_};
  for (const auto& l : layers_) w.push_back(l.out_dim());
  return w;
}

Matrix HeteroGnn::forward(const Matrix& x, const AdjacencySet& adjacency) {
  Matrix h = x;
  for (auto& layer : layers_) h = layer.forward(h, adjacency);
  return h;
}

Matrix HeteroGnn::backward(const Matrix& grad_out) {
  Matrix g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->backward(g);
  return g;
}

std::vector<Parameter*> HeteroGnn::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : layers_) {
    auto p = layer.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

void HeteroGnn::zero_grad() {
  for (auto* p : parameters()) p->grad.fill(0.0);
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::string_view kCheckpointMagic = "TGC1";
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  detail::BinaryWriter w;
  w.put_bytes(kCheckpointMagic);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put_string(ckpt.header.dump());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    w.put_string(t.name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.value.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.value.cols()));
    for (double v : t.value.values()) w.put<float>(static_cast<float>(v));
  }
  return w.data();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  detail::BinaryReader r(bytes);
  if (r.get_bytes(4, "magic") != kCheckpointMagic) throw FormatError(0, "bad checkpoint magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError(4, "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const std::size_t header_offset = r.offset();
  try {
    ckpt.header = json::parse(r.get_string("header"));
  } catch (const json::parse_error& e) {
    throw FormatError(header_offset, std::string("checkpoint header is not JSON: ") + e.what());
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t t = 0; t < count; ++t) {
    NamedTensor nt;
    nt.name = r.get_string("tensor name");
    const std::size_t rows = r.get<std::uint32_t>("rows");
    const std::size_t cols = r.get<std::uint32_t>("cols");
    nt.value = Matrix(rows, cols);
    for (auto& v : nt.value.values()) v = r.get<float>("tensor payload");
    ckpt.tensors.push_back(std::move(nt));
  }
  if (!r.at_end()) throw FormatError(r.offset(), "trailing bytes after checkpoint");
  return ckpt;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  detail::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file(path));
}

}  // namespace talent
