#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "talentgraph/gnn_core.hpp"
#include "talentgraph/profile_store.hpp"
#include "talentgraph/similarity_graph.hpp"

namespace talent {

// ---------------------------------------------------------------------------
// Splits

enum class Fold { Train, Test };

struct PairKey {
  std::string candidate_id;
  std::string selection_id;
  auto operator<=>(const PairKey&) const = default;
};

struct SplitAssignment {
  std::uint64_t seed = 0;
  std::map<PairKey, Fold> folds;

  Fold at(const std::string& candidate_id, const std::string& selection_id) const;
  std::size_t count(Fold fold) const;
};

/// Stratifies by (selection, stage). Each cell of n pairs sends floor(n * (1 - ratio))
/// pairs to test plus one more with probability equal to the fractional remainder,
/// so every cell is within one sample of the target and singletons land in test
/// with probability 1 - ratio. Cells are shuffled with a seed derived from
/// (seed, selection, stage), so one cell's assignment does not depend on others.
SplitAssignment stratified_split(const std::vector<SelectionOutcome>& outcomes,
                                 double train_ratio = 0.8, std::uint64_t seed = 0);

void write_split(const SplitAssignment& split, const std::filesystem::path& path);
SplitAssignment read_split(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Targets and heads

/// [y > 0, y > 1, y > 2]
std::array<double, 3> ordinal_targets(int stage);
/// Indicator k is 1 iff stage >= k.
std::array<double, 4> multilabel_targets(int stage);

enum class HeadKind { Ordinal, Multilabel };

std::string_view to_string(HeadKind kind);
HeadKind parse_head_kind(std::string_view s);

/// Per-selection output head.
///   Ordinal: shared score a^T h against thresholds b1 <= b2 <= b3, where
///     b1 = raw0, b2 = b1 + softplus(raw1), b3 = b2 + softplus(raw2).
///   Multilabel: four independent logits W^T h + c.
struct TaskHead {
  std::string selection_id;
  HeadKind kind = HeadKind::Multilabel;
  Parameter weight;  // hidden x 1 (ordinal) or hidden x 4 (multilabel)
  Parameter bias;    // 1 x 3 raw thresholds (ordinal) or 1 x 4 (multilabel)

  static TaskHead make(std::string selection_id, HeadKind kind, std::size_t hidden,
                       std::mt19937_64& rng);

  std::size_t num_outputs() const { return kind == HeadKind::Ordinal ? 3 : 4; }
  std::array<double, 3> thresholds() const;
  std::vector<double> logits(std::span<const double> h) const;
  std::vector<double> probabilities(std::span<const double> h) const;
};

double sigmoid(double z);
/// -[y log s(z) + (1-y) log(1 - s(z))] evaluated without overflow.
double bce_with_logits(double z, double y);

/// Sum of binary cross-entropies over the head's outputs for one node.
double task_loss(std::span<const double> h, const TaskHead& head, int stage);

/// Same loss scaled by `scale`; adds scale * dLoss to the head's parameter
/// gradients and to grad_h.
double task_loss_backward(std::span<const double> h, TaskHead& head, int stage, double scale,
                          std::span<double> grad_h);

/// Ordinal: number of probabilities above 0.5. Multilabel: largest k whose
/// suffix-max probability max_{j>=k} p_j exceeds 0.5, else 0.
int predict_stage(HeadKind kind, std::span<const double> probabilities);
/// P(stage >= 2): ordinal p[1]; multilabel suffix-max at index 2.
double score_high(HeadKind kind, std::span<const double> probabilities);
/// Multilabel probabilities made non-increasing by a running max from the top stage.
std::vector<double> suffix_max(std::span<const double> probabilities);

// ---------------------------------------------------------------------------
// Model and training

struct Model {
  HeteroGnn trunk;
  HeadKind head_kind = HeadKind::Multilabel;
  std::vector<TaskHead> heads;  // sorted by selection_id

  std::vector<Parameter*> parameters();
  void zero_grad();
  std::optional<std::size_t> head_index(const std::string& selection_id) const;

  Checkpoint to_checkpoint();
  static Model from_checkpoint(const Checkpoint& ckpt);
};

/// Trunk of `spec` over all five relations plus one head per selection.
Model make_model(const ModelSpec& spec, HeadKind head_kind, std::vector<std::string> selections,
                 std::size_t in_dim, std::uint64_t seed);

struct TrainConfig {
  int epochs = 300;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  HeadKind head = HeadKind::Multilabel;
  bool class_weighting = true;
};

struct TrainingExample {
  std::size_t node = 0;
  std::size_t head = 0;
  int stage = 0;
  double weight = 1.0;
};

/// Weighted mean task loss over `examples` after a full-graph forward pass.
/// With `with_gradients`, parameter gradients are zeroed and then filled.
double forward_backward(Model& model, const Matrix& features, const AdjacencySet& adjacency,
                        std::span<const TrainingExample> examples, bool with_gradients);

/// Inverse-frequency weights per (selection, stage) over the given pairs,
/// normalized so that the mean weight within each selection is 1.
std::map<std::pair<std::string, int>, double> class_weights(
    const std::vector<SelectionOutcome>& pairs);

class Adam {
 public:
  Adam(std::vector<Parameter*> params, const TrainConfig& cfg);
  void step();

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
};

struct TrainResult {
  Model model;
  std::vector<double> loss_trace;
};

/// Transductive training: full-graph forward each epoch, loss over train pairs only.
TrainResult train(const HeteroGraph& graph, const std::vector<SelectionOutcome>& outcomes,
                  const SplitAssignment& split, const ModelSpec& spec, const TrainConfig& cfg);

struct PairPrediction {
  std::string candidate_id;
  std::string selection_id;
  std::vector<double> probabilities;
  int stage = 0;
  double score_high = 0.0;
};

std::vector<PairPrediction> predict(Model& model, const HeteroGraph& graph,
                                    const std::vector<PairKey>& pairs);

// ---------------------------------------------------------------------------
// Hyperparameter search

struct SearchGrid {
  std::size_t hidden_min = 16;
  std::size_t hidden_max = 64;
  std::size_t depth_min = 1;
  std::size_t depth_max = 5;
  double lr_min = 1e-4;
  double lr_max = 1e-1;
  std::vector<Activation> activations = {Activation::LeakyReLU, Activation::ELU,
                                         Activation::Tanh, Activation::Sigmoid};
};

struct TrialSample {
  ModelSpec spec;
  double learning_rate = 0.0;
};

/// Uniform integers for widths/depth, log-uniform learning rate.
TrialSample sample_trial(const SearchGrid& grid, ConvKind conv, std::mt19937_64& rng);
std::vector<TrialSample> sample_trials(const SearchGrid& grid, ConvKind conv, std::size_t trials,
                                       std::uint64_t seed);

struct TrialResult {
  std::size_t index = 0;
  TrialSample sample;
  double objective = 0.0;  // validation balanced accuracy
};

struct SearchResult {
  ModelSpec best_spec;
  TrainConfig best_config;
  std::size_t best_index = 0;
  std::vector<TrialResult> trials;
};

/// Trains every sampled trial on the train fold minus a stratified 10% validation
/// slice and keeps the best validation balanced accuracy (ties: lowest index).
SearchResult random_search(const HeteroGraph& graph, const std::vector<SelectionOutcome>& outcomes,
                           const SplitAssignment& split, const SearchGrid& grid,
                           std::size_t trials, std::uint64_t seed, ConvKind conv,
                           const TrainConfig& base);

}  // namespace talent
