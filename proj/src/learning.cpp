#include "talentgraph/learning.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "io_util.hpp"
#include "talentgraph/errors.hpp"
#include "talentgraph/evaluation.hpp"

namespace talent {

using nlohmann::json;

namespace {

std::uint64_t string_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void check_stage(int stage) {
  if (stage < 0 || stage >= static_cast<int>(kNumStages)) {
    throw ValidationError("stage " + std::to_string(stage) + " outside 0..3");
  }
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

std::vector<double> targets_for(HeadKind kind, int stage) {
  if (kind == HeadKind::Ordinal) {
    auto t = ordinal_targets(stage);
    return {t.begin(), t.end()};
  }
  auto t = multilabel_targets(stage);
  return {t.begin(), t.end()};
}

}  // namespace

// ---------------------------------------------------------------------------
// Splits

Fold SplitAssignment::at(const std::string& candidate_id, const std::string& selection_id) const {
  auto it = folds.find(PairKey{candidate_id, selection_id});
  if (it == folds.end()) {
    throw ValidationError("pair (" + candidate_id + ", " + selection_id + ") not in split");
  }
  return it->second;
}

std::size_t SplitAssignment::count(Fold fold) const {
  return static_cast<std::size_t>(
      std::count_if(folds.begin(), folds.end(), [&](const auto& kv) { return kv.second == fold; }));
}

SplitAssignment stratified_split(const std::vector<SelectionOutcome>& outcomes, double train_ratio,
                                 std::uint64_t seed) {
  if (outcomes.empty()) throw ValidationError("stratified_split: no outcomes");
  if (!(train_ratio > 0.0 && train_ratio <= 1.0)) {
    throw ValidationError("stratified_split: ratio must lie in (0, 1]");
  }
  std::map<std::pair<std::string, int>, std::vector<std::string>> cells;
  std::set<PairKey> seen;
  for (const auto& o : outcomes) {
    validate_outcome(o);
    if (!seen.insert(PairKey{o.candidate_id, o.selection_id}).second) {
      throw ValidationError("duplicate pair (" + o.candidate_id + ", " + o.selection_id + ")");
    }
    cells[{o.selection_id, o.stage}].push_back(o.candidate_id);
  }

  SplitAssignment split;
  split.seed = seed;
  for (auto& [cell, members] : cells) {
    std::sort(members.begin(), members.end());
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(string_hash(cell.first)),
                      static_cast<std::uint32_t>(string_hash(cell.first) >> 32),
                      static_cast<std::uint32_t>(cell.second)};
    std::mt19937_64 rng(seq);
    std::shuffle(members.begin(), members.end(), rng);

    const double expected = static_cast<double>(members.size()) * (1.0 - train_ratio);
    auto n_test = static_cast<std::size_t>(std::floor(expected + 1e-9));
    const double remainder = expected - static_cast<double>(n_test);
    if (remainder > 1e-9) {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      if (u(rng) < remainder) ++n_test;
    }
    for (std::size_t m = 0; m < members.size(); ++m) {
      split.folds[PairKey{members[m], cell.first}] = m < n_test ? Fold::Test : Fold::Train;
    }
  }
  return split;
}

void write_split(const SplitAssignment& split, const std::filesystem::path& path) {
  json assignments = json::array();
  for (const auto& [key, fold] : split.folds) {
    assignments.push_back({{"candidate", key.candidate_id},
                           {"selection", key.selection_id},
                           {"fold", fold == Fold::Train ? "train" : "test"}});
  }
  json obj = {{"seed", split.seed}, {"assignments", std::move(assignments)}};
  detail::write_file(path, obj.dump() + "\n");
}

SplitAssignment read_split(const std::filesystem::path& path) {
  json obj;
  try {
    obj = json::parse(detail::read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(1, e.what());
  }
  SplitAssignment split;
  try {
    split.seed = obj.at("seed").get<std::uint64_t>();
    for (const auto& a : obj.at("assignments")) {
      const auto fold = a.at("fold").get<std::string>();
      if (fold != "train" && fold != "test") throw ValidationError("fold must be train or test");
      split.folds[PairKey{a.at("candidate").get<std::string>(), a.at("selection").get<std::string>()}] =
          fold == "train" ? Fold::Train : Fold::Test;
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("split.json: ") + e.what());
  }
  return split;
}

// ---------------------------------------------------------------------------
// Targets and heads

std::array<double, 3> ordinal_targets(int stage) {
  check_stage(stage);
  return {stage > 0 ? 1.0 : 0.0, stage > 1 ? 1.0 : 0.0, stage > 2 ? 1.0 : 0.0};
}

std::array<double, 4> multilabel_targets(int stage) {
  check_stage(stage);
  return {1.0, stage >= 1 ? 1.0 : 0.0, stage >= 2 ? 1.0 : 0.0, stage >= 3 ? 1.0 : 0.0};
}

std::string_view to_string(HeadKind kind) {
  return kind == HeadKind::Ordinal ? "ordinal" : "multilabel";
}

HeadKind parse_head_kind(std::string_view s) {
  if (s == "ordinal") return HeadKind::Ordinal;
  if (s == "multilabel") return HeadKind::Multilabel;
  throw ValidationError("unknown head kind '" + std::string(s) + "'");
}

TaskHead TaskHead::make(std::string selection_id, HeadKind kind, std::size_t hidden,
                        std::mt19937_64& rng) {
  TaskHead head;
  head.selection_id = std::move(selection_id);
  head.kind = kind;
  const std::size_t outputs = kind == HeadKind::Ordinal ? 1 : 4;
  const std::size_t biases = kind == HeadKind::Ordinal ? 3 : 4;
  const double limit = std::sqrt(6.0 / static_cast<double>(hidden + outputs));
  std::uniform_real_distribution<double> dist(-limit, limit);
  head.weight = {"head." + head.selection_id + ".weight", Matrix(hidden, outputs),
                 Matrix(hidden, outputs)};
  for (auto& v : head.weight.value.values()) v = dist(rng);
  head.bias = {"head." + head.selection_id + ".bias", Matrix(1, biases), Matrix(1, biases)};
  return head;
}

std::array<double, 3> TaskHead::thresholds() const {
  const double b1 = bias.value(0, 0);
  const double b2 = b1 + softplus(bias.value(0, 1));
  const double b3 = b2 + softplus(bias.value(0, 2));
  return {b1, b2, b3};
}

std::vector<double> TaskHead::logits(std::span<const double> h) const {
  if (h.size() != weight.value.rows()) throw ValidationError("head input width mismatch");
  if (kind == HeadKind::Ordinal) {
    double score = 0.0;
    for (std::size_t d = 0; d < h.size(); ++d) score += weight.value(d, 0) * h[d];
    const auto b = thresholds();
    return {score - b[0], score - b[1], score - b[2]};
  }
  std::vector<double> z(4);
  for (std::size_t k = 0; k < 4; ++k) {
    double s = bias.value(0, k);
    for (std::size_t d = 0; d < h.size(); ++d) s += weight.value(d, k) * h[d];
    z[k] = s;
  }
  return z;
}

std::vector<double> TaskHead::probabilities(std::span<const double> h) const {
  auto z = logits(h);
  for (auto& v : z) v = sigmoid(v);
  return z;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double bce_with_logits(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

double task_loss(std::span<const double> h, const TaskHead& head, int stage) {
  const auto z = head.logits(h);
  const auto y = targets_for(head.kind, stage);
  double loss = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) loss += bce_with_logits(z[k], y[k]);
  if (!std::isfinite(loss)) throw Error("non-finite task loss");
  return loss;
}

double task_loss_backward(std::span<const double> h, TaskHead& head, int stage, double scale,
                          std::span<double> grad_h) {
  const auto z = head.logits(h);
  const auto y = targets_for(head.kind, stage);
  double loss = 0.0;
  std::vector<double> dz(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    loss += bce_with_logits(z[k], y[k]);
    dz[k] = scale * (sigmoid(z[k]) - y[k]);
  }
  if (!std::isfinite(loss)) throw Error("non-finite task loss");
  const std::size_t hidden = h.size();

  if (head.kind == HeadKind::Ordinal) {
    // z_k = a^T h - b_k
    const double dscore = dz[0] + dz[1] + dz[2];
    for (std::size_t d = 0; d < hidden; ++d) {
      head.weight.grad(d, 0) += dscore * h[d];
      if (!grad_h.empty()) grad_h[d] += dscore * head.weight.value(d, 0);
    }
    const double db1 = -dz[0], db2 = -dz[1], db3 = -dz[2];
    head.bias.grad(0, 0) += db1 + db2 + db3;
    head.bias.grad(0, 1) += sigmoid(head.bias.value(0, 1)) * (db2 + db3);
    head.bias.grad(0, 2) += sigmoid(head.bias.value(0, 2)) * db3;
  } else {
    for (std::size_t k = 0; k < 4; ++k) {
      head.bias.grad(0, k) += dz[k];
      for (std::size_t d = 0; d < hidden; ++d) {
        head.weight.grad(d, k) += dz[k] * h[d];
        if (!grad_h.empty()) grad_h[d] += dz[k] * head.weight.value(d, k);
      }
    }
  }
  return scale * loss;
}

std::vector<double> suffix_max(std::span<const double> p) {
  std::vector<double> out(p.begin(), p.end());
  for (std::size_t k = out.size(); k-- > 1;) out[k - 1] = std::max(out[k - 1], out[k]);
  return out;
}

int predict_stage(HeadKind kind, std::span<const double> p) {
  if (kind == HeadKind::Ordinal) {
    return static_cast<int>(std::count_if(p.begin(), p.end(), [](double v) { return v > 0.5; }));
  }
  const auto m = suffix_max(p);
  for (std::size_t k = m.size(); k-- > 1;) {
    if (m[k] > 0.5) return static_cast<int>(k);
  }
  return 0;
}

double score_high(HeadKind kind, std::span<const double> p) {
  if (kind == HeadKind::Ordinal) return p[1];
  return suffix_max(p)[2];
}

// ---------------------------------------------------------------------------
// Model

std::vector<Parameter*> Model::parameters() {
  auto out = trunk.parameters();
  for (auto& h : heads) {
    out.push_back(&h.weight);
    out.push_back(&h.bias);
  }
  return out;
}

void Model::zero_grad() {
  for (auto* p : parameters()) p->grad.fill(0.0);
}

std::optional<std::size_t> Model::head_index(const std::string& selection_id) const {
  auto it = std::lower_bound(heads.begin(), heads.end(), selection_id,
                             [](const TaskHead& h, const std::string& s) { return h.selection_id < s; });
  if (it == heads.end() || it->selection_id != selection_id) return std::nullopt;
  return static_cast<std::size_t>(it - heads.begin());
}

Model make_model(const ModelSpec& spec, HeadKind head_kind, std::vector<std::string> selections,
                 std::size_t in_dim, std::uint64_t seed) {
  std::sort(selections.begin(), selections.end());
  selections.erase(std::unique(selections.begin(), selections.end()), selections.end());
  std::vector<EntityCategory> relations(kAllCategories.begin(), kAllCategories.end());
  Model model{HeteroGnn(spec, relations, in_dim, seed), head_kind, {}};
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  for (auto& sel : selections) model.heads.push_back(TaskHead::make(sel, head_kind, spec.hidden, rng));
  return model;
}

Checkpoint Model::to_checkpoint() {
  Checkpoint ckpt;
  json relations = json::array();
  for (auto r : trunk.relations()) relations.push_back(static_cast<int>(r));
  json selections = json::array();
  for (const auto& h : heads) selections.push_back(h.selection_id);
  ckpt.header = {{"spec", to_json(trunk.spec())},
                 {"relations", std::move(relations)},
                 {"widths", trunk.widths()},
                 {"head", to_string(head_kind)},
                 {"selections", std::move(selections)}};
  for (auto* p : parameters()) ckpt.tensors.push_back({p->name, p->value});
  return ckpt;
}

Model Model::from_checkpoint(const Checkpoint& ckpt) {
  try {
    const auto& hdr = ckpt.header;
    const auto spec = model_spec_from_json(hdr.at("spec"));
    std::vector<EntityCategory> relations;
    for (const auto& r : hdr.at("relations")) relations.push_back(category_from_code(r.get<int>()));
    const auto widths = hdr.at("widths").get<std::vector<std::size_t>>();
    if (widths.empty()) throw ValidationError("checkpoint widths empty");
    const auto head_kind = parse_head_kind(hdr.at("head").get<std::string>());
    auto selections = hdr.at("selections").get<std::vector<std::string>>();

    Model model{HeteroGnn(spec, relations, widths.front(), 0), head_kind, {}};
    std::mt19937_64 rng(0);
    for (auto& sel : selections) {
      model.heads.push_back(TaskHead::make(sel, head_kind, spec.hidden, rng));
    }
    std::map<std::string, const Matrix*> by_name;
    for (const auto& t : ckpt.tensors) by_name[t.name] = &t.value;
    for (auto* p : model.parameters()) {
      auto it = by_name.find(p->name);
      if (it == by_name.end()) throw ValidationError("checkpoint lacks tensor " + p->name);
      require_shape(*it->second, p->value.rows(), p->value.cols(), p->name.c_str());
      p->value = *it->second;
    }
    if (by_name.size() != model.parameters().size()) {
      throw ValidationError("checkpoint has unexpected tensors");
    }
    return model;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint header: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Training

double forward_backward(Model& model, const Matrix& features, const AdjacencySet& adjacency,
                        std::span<const TrainingExample> examples, bool with_gradients) {
  if (with_gradients) model.zero_grad();
  const Matrix h = model.trunk.forward(features, adjacency);
  double total_weight = 0.0;
  for (const auto& ex : examples) total_weight += ex.weight;
  if (examples.empty() || total_weight <= 0.0) return 0.0;

  double loss = 0.0;
  if (!with_gradients) {
    for (const auto& ex : examples) {
      loss += ex.weight * task_loss(h.row(ex.node), model.heads.at(ex.head), ex.stage);
    }
    return loss / total_weight;
  }
  Matrix grad_h(h.rows(), h.cols());
  for (const auto& ex : examples) {
    loss += task_loss_backward(h.row(ex.node), model.heads.at(ex.head), ex.stage,
                               ex.weight / total_weight, grad_h.row(ex.node));
  }
  model.trunk.backward(grad_h);
  return loss;
}

std::map<std::pair<std::string, int>, double> class_weights(
    const std::vector<SelectionOutcome>& pairs) {
  std::map<std::string, std::array<std::size_t, kNumStages>> counts;
  for (const auto& o : pairs) counts[o.selection_id][static_cast<std::size_t>(o.stage)] += 1;
  std::map<std::pair<std::string, int>, double> weights;
  for (const auto& [sel, c] : counts) {
    std::size_t total = 0;
    std::size_t present = 0;
    for (auto v : c) {
      total += v;
      present += v > 0 ? 1 : 0;
    }
    for (std::size_t s = 0; s < kNumStages; ++s) {
      if (c[s] == 0) continue;
      weights[{sel, static_cast<int>(s)}] =
          static_cast<double>(total) / (static_cast<double>(present) * static_cast<double>(c[s]));
    }
  }
  return weights;
}

Adam::Adam(std::vector<Parameter*> params, const TrainConfig& cfg)
    : params_(std::move(params)),
      lr_(cfg.learning_rate),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.epsilon) {
  for (auto* p : params_) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& value = params_[i]->value.values();
    const auto& grad = params_[i]->grad.values();
    auto& m = m_[i].values();
    auto& v = v_[i].values();
    for (std::size_t k = 0; k < value.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * grad[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * grad[k] * grad[k];
      value[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

namespace {

std::vector<std::string> selections_of(const std::vector<SelectionOutcome>& outcomes) {
  std::set<std::string> s;
  for (const auto& o : outcomes) s.insert(o.selection_id);
  return {s.begin(), s.end()};
}

std::size_t require_node(const HeteroGraph& graph, const std::string& candidate_id) {
  auto node = graph.node_index(candidate_id);
  if (!node) throw ValidationError("candidate " + candidate_id + " is not a graph node");
  return *node;
}

}  // namespace

TrainResult train(const HeteroGraph& graph, const std::vector<SelectionOutcome>& outcomes,
                  const SplitAssignment& split, const ModelSpec& spec, const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ValidationError("epochs must be >= 1");
  if (graph.features.rows() != graph.num_nodes() || graph.features.cols() == 0) {
    throw ValidationError("graph has no node features attached");
  }
  Model model = make_model(spec, cfg.head, selections_of(outcomes), graph.features.cols(), cfg.seed);
  const AdjacencySet adjacency = build_adjacency(graph, spec.conv);

  std::vector<SelectionOutcome> train_pairs;
  for (const auto& o : outcomes) {
    require_node(graph, o.candidate_id);
    if (split.at(o.candidate_id, o.selection_id) == Fold::Train) train_pairs.push_back(o);
  }
  const auto weights = class_weights(train_pairs);
  std::vector<TrainingExample> examples;
  examples.reserve(train_pairs.size());
  for (const auto& o : train_pairs) {
    examples.push_back({require_node(graph, o.candidate_id), *model.head_index(o.selection_id), o.stage,
                        cfg.class_weighting ? weights.at({o.selection_id, o.stage}) : 1.0});
  }

  TrainResult result{std::move(model), {}};
  Adam adam(result.model.parameters(), cfg);
  result.loss_trace.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss = 0.0;
    try {
      loss = forward_backward(result.model, graph.features, adjacency, examples, true);
    } catch (const Error& e) {
      throw TrainingDiverged(epoch, e.what());
    }
    if (!std::isfinite(loss)) throw TrainingDiverged(epoch, "loss is not finite");
    result.loss_trace.push_back(loss);
    adam.step();
  }
  return result;
}

std::vector<PairPrediction> predict(Model& model, const HeteroGraph& graph,
                                    const std::vector<PairKey>& pairs) {
  const AdjacencySet adjacency = build_adjacency(graph, model.trunk.spec().conv);
  const Matrix h = model.trunk.forward(graph.features, adjacency);
  std::vector<PairPrediction> out;
  out.reserve(pairs.size());
  for (const auto& key : pairs) {
    const auto node = require_node(graph, key.candidate_id);
    const auto head = model.head_index(key.selection_id);
    if (!head) throw ValidationError("model has no head for selection " + key.selection_id);
    PairPrediction p;
    p.candidate_id = key.candidate_id;
    p.selection_id = key.selection_id;
    p.probabilities = model.heads[*head].probabilities(h.row(node));
    p.stage = predict_stage(model.head_kind, p.probabilities);
    p.score_high = score_high(model.head_kind, p.probabilities);
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Search

TrialSample sample_trial(const SearchGrid& grid, ConvKind conv, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> hidden(grid.hidden_min, grid.hidden_max);
  std::uniform_int_distribution<std::size_t> depth(grid.depth_min, grid.depth_max);
  std::uniform_real_distribution<double> log_lr(std::log(grid.lr_min), std::log(grid.lr_max));
  std::uniform_int_distribution<std::size_t> act(0, grid.activations.size() - 1);
  TrialSample s;
  s.spec.conv = conv;
  s.spec.hidden = hidden(rng);
  s.spec.depth = depth(rng);
  s.learning_rate = std::clamp(std::exp(log_lr(rng)), grid.lr_min, grid.lr_max);
  s.spec.activation = grid.activations[act(rng)];
  return s;
}

std::vector<TrialSample> sample_trials(const SearchGrid& grid, ConvKind conv, std::size_t trials,
                                       std::uint64_t seed) {
  if (trials < 1) throw ValidationError("random search needs at least one trial");
  if (grid.activations.empty()) throw ValidationError("search grid has no activations");
  std::mt19937_64 rng(seed);
  std::vector<TrialSample> out;
  for (std::size_t t = 0; t < trials; ++t) out.push_back(sample_trial(grid, conv, rng));
  return out;
}

SearchResult random_search(const HeteroGraph& graph, const std::vector<SelectionOutcome>& outcomes,
                           const SplitAssignment& split, const SearchGrid& grid,
                           std::size_t trials, std::uint64_t seed, ConvKind conv,
                           const TrainConfig& base) {
  const auto samples = sample_trials(grid, conv, trials, seed);

  std::vector<SelectionOutcome> train_pairs;
  for (const auto& o : outcomes) {
    if (split.at(o.candidate_id, o.selection_id) == Fold::Train) train_pairs.push_back(o);
  }
  if (train_pairs.empty()) throw ValidationError("random search: no training pairs");
  const auto validation = stratified_split(train_pairs, 0.9, seed);
  SplitAssignment inner;
  inner.seed = seed;
  for (const auto& o : outcomes) {
    const PairKey key{o.candidate_id, o.selection_id};
    auto it = validation.folds.find(key);
    inner.folds[key] = (it != validation.folds.end() && it->second == Fold::Train) ? Fold::Train
                                                                                   : Fold::Test;
  }
  std::vector<PairKey> val_keys;
  std::map<PairKey, int> val_truth;
  for (const auto& o : train_pairs) {
    const PairKey key{o.candidate_id, o.selection_id};
    if (validation.folds.at(key) == Fold::Test) {
      val_keys.push_back(key);
      val_truth[key] = o.stage;
    }
  }

  SearchResult result;
  double best = -1.0;
  for (std::size_t t = 0; t < samples.size(); ++t) {
    TrainConfig cfg = base;
    cfg.learning_rate = samples[t].learning_rate;
    cfg.seed = base.seed + t;
    double objective = 0.0;
    try {
      auto trained = train(graph, outcomes, inner, samples[t].spec, cfg);
      if (!val_keys.empty()) {
        std::vector<EvalRecord> records;
        for (const auto& p : predict(trained.model, graph, val_keys)) {
          records.push_back({p.candidate_id, p.selection_id, val_truth.at({p.candidate_id, p.selection_id}),
                             p.stage, p.score_high});
        }
        objective = balanced_accuracy(records);
      }
    } catch (const TrainingDiverged&) {
      objective = 0.0;
    }
    result.trials.push_back({t, samples[t], objective});
    if (objective > best) {
      best = objective;
      result.best_index = t;
      result.best_spec = samples[t].spec;
      result.best_config = cfg;
    }
  }
  return result;
}

}  // namespace talent
