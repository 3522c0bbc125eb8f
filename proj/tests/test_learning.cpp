#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "talentgraph/errors.hpp"
#include "talentgraph/learning.hpp"
#include "test_util.hpp"

using namespace talent;

namespace {

std::vector<SelectionOutcome> cell(const std::string& sel, int stage, int n, int offset = 0) {
  std::vector<SelectionOutcome> out;
  for (int i = 0; i < n; ++i) out.push_back({"c" + std::to_string(1000 + offset + i), sel, stage});
  return out;
}

// Planted toy problem: stage follows the first feature, edges join candidates of equal stage.
struct Toy {
  HeteroGraph graph;
  std::vector<SelectionOutcome> outcomes;
};

Toy toy(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.3);
  Toy t;
  std::vector<int> stage(n);
  for (std::size_t i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "c%03zu", i);
    t.graph.nodes.push_back(buf);
    stage[i] = static_cast<int>(i % 4);
  }
  t.graph.features = Matrix(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    t.graph.features(i, 0) = stage[i] - 1.5 + noise(rng);
    t.graph.features(i, 1) = noise(rng);
    t.graph.features(i, 2) = 1.0;
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = i + 1; j < n; ++j) {
      if (stage[i] == stage[j] && (j - i) % 8 == 4) t.graph.edges[0].push_back({i, j, 0.6});
      if ((j - i) == 1) t.graph.edges[1].push_back({i, j, 0.3});
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    t.outcomes.push_back({t.graph.nodes[i], "sel01", stage[i]});
    if (i % 2 == 0) t.outcomes.push_back({t.graph.nodes[i], "sel02", std::min(3, stage[i] + 1) % 4});
  }
  return t;
}

std::vector<Matrix> snapshot(Model& m) {
  std::vector<Matrix> out;
  for (auto* p : m.parameters()) out.push_back(p->value);
  return out;
}

}  // namespace

TEST_CASE("ten stage-0 pairs split eight to two") {
  const auto split = stratified_split(cell("s1", 0, 10), 0.8, 3);
  CHECK(split.count(Fold::Train) == 8);
  CHECK(split.count(Fold::Test) == 2);
}

TEST_CASE("a singleton cell lands on one side, reproducibly, and both sides occur across seeds") {
  std::set<Fold> seen;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto outcomes = cell("s1", 0, 10);
    outcomes.push_back({"z", "s1", 3});
    const auto a = stratified_split(outcomes, 0.8, seed);
    const auto b = stratified_split(outcomes, 0.8, seed);
    CHECK(a.at("z", "s1") == b.at("z", "s1"));
    seen.insert(a.at("z", "s1"));
  }
  CHECK(seen.size() == 2);
}

TEST_CASE("split is a partition and every cell is within one sample of 20 percent") {
  std::vector<SelectionOutcome> outcomes;
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> size(1, 37);
  int offset = 0;
  for (const char* sel : {"s1", "s2", "s3"}) {
    for (int stage = 0; stage < 4; ++stage) {
      const int n = size(rng);
      auto c = cell(sel, stage, n, offset);
      offset += n;
      outcomes.insert(outcomes.end(), c.begin(), c.end());
    }
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto split = stratified_split(outcomes, 0.8, seed);
    CHECK(split.folds.size() == outcomes.size());
    CHECK(split.count(Fold::Train) + split.count(Fold::Test) == outcomes.size());
    std::map<std::pair<std::string, int>, std::pair<int, int>> cells;  // (test, total)
    for (const auto& o : outcomes) {
      auto& c = cells[{o.selection_id, o.stage}];
      c.second += 1;
      if (split.at(o.candidate_id, o.selection_id) == Fold::Test) c.first += 1;
    }
    for (const auto& [key, c] : cells) CHECK(std::abs(c.first - 0.2 * c.second) <= 1.0);
  }
}

TEST_CASE("split errors and file round-trip") {
  CHECK_THROWS_AS(stratified_split({}, 0.8, 0), ValidationError);
  auto dup = cell("s1", 0, 2);
  dup.push_back(dup.front());
  CHECK_THROWS_AS(stratified_split(dup, 0.8, 0), ValidationError);

  testutil::TempDir dir;
  const auto split = stratified_split(cell("s1", 1, 13), 0.8, 9);
  write_split(split, dir / "split.json");
  const auto back = read_split(dir / "split.json");
  CHECK(back.seed == split.seed);
  CHECK(back.folds == split.folds);
  CHECK_THROWS_AS(split.at("nobody", "s1"), ValidationError);
}

TEST_CASE("target encodings") {
  CHECK(ordinal_targets(0) == std::array<double, 3>{0, 0, 0});
  CHECK(ordinal_targets(2) == std::array<double, 3>{1, 1, 0});
  CHECK(ordinal_targets(3) == std::array<double, 3>{1, 1, 1});
  CHECK(multilabel_targets(0) == std::array<double, 4>{1, 0, 0, 0});
  CHECK(multilabel_targets(2) == std::array<double, 4>{1, 1, 1, 0});
  CHECK(multilabel_targets(3) == std::array<double, 4>{1, 1, 1, 1});
  CHECK_THROWS_AS(ordinal_targets(4), ValidationError);
  CHECK_THROWS_AS(multilabel_targets(-1), ValidationError);
}

TEST_CASE("ordinal loss at the thresholds is 3 ln 2") {
  std::mt19937_64 rng(2);
  auto head = TaskHead::make("s1", HeadKind::Ordinal, 4, rng);
  head.weight.value.fill(0.0);
  head.bias.value.values() = {0.0, -800.0, -800.0};
  const std::vector<double> h = {0.3, -1.0, 2.0, 0.5};
  for (int stage = 0; stage < 4; ++stage) {
    CHECK(task_loss(h, head, stage) == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-12));
  }
}

TEST_CASE("confident correct predictions have near-zero loss") {
  std::mt19937_64 rng(2);
  auto head = TaskHead::make("s1", HeadKind::Multilabel, 3, rng);
  head.weight.value.fill(0.0);
  head.bias.value.values() = {20.0, 20.0, -20.0, -20.0};
  const std::vector<double> h = {1.0, 2.0, 3.0};
  CHECK(task_loss(h, head, 1) < 1e-3);
  CHECK(task_loss(h, head, 3) > 10.0);
  CHECK(bce_with_logits(800.0, 1.0) == doctest::Approx(0.0));
  CHECK(std::isfinite(bce_with_logits(-800.0, 1.0)));
  CHECK(bce_with_logits(-800.0, 1.0) == doctest::Approx(800.0));
}

TEST_CASE("task loss gradients match central differences") {
  std::mt19937_64 rng(17);
  for (auto kind : {HeadKind::Ordinal, HeadKind::Multilabel}) {
    for (int stage = 0; stage < 4; ++stage) {
      auto head = TaskHead::make("s1", kind, 5, rng);
      std::normal_distribution<double> n(0.0, 1.0);
      for (auto& v : head.bias.value.values()) v = n(rng);
      std::vector<double> h(5);
      for (auto& v : h) v = n(rng);
      head.weight.grad.fill(0.0);
      head.bias.grad.fill(0.0);
      std::vector<double> grad_h(5, 0.0);
      const double loss = task_loss_backward(h, head, stage, 1.0, grad_h);
      CHECK(loss == doctest::Approx(task_loss(h, head, stage)));
      const auto check = oracle::check_gradients({&head.weight, &head.bias},
                                                 [&] { return task_loss(h, head, stage); }, 1e-5, 1e-6);
      CHECK(check.max_relative_error < 1e-4);
      for (std::size_t i = 0; i < h.size(); ++i) {
        const double saved = h[i];
        h[i] = saved + 1e-5;
        const double up = task_loss(h, head, stage);
        h[i] = saved - 1e-5;
        const double down = task_loss(h, head, stage);
        h[i] = saved;
        CHECK(oracle::relative_error(grad_h[i], (up - down) / 2e-5, 1e-6) < 1e-4);
      }
    }
  }
}

TEST_CASE("full model gradients match central differences") {
  const auto t = toy(10, 4);
  for (auto kind : {HeadKind::Ordinal, HeadKind::Multilabel}) {
    Model model = make_model({ConvKind::GCN, 5, 2, Activation::Tanh}, kind, {"sel01", "sel02"}, 3, 8);
    const auto adjacency = build_adjacency(t.graph, ConvKind::GCN);
    std::vector<TrainingExample> examples;
    for (std::size_t i = 0; i < t.outcomes.size(); ++i) {
      const auto& o = t.outcomes[i];
      examples.push_back({*t.graph.node_index(o.candidate_id), *model.head_index(o.selection_id), o.stage,
                          0.5 + 0.1 * static_cast<double>(i % 3)});
    }
    forward_backward(model, t.graph.features, adjacency, examples, true);
    const auto check = oracle::check_gradients(
        model.parameters(),
        [&] { return forward_backward(model, t.graph.features, adjacency, examples, false); }, 1e-5, 1e-6);
    INFO("worst " << check.worst_parameter);
    CHECK(check.max_relative_error < 1e-4);
  }
}

TEST_CASE("predict_stage decoding rules") {
  CHECK(predict_stage(HeadKind::Ordinal, std::vector<double>{0.9, 0.7, 0.2}) == 2);
  const std::vector<double> ml = {0.99, 0.4, 0.6, 0.1};
  CHECK(suffix_max(ml) == std::vector<double>{0.99, 0.6, 0.6, 0.1});
  CHECK(predict_stage(HeadKind::Multilabel, ml) == 2);
  CHECK(score_high(HeadKind::Multilabel, ml) == 0.6);
  CHECK(score_high(HeadKind::Ordinal, std::vector<double>{0.9, 0.7, 0.2}) == 0.7);
  CHECK(predict_stage(HeadKind::Multilabel, std::vector<double>{0.9, 0.4, 0.3, 0.2}) == 0);
  CHECK(predict_stage(HeadKind::Multilabel, std::vector<double>{0.1, 0.1, 0.1, 0.1}) == 0);
  CHECK(predict_stage(HeadKind::Ordinal, std::vector<double>{0.4, 0.3, 0.2}) == 0);
}

TEST_CASE("perfect targets decode to the original stage") {
  for (int stage = 0; stage < 4; ++stage) {
    const auto o = ordinal_targets(stage);
    const auto m = multilabel_targets(stage);
    CHECK(predict_stage(HeadKind::Ordinal, o) == stage);
    CHECK(predict_stage(HeadKind::Multilabel, m) == stage);
  }
}

TEST_CASE("ordinal probabilities are non-increasing for any input") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    auto head = TaskHead::make("s1", HeadKind::Ordinal, 4, rng);
    for (auto& v : head.bias.value.values()) v = n(rng);
    std::vector<double> h(4);
    for (auto& v : h) v = n(rng);
    const auto t = head.thresholds();
    CHECK(t[0] <= t[1]);
    CHECK(t[1] <= t[2]);
    const auto p = head.probabilities(h);
    CHECK(p[0] >= p[1]);
    CHECK(p[1] >= p[2]);
  }
}

TEST_CASE("class weights are inverse frequency with unit mean per selection") {
  auto pairs = cell("s1", 0, 6);
  const auto more = cell("s1", 2, 2, 50);
  pairs.insert(pairs.end(), more.begin(), more.end());
  const auto w = class_weights(pairs);
  CHECK(w.at({"s1", 0}) == doctest::Approx(8.0 / (2.0 * 6.0)));
  CHECK(w.at({"s1", 2}) == doctest::Approx(8.0 / (2.0 * 2.0)));
  CHECK(6 * w.at({"s1", 0}) + 2 * w.at({"s1", 2}) == doctest::Approx(8.0));
  CHECK(w.count({"s1", 1}) == 0);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const auto t = toy(16, 1);
  const auto split = stratified_split(t.outcomes, 0.8, 0);
  const ModelSpec spec{ConvKind::GCN, 8, 2, Activation::ELU};
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.learning_rate = 0.0;
  cfg.seed = 5;
  auto trained = train(t.graph, t.outcomes, split, spec, cfg);
  Model fresh = make_model(spec, cfg.head, {"sel01", "sel02"}, 3, cfg.seed);
  CHECK(snapshot(trained.model) == snapshot(fresh));
}

TEST_CASE("loss decreases on a planted problem and training is deterministic") {
  const auto t = toy(32, 2);
  const auto split = stratified_split(t.outcomes, 0.8, 0);
  for (auto head : {HeadKind::Ordinal, HeadKind::Multilabel}) {
    for (auto conv : {ConvKind::GCN, ConvKind::RGCN}) {
      TrainConfig cfg;
      cfg.epochs = 50;
      cfg.learning_rate = 0.01;
      cfg.head = head;
      const ModelSpec spec{conv, 16, 2, Activation::LeakyReLU};
      const auto a = train(t.graph, t.outcomes, split, spec, cfg);
      REQUIRE(a.loss_trace.size() == 50);
      CHECK(a.loss_trace.back() < a.loss_trace.front());
      const auto b = train(t.graph, t.outcomes, split, spec, cfg);
      CHECK(a.loss_trace == b.loss_trace);
    }
  }
}

TEST_CASE("test labels never influence training") {
  const auto t = toy(24, 3);
  const auto split = stratified_split(t.outcomes, 0.8, 1);
  auto perturbed = t.outcomes;
  int changed = 0;
  for (auto& o : perturbed) {
    if (split.at(o.candidate_id, o.selection_id) == Fold::Test) {
      o.stage = 3 - o.stage;
      ++changed;
    }
  }
  REQUIRE(changed > 0);
  TrainConfig cfg;
  cfg.epochs = 5;
  const ModelSpec spec{ConvKind::RGCN, 8, 2, Activation::Tanh};
  auto a = train(t.graph, t.outcomes, split, spec, cfg);
  auto b = train(t.graph, perturbed, split, spec, cfg);
  CHECK(a.loss_trace == b.loss_trace);
  CHECK(snapshot(a.model) == snapshot(b.model));
}

TEST_CASE("a selection with no train pairs keeps its head untouched") {
  const auto t = toy(16, 6);
  SplitAssignment split;
  for (const auto& o : t.outcomes) {
    split.folds[{o.candidate_id, o.selection_id}] = o.selection_id == "sel02" ? Fold::Test : Fold::Train;
  }
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.learning_rate = 0.05;
  const ModelSpec spec{ConvKind::GCN, 8, 1, Activation::Tanh};
  auto trained = train(t.graph, t.outcomes, split, spec, cfg);
  Model fresh = make_model(spec, cfg.head, {"sel01", "sel02"}, 3, cfg.seed);
  const auto idx = *trained.model.head_index("sel02");
  CHECK(trained.model.heads[idx].weight.value == fresh.heads[idx].weight.value);
  CHECK(trained.model.heads[idx].bias.value == fresh.heads[idx].bias.value);
  for (double g : trained.model.heads[idx].weight.grad.values()) CHECK(g == 0.0);
  const auto other = *trained.model.head_index("sel01");
  CHECK(trained.model.heads[other].weight.value != fresh.heads[other].weight.value);
}

TEST_CASE("non-finite features abort training with the epoch index") {
  auto t = toy(8, 1);
  t.graph.features(0, 0) = std::numeric_limits<double>::infinity();
  const auto split = stratified_split(t.outcomes, 0.8, 0);
  try {
    train(t.graph, t.outcomes, split, {}, TrainConfig{});
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    CHECK(e.epoch() == 0);
  }
}

TEST_CASE("model checkpoint round-trip reproduces predictions up to f32 rounding") {
  const auto t = toy(16, 7);
  const auto split = stratified_split(t.outcomes, 0.8, 0);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.head = HeadKind::Ordinal;
  auto trained = train(t.graph, t.outcomes, split, {ConvKind::RGCN, 8, 2, Activation::ELU}, cfg);
  Model back = Model::from_checkpoint(trained.model.to_checkpoint());
  CHECK(back.head_kind == HeadKind::Ordinal);
  CHECK(back.trunk.spec() == trained.model.trunk.spec());
  std::vector<PairKey> keys;
  for (const auto& o : t.outcomes) keys.push_back({o.candidate_id, o.selection_id});
  const auto p = predict(trained.model, t.graph, keys);
  const auto q = predict(back, t.graph, keys);
  REQUIRE(p.size() == q.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t k = 0; k < 3; ++k) CHECK(q[i].probabilities[k] == doctest::Approx(p[i].probabilities[k]).epsilon(1e-5));
  }
  CHECK_THROWS(predict(back, t.graph, {{"c000", "nosuch"}}));
}

TEST_CASE("sampled trials stay inside the grid and are seed-deterministic") {
  const SearchGrid grid;
  const auto a = sample_trials(grid, ConvKind::GCN, 200, 11);
  const auto b = sample_trials(grid, ConvKind::GCN, 200, 11);
  std::set<Activation> acts;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].spec == b[i].spec);
    CHECK(a[i].learning_rate == b[i].learning_rate);
    CHECK(a[i].spec.hidden >= 16);
    CHECK(a[i].spec.hidden <= 64);
    CHECK(a[i].spec.depth >= 1);
    CHECK(a[i].spec.depth <= 5);
    CHECK(a[i].learning_rate >= 1e-4);
    CHECK(a[i].learning_rate <= 1e-1);
    CHECK(a[i].spec.conv == ConvKind::GCN);
    acts.insert(a[i].spec.activation);
  }
  CHECK(acts.size() == 4);
  CHECK_THROWS_AS(sample_trials(grid, ConvKind::GCN, 0, 1), ValidationError);
}

TEST_CASE("a single-trial search returns that trial") {
  const auto t = toy(24, 9);
  const auto split = stratified_split(t.outcomes, 0.8, 0);
  TrainConfig base;
  base.epochs = 5;
  const auto result = random_search(t.graph, t.outcomes, split, SearchGrid{}, 1, 3, ConvKind::RGCN, base);
  REQUIRE(result.trials.size() == 1);
  const auto sample = sample_trials(SearchGrid{}, ConvKind::RGCN, 1, 3).front();
  CHECK(result.best_index == 0);
  CHECK(result.best_spec == sample.spec);
  CHECK(result.best_config.learning_rate == sample.learning_rate);
}
