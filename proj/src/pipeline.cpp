#include "talentgraph/pipeline.hpp"

#include <fcntl.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <set>

#include "io_util.hpp"
#include "talentgraph/errors.hpp"
#include "talentgraph/evaluation.hpp"
#include "talentgraph/extraction.hpp"

namespace talent {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration

void PipelineConfig::apply_seed() {
  if (synth) synth->seed = seed;
  index.seed = seed;
  provider.stub_seed = seed;
  train.seed = seed;
}

void PipelineConfig::validate() const {
  graph.validate();
  if (train.epochs < 1) throw ValidationError("train.epochs must be >= 1");
  if (!(train.learning_rate >= 0.0)) throw ValidationError("train.learning_rate must be >= 0");
  if (model.hidden < 1 || model.depth < 1) throw ValidationError("model hidden and depth must be >= 1");
  if (synth) synth->validate();
}

fs::path PipelineConfig::resolve(const fs::path& configured, const char* default_name) const {
  return configured.empty() ? out / default_name : configured;
}
fs::path PipelineConfig::profiles_path() const { return resolve(paths.profiles, "profiles.jsonl"); }
fs::path PipelineConfig::outcomes_path() const { return resolve(paths.outcomes, "outcomes.jsonl"); }
fs::path PipelineConfig::embeddings_path() const { return resolve(paths.embeddings, "embeddings.emb"); }
fs::path PipelineConfig::graph_path() const { return resolve(paths.graph, "graph.jsonl"); }
fs::path PipelineConfig::trait_stats_path() const {
  return resolve(paths.trait_stats, "trait_stats.json");
}
fs::path PipelineConfig::split_path() const { return resolve(paths.split, "split.json"); }
fs::path PipelineConfig::model_path() const { return resolve(paths.model, "model.ckpt"); }
fs::path PipelineConfig::reports_dir() const { return paths.reports.empty() ? out : paths.reports; }

namespace {

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError(std::string("config: ") + section + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ValidationError(std::string("config: unknown key '") + key + "' in " + section);
  }
}

template <typename T>
void read_key(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

void read_path(const json& j, const char* key, fs::path& dst) {
  if (j.contains(key)) dst = j.at(key).get<std::string>();
}

std::string_view to_string(OverlapRule r) {
  return r == OverlapRule::SharedNeighbor ? "shared_neighbor" : "subset";
}

OverlapRule parse_rule(const std::string& s) {
  if (s == "shared_neighbor") return OverlapRule::SharedNeighbor;
  if (s == "subset") return OverlapRule::Subset;
  throw ValidationError("unknown overlap rule: " + s);
}

}  // namespace

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig c;
  try {
    check_keys(j, "config",
               {"out", "seed", "paths", "graph", "index", "provider", "model", "train", "search",
                "synth"});
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    read_key(j, "seed", c.seed);
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      check_keys(p, "paths",
                 {"cvs", "dictionary", "profiles", "outcomes", "embeddings", "graph", "trait_stats",
                  "split", "model", "reports"});
      read_path(p, "cvs", c.paths.cvs);
      read_path(p, "dictionary", c.paths.dictionary);
      read_path(p, "profiles", c.paths.profiles);
      read_path(p, "outcomes", c.paths.outcomes);
      read_path(p, "embeddings", c.paths.embeddings);
      read_path(p, "graph", c.paths.graph);
      read_path(p, "trait_stats", c.paths.trait_stats);
      read_path(p, "split", c.paths.split);
      read_path(p, "model", c.paths.model);
      read_path(p, "reports", c.paths.reports);
    }
    if (j.contains("graph")) {
      const auto& g = j.at("graph");
      check_keys(g, "graph", {"k", "lambda", "theta", "rule"});
      read_key(g, "k", c.graph.k);
      read_key(g, "lambda", c.graph.lambda);
      read_key(g, "theta", c.graph.theta);
      if (g.contains("rule")) c.graph.rule = parse_rule(g.at("rule").get<std::string>());
    }
    if (j.contains("index")) {
      const auto& x = j.at("index");
      check_keys(x, "index", {"mode", "num_lists", "num_probes"});
      if (x.contains("mode")) {
        const auto mode = x.at("mode").get<std::string>();
        if (mode == "exact") {
          c.index.mode = SearchMode::Exact;
        } else if (mode == "approximate") {
          c.index.mode = SearchMode::Approximate;
        } else {
          throw ValidationError("unknown index mode: " + mode);
        }
      }
      read_key(x, "num_lists", c.index.num_lists);
      read_key(x, "num_probes", c.index.num_probes);
    }
    if (j.contains("provider")) {
      const auto& p = j.at("provider");
      check_keys(p, "provider", {"kind", "dim"});
      if (p.contains("kind")) {
        const auto kind = p.at("kind").get<std::string>();
        if (kind == "stub") {
          c.provider.kind = ProviderKind::Stub;
        } else if (kind == "external") {
          c.provider.kind = ProviderKind::External;
        } else {
          throw ValidationError("unknown provider kind: " + kind);
        }
      }
      read_key(p, "dim", c.provider.dim);
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      check_keys(m, "model", {"conv", "hidden", "depth", "activation"});
      if (m.contains("conv")) c.model.conv = parse_conv_kind(m.at("conv").get<std::string>());
      read_key(m, "hidden", c.model.hidden);
      read_key(m, "depth", c.model.depth);
      if (m.contains("activation")) {
        c.model.activation = parse_activation(m.at("activation").get<std::string>());
      }
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      check_keys(t, "train", {"epochs", "learning_rate", "head", "class_weighting"});
      read_key(t, "epochs", c.train.epochs);
      read_key(t, "learning_rate", c.train.learning_rate);
      if (t.contains("head")) c.train.head = parse_head_kind(t.at("head").get<std::string>());
      read_key(t, "class_weighting", c.train.class_weighting);
    }
    if (j.contains("search")) {
      const auto& s = j.at("search");
      check_keys(s, "search",
                 {"trials", "hidden_min", "hidden_max", "depth_min", "depth_max", "lr_min",
                  "lr_max"});
      read_key(s, "trials", c.trials);
      read_key(s, "hidden_min", c.grid.hidden_min);
      read_key(s, "hidden_max", c.grid.hidden_max);
      read_key(s, "depth_min", c.grid.depth_min);
      read_key(s, "depth_max", c.grid.depth_max);
      read_key(s, "lr_min", c.grid.lr_min);
      read_key(s, "lr_max", c.grid.lr_max);
    }
    if (j.contains("synth")) c.synth = synth_config_from_json(j.at("synth"));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

json to_json(const PipelineConfig& c) {
  json paths = {{"cvs", c.paths.cvs.string()},
                {"dictionary", c.paths.dictionary.string()},
                {"profiles", c.profiles_path().string()},
                {"outcomes", c.outcomes_path().string()},
                {"embeddings", c.embeddings_path().string()},
                {"graph", c.graph_path().string()},
                {"trait_stats", c.trait_stats_path().string()},
                {"split", c.split_path().string()},
                {"model", c.model_path().string()},
                {"reports", c.reports_dir().string()}};
  json j = {
      {"out", c.out.string()},
      {"seed", c.seed},
      {"paths", std::move(paths)},
      {"graph",
       {{"k", c.graph.k},
        {"lambda", c.graph.lambda},
        {"theta", c.graph.theta},
        {"rule", to_string(c.graph.rule)}}},
      {"index",
       {{"mode", c.index.mode == SearchMode::Exact ? "exact" : "approximate"},
        {"num_lists", c.index.num_lists},
        {"num_probes", c.index.num_probes}}},
      {"provider",
       {{"kind", c.provider.kind == ProviderKind::Stub ? "stub" : "external"},
        {"dim", c.provider.dim}}},
      {"model", to_json(c.model)},
      {"train",
       {{"epochs", c.train.epochs},
        {"learning_rate", c.train.learning_rate},
        {"head", to_string(c.train.head)},
        {"class_weighting", c.train.class_weighting}}},
      {"search",
       {{"trials", c.trials},
        {"hidden_min", c.grid.hidden_min},
        {"hidden_max", c.grid.hidden_max},
        {"depth_min", c.grid.depth_min},
        {"depth_max", c.grid.depth_max},
        {"lr_min", c.grid.lr_min},
        {"lr_max", c.grid.lr_max}}},
  };
  j["synth"] = c.synth ? to_json(*c.synth) : json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// Locking and hashing

RunLock::RunLock(const fs::path& dir) : path_(dir / ".talentgraph.lock") {
  fs::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw Error("run directory is locked by another process: " + path_.string() +
                  " (remove it if no run is active)");
    }
    throw Error("cannot create lock file " + path_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

std::string sha256_file(const fs::path& path) {
  const std::string bytes = detail::read_file(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed for " + path.string());
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stage plumbing

namespace {

void require_input(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw ValidationError("missing " + what + ": " + path.string());
}

class StageRecorder {
 public:
  StageRecorder(const PipelineConfig& cfg, std::string stage)
      : cfg_(cfg), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}

  void input(const fs::path& path) { inputs_.push_back(path); }
  void output(const fs::path& path) { outputs_.push_back(path); }
  void parameters(json p) { parameters_ = std::move(p); }

  void commit() {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    auto hashes = [](const std::vector<fs::path>& paths) {
      json arr = json::array();
      for (const auto& p : paths) arr.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
      return arr;
    };
    json entry = {
        {"stage", stage_},
        {"inputs", hashes(inputs_)},
        {"outputs", hashes(outputs_)},
        {"parameters", parameters_},
        {"duration_ms", std::chrono::duration<double, std::milli>(elapsed).count()},
    };
    const fs::path manifest_path = cfg_.out / "run_manifest.json";
    json manifest = {{"stages", json::array()}};
    if (fs::exists(manifest_path)) {
      try {
        manifest = json::parse(detail::read_file(manifest_path));
        if (!manifest.contains("stages") || !manifest["stages"].is_array()) {
          manifest["stages"] = json::array();
        }
      } catch (const json::exception&) {
        throw ValidationError("corrupt run manifest: " + manifest_path.string());
      }
    }
    manifest["config"] = to_json(cfg_);
    manifest["stages"].push_back(std::move(entry));
    detail::write_file(manifest_path, manifest.dump(2) + "\n");
  }

 private:
  const PipelineConfig& cfg_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
  std::vector<fs::path> inputs_;
  std::vector<fs::path> outputs_;
  json parameters_ = json::object();
};

json graph_params(const GraphBuildConfig& g) {
  return {{"k", g.k}, {"lambda", g.lambda}, {"theta", g.theta}, {"rule", to_string(g.rule)}};
}

// Graph with node features rebuilt from profiles and saved trait statistics.
HeteroGraph load_featured_graph(const PipelineConfig& cfg, StageRecorder& rec) {
  const auto graph_path = cfg.graph_path();
  const auto profiles_path = cfg.profiles_path();
  const auto stats_path = cfg.trait_stats_path();
  require_input(graph_path, "graph");
  require_input(profiles_path, "profiles");
  require_input(stats_path, "trait statistics");
  rec.input(graph_path);
  rec.input(profiles_path);
  rec.input(stats_path);
  HeteroGraph graph = read_graph(graph_path);
  const auto profiles = apply_trait_stats(load_profiles(profiles_path), load_trait_stats(stats_path));
  if (profiles.size() != graph.nodes.size()) {
    throw ValidationError("graph has " + std::to_string(graph.nodes.size()) + " nodes but " +
                          std::to_string(profiles.size()) + " profiles were loaded");
  }
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    if (profiles[i].candidate_id != graph.nodes[i]) {
      throw ValidationError("graph node " + graph.nodes[i] + " has no matching profile");
    }
  }
  graph.features = feature_matrix(profiles);
  return graph;
}

std::vector<SelectionOutcome> load_outcomes_input(const PipelineConfig& cfg, StageRecorder& rec) {
  const auto path = cfg.outcomes_path();
  require_input(path, "outcomes");
  rec.input(path);
  return load_outcomes(path);
}

std::string model_label(ConvKind conv) { return conv == ConvKind::GCN ? "GCN" : "RGCN"; }
std::string head_label(HeadKind head) {
  return head == HeadKind::Ordinal ? "Ordinal" : "Multi-label";
}

std::vector<EvalRecord> records_for(Model& model, const HeteroGraph& graph,
                                    const std::vector<SelectionOutcome>& outcomes,
                                    const SplitAssignment& split, Fold fold) {
  std::vector<PairKey> pairs;
  std::vector<int> truth;
  for (const auto& o : outcomes) {
    if (split.at(o.candidate_id, o.selection_id) != fold) continue;
    pairs.push_back({o.candidate_id, o.selection_id});
    truth.push_back(o.stage);
  }
  const auto preds = predict(model, graph, pairs);
  std::vector<EvalRecord> records;
  records.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    records.push_back(
        {preds[i].candidate_id, preds[i].selection_id, truth[i], preds[i].stage, preds[i].score_high});
  }
  return records;
}

Model load_model(const PipelineConfig& cfg, StageRecorder& rec) {
  const auto path = cfg.model_path();
  require_input(path, "model checkpoint (run the train stage first)");
  rec.input(path);
  return Model::from_checkpoint(read_checkpoint(path));
}

SplitAssignment load_split(const PipelineConfig& cfg, StageRecorder& rec) {
  const auto path = cfg.split_path();
  require_input(path, "split");
  rec.input(path);
  return read_split(path);
}

}  // namespace

// ---------------------------------------------------------------------------
// Stages

StageResult run_synth(const PipelineConfig& cfg) {
  if (!cfg.synth) throw ValidationError("synth stage requires a \"synth\" section in the config");
  StageRecorder rec(cfg, "synth");
  rec.parameters(to_json(*cfg.synth));
  const auto data = generate(*cfg.synth);
  write_dataset(data, cfg.out);
  // write_dataset uses fixed names inside the directory; honor configured paths too.
  const std::vector<std::pair<fs::path, const char*>> files = {
      {cfg.profiles_path(), "profiles.jsonl"},
      {cfg.embeddings_path(), "embeddings.emb"},
      {cfg.outcomes_path(), "outcomes.jsonl"}};
  for (const auto& [target, name] : files) {
    const fs::path written = cfg.out / name;
    if (fs::absolute(target) != fs::absolute(written)) {
      detail::write_file(target, detail::read_file(written));
    }
    rec.output(target);
  }
  rec.output(cfg.out / "manifest.json");
  rec.commit();
  return {data.warnings};
}

StageResult run_extract(const PipelineConfig& cfg) {
  StageRecorder rec(cfg, "extract");
  if (cfg.paths.cvs.empty()) throw ValidationError("extract stage requires paths.cvs");
  if (cfg.paths.dictionary.empty()) throw ValidationError("extract stage requires paths.dictionary");
  require_input(cfg.paths.cvs, "CV file");
  require_input(cfg.paths.dictionary, "extraction dictionary");
  rec.input(cfg.paths.cvs);
  rec.input(cfg.paths.dictionary);

  json dictionary;
  try {
    dictionary = json::parse(detail::read_file(cfg.paths.dictionary));
  } catch (const json::exception& e) {
    throw ValidationError("extraction dictionary: " + std::string(e.what()));
  }
  auto client = DictionaryExtractor::from_json(dictionary);

  std::vector<CandidateProfile> profiles;
  std::set<std::string> seen;
  detail::for_each_line(detail::read_file(cfg.paths.cvs), [&](std::size_t line_no,
                                                              std::string_view line) {
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
    try {
      CandidateProfile p;
      p.candidate_id = row.at("candidate_id").get<std::string>();
      if (!seen.insert(p.candidate_id).second) {
        throw ParseError(line_no, "duplicate candidate_id " + p.candidate_id);
      }
      const auto& traits = row.at("traits");
      if (!traits.is_array() || traits.size() != kNumTraits) {
        throw ParseError(line_no, "traits must be an array of 18 entries");
      }
      for (std::size_t t = 0; t < kNumTraits; ++t) {
        if (!traits[t].is_null()) p.traits[t] = traits[t].get<double>();
      }
      p.entities = extract_entities(row.at("text").get<std::string>(), client);
      validate_profile(p);
      profiles.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  });
  std::sort(profiles.begin(), profiles.end(),
            [](const auto& a, const auto& b) { return a.candidate_id < b.candidate_id; });
  save_profiles(profiles, cfg.profiles_path());
  rec.output(cfg.profiles_path());
  rec.parameters({{"candidates", profiles.size()}});
  rec.commit();
  return {};
}

StageResult run_embed(const PipelineConfig& cfg) {
  StageRecorder rec(cfg, "embed");
  const auto profiles_path = cfg.profiles_path();
  require_input(profiles_path, "profiles");
  rec.input(profiles_path);
  const auto profiles = load_profiles(profiles_path);
  auto provider = make_provider(cfg.provider);
  std::vector<EmbeddingSet> store;
  for (const auto& p : profiles) {
    auto sets = embed_profile(p, *provider);
    for (auto& s : sets) store.push_back(std::move(s));
  }
  const auto store_path = cfg.embeddings_path();
  auto sidecar_path = store_path;
  sidecar_path.replace_extension(".keywords.jsonl");
  write_store(store, store_path);
  write_keyword_sidecar(profiles, sidecar_path);
  rec.output(store_path);
  rec.output(sidecar_path);
  rec.parameters({{"provider", cfg.provider.kind == ProviderKind::Stub ? "stub" : "external"},
                  {"dim", cfg.provider.dim},
                  {"seed", cfg.provider.stub_seed}});
  rec.commit();
  return {};
}

StageResult run_build_graph(const PipelineConfig& cfg) {
  StageRecorder rec(cfg, "build-graph");
  cfg.graph.validate();
  const auto profiles_path = cfg.profiles_path();
  const auto store_path = cfg.embeddings_path();
  require_input(profiles_path, "profiles");
  require_input(store_path, "embedding store");
  rec.input(profiles_path);
  rec.input(store_path);

  const auto [normalized, stats] = normalize_traits(load_profiles(profiles_path));
  const auto store = read_store(store_path);
  const auto tables = neighbor_tables(store, cfg.graph.k, cfg.index);
  const HeteroGraph graph = build_graph(normalized, tables, cfg.graph);

  save_trait_stats(stats, cfg.trait_stats_path());
  write_graph(graph, cfg.graph_path());
  rec.output(cfg.trait_stats_path());
  rec.output(cfg.graph_path());

  json params = graph_params(cfg.graph);
  params["index_mode"] = cfg.index.mode == SearchMode::Exact ? "exact" : "approximate";
  json per_relation = json::object();
  for (auto c : kAllCategories) per_relation[std::string(category_key(c))] = graph.relation(c).size();
  params["edges"] = std::move(per_relation);
  rec.parameters(std::move(params));
  rec.commit();

  StageResult result;
  if (graph.num_edges() == 0) {
    result.warnings.push_back(
        "graph has no edges: theta removes every pair at this lambda (max similarity is "
        "1 - exp(-lambda) - theta)");
  }
  return result;
}

StageResult run_train(const PipelineConfig& cfg) {
  StageRecorder rec(cfg, "train");
  cfg.validate();
  const HeteroGraph graph = load_featured_graph(cfg, rec);
  const auto outcomes = load_outcomes_input(cfg, rec);

  const SplitAssignment split = stratified_split(outcomes, 0.8, cfg.seed);
  write_split(split, cfg.split_path());

  ModelSpec spec = cfg.model;
  TrainConfig tc = cfg.train;
  json search_report = nullptr;
  if (cfg.trials > 0) {
    const auto search =
        random_search(graph, outcomes, split, cfg.grid, cfg.trials, cfg.seed, cfg.model.conv, tc);
    spec = search.best_spec;
    tc = search.best_config;
    json trials = json::array();
    for (const auto& t : search.trials) {
      trials.push_back({{"index", t.index},
                        {"spec", to_json(t.sample.spec)},
                        {"learning_rate", t.sample.learning_rate},
                        {"validation_balanced_accuracy", t.objective}});
    }
    search_report = {{"best_index", search.best_index}, {"trials", std::move(trials)}};
  }

  TrainResult result = train(graph, outcomes, split, spec, tc);
  write_checkpoint(result.model.to_checkpoint(), cfg.model_path());

  const auto train_records = records_for(result.model, graph, outcomes, split, Fold::Train);
  json report = {
      {"hyperparameters",
       {{"spec", to_json(spec)},
        {"learning_rate", tc.learning_rate},
        {"epochs", tc.epochs},
        {"head", to_string(tc.head)},
        {"class_weighting", tc.class_weighting},
        {"seed", tc.seed}}},
      {"loss_trace", result.loss_trace},
      {"train_metrics", to_json(summarize(train_records))},
      {"search", std::move(search_report)},
  };
  const fs::path report_path = cfg.reports_dir() / "train_report.json";
  detail::write_file(report_path, report.dump(2) + "\n");

  rec.output(cfg.split_path());
  rec.output(cfg.model_path());
  rec.output(report_path);
  rec.parameters(report["hyperparameters"]);
  rec.commit();
  return {};
}

StageResult run_evaluate(const PipelineConfig& cfg) {
  StageRecorder rec(cfg, "evaluate");
  Model model = load_model(cfg, rec);
  const SplitAssignment split = load_split(cfg, rec);
  const HeteroGraph graph = load_featured_graph(cfg, rec);
  const auto outcomes = load_outcomes_input(cfg, rec);

  const auto records = records_for(model, graph, outcomes, split, Fold::Test);
  const auto summary = summarize(records);
  const auto conv = model.trunk.spec().conv;
  json metrics = to_json(summary);
  metrics["model"] = model_label(conv);
  metrics["head"] = to_string(model.head_kind);

  const fs::path json_path = cfg.reports_dir() / "metrics.json";
  const fs::path text_path = cfg.reports_dir() / "metrics.txt";
  detail::write_file(json_path, metrics.dump(2) + "\n");
  detail::write_file(text_path, render_table(model_label(conv), head_label(model.head_kind),
                                             summary.pooled));
  rec.output(json_path);
  rec.output(text_path);
  rec.parameters({{"test_pairs", records.size()}});
  rec.commit();

  StageResult result;
  if (!summary.pooled.auc) {
    result.warnings.push_back("grouped AUC undefined: test truth has a single stage group");
  }
  return result;
}

StageResult run_predict(const PipelineConfig& cfg) {
  StageRecorder rec(cfg, "predict");
  Model model = load_model(cfg, rec);
  const HeteroGraph graph = load_featured_graph(cfg, rec);
  const auto outcomes = load_outcomes_input(cfg, rec);
  std::optional<SplitAssignment> split;
  if (fs::exists(cfg.split_path())) split = load_split(cfg, rec);

  std::vector<PairKey> pairs;
  for (const auto& o : outcomes) pairs.push_back({o.candidate_id, o.selection_id});
  const auto preds = predict(model, graph, pairs);
  std::string out;
  for (const auto& p : preds) {
    json row = {{"candidate_id", p.candidate_id},
                {"selection_id", p.selection_id},
                {"stage", p.stage},
                {"score_high", p.score_high},
                {"probabilities", p.probabilities}};
    if (split) {
      row["fold"] = split->at(p.candidate_id, p.selection_id) == Fold::Train ? "train" : "test";
    }
    out += row.dump() + "\n";
  }
  const fs::path path = cfg.reports_dir() / "predictions.jsonl";
  detail::write_file(path, out);
  rec.output(path);
  rec.parameters({{"pairs", preds.size()}});
  rec.commit();
  return {};
}

StageResult run_pipeline(const PipelineConfig& cfg) {
  StageResult all;
  auto take = [&](StageResult r) {
    for (auto& w : r.warnings) all.warnings.push_back(std::move(w));
  };
  if (cfg.synth) {
    take(run_synth(cfg));
  } else {
    take(run_extract(cfg));
    take(run_embed(cfg));
  }
  take(run_build_graph(cfg));
  take(run_train(cfg));
  take(run_evaluate(cfg));
  return all;
}

}  // namespace talent
