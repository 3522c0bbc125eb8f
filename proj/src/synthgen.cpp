#include "talentgraph/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "io_util.hpp"
#include "talentgraph/errors.hpp"

namespace talent {

using nlohmann::json;

namespace {

constexpr double kPrototypeNoise = 1.0;
constexpr double kRawTraitScale = 25.0;

std::vector<double> random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(dim);
  double n2 = 0.0;
  for (auto& x : v) {
    x = gauss(rng);
    n2 += x * x;
  }
  const double inv = 1.0 / std::sqrt(n2);
  for (auto& x : v) x *= inv;
  return v;
}

// center + scale * g with g ~ N(0, I/dim), then normalized.
std::vector<double> perturbed(const std::vector<double>& center, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(center.size())));
  std::vector<double> v(center.size());
  double n2 = 0.0;
  for (std::size_t d = 0; d < v.size(); ++d) {
    v[d] = center[d] + scale * gauss(rng);
    n2 += v[d] * v[d];
  }
  const double inv = 1.0 / std::sqrt(n2);
  for (auto& x : v) x *= inv;
  return v;
}

std::string padded(const char* prefix, std::size_t value, std::size_t width) {
  std::string digits = std::to_string(value);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

std::string keyword_stem(EntityCategory c) {
  std::string s(category_key(c));
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_candidates < 1) throw ValidationError("synth: num_candidates must be >= 1");
  if (num_selections < 1) throw ValidationError("synth: num_selections must be >= 1");
  if (dim < 2) throw ValidationError("synth: dim must be >= 2");
  if (!(signal >= 0.0 && signal <= 1.0)) throw ValidationError("synth: signal must lie in [0, 1]");
  double total = 0.0;
  for (double m : stage_marginals) {
    if (m < 0.0) throw ValidationError("synth: negative stage marginal");
    total += m;
  }
  if (std::abs(total - 100.0) > 0.01) {
    throw ValidationError("synth: stage marginals must sum to 100 +- 0.01");
  }
  for (double k : keywords_per_category) {
    if (k < 0.0) throw ValidationError("synth: negative keyword mean");
  }
  if (!(second_application_rate >= 0.0 && second_application_rate <= 1.0)) {
    throw ValidationError("synth: second_application_rate must lie in [0, 1]");
  }
  if (!(missing_trait_rate >= 0.0 && missing_trait_rate < 1.0)) {
    throw ValidationError("synth: missing_trait_rate must lie in [0, 1)");
  }
  if (!(generic_cluster_size > 0.0)) throw ValidationError("synth: generic_cluster_size must be > 0");
  if (!(ladder_step >= 0.0)) throw ValidationError("synth: ladder_step must be >= 0");
  if (!(generic_spread >= 0.0)) throw ValidationError("synth: generic_spread must be >= 0");
  for (double a : prototype_affinity) {
    if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("synth: prototype_affinity must lie in [0, 1]");
  }
}

json to_json(const SynthConfig& c) {
  return {{"num_candidates", c.num_candidates},
          {"num_selections", c.num_selections},
          {"dim", c.dim},
          {"keywords_per_category", c.keywords_per_category},
          {"stage_marginals", c.stage_marginals},
          {"marginal_jitter", c.marginal_jitter},
          {"second_application_rate", c.second_application_rate},
          {"missing_trait_rate", c.missing_trait_rate},
          {"trait_shift", c.trait_shift},
          {"generic_cluster_size", c.generic_cluster_size},
          {"generic_spread", c.generic_spread},
          {"ladder_step", c.ladder_step},
          {"prototype_affinity", c.prototype_affinity},
          {"signal", c.signal},
          {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const json& j) {
  SynthConfig c;
  if (!j.is_object()) throw ValidationError("synth config must be an object");
  auto get = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
  };
  try {
    get("num_candidates", c.num_candidates);
    get("num_selections", c.num_selections);
    get("dim", c.dim);
    get("keywords_per_category", c.keywords_per_category);
    get("stage_marginals", c.stage_marginals);
    get("marginal_jitter", c.marginal_jitter);
    get("second_application_rate", c.second_application_rate);
    get("missing_trait_rate", c.missing_trait_rate);
    get("trait_shift", c.trait_shift);
    get("generic_cluster_size", c.generic_cluster_size);
    get("generic_spread", c.generic_spread);
    get("ladder_step", c.ladder_step);
    get("prototype_affinity", c.prototype_affinity);
    get("signal", c.signal);
    get("seed", c.seed);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

SynthDataset generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const std::size_t n = cfg.num_candidates;
  const std::size_t num_sel = cfg.num_selections;
  const double s = cfg.signal;

  std::vector<std::string> ids(n);
  const std::size_t width = std::to_string(n).size();
  for (std::size_t i = 0; i < n; ++i) ids[i] = padded("c", i + 1, width);
  std::vector<std::string> selections(num_sel);
  for (std::size_t k = 0; k < num_sel; ++k) selections[k] = padded("sel", k + 1, 2);

  std::vector<double> latent(n);
  for (auto& z : latent) z = gauss(rng);

  // Applications: a balanced primary assignment plus optional second applications.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> applicants(num_sel);
  std::vector<std::size_t> primary(n);
  for (std::size_t r = 0; r < n; ++r) primary[order[r]] = r % num_sel;
  for (std::size_t i = 0; i < n; ++i) {
    applicants[primary[i]].push_back(i);
    if (num_sel > 1 && unif(rng) < cfg.second_application_rate) {
      std::uniform_int_distribution<std::size_t> other(0, num_sel - 2);
      std::size_t k = other(rng);
      if (k >= primary[i]) ++k;
      applicants[k].push_back(i);
    }
  }

  // Stages: counts from jittered marginals, assigned by rank of a noisy latent score.
  SynthDataset data;
  std::vector<int> best_stage(n, 0);
  std::vector<std::size_t> keyword_selection = primary;
  std::array<bool, kNumStages> stage_seen{};
  json stage_counts = json::object();
  const double noise_weight = std::sqrt(std::max(0.0, 1.0 - s * s));
  for (std::size_t k = 0; k < num_sel; ++k) {
    auto& apps = applicants[k];
    std::sort(apps.begin(), apps.end());
    const std::size_t m = apps.size();
    std::array<std::size_t, kNumStages> counts{};
    std::size_t upper = 0;
    for (std::size_t y = kNumStages - 1; y >= 1; --y) {
      const double pct = cfg.stage_marginals[y] * std::exp(cfg.marginal_jitter * gauss(rng));
      counts[y] = std::min(m - upper, static_cast<std::size_t>(std::lround(pct / 100.0 * m)));
      upper += counts[y];
    }
    counts[0] = m - upper;

    std::vector<std::pair<double, std::size_t>> ranked;
    for (auto i : apps) ranked.emplace_back(s * latent[i] + noise_weight * gauss(rng), i);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::size_t pos = 0;
    for (int y = static_cast<int>(kNumStages) - 1; y >= 0; --y) {
      if (counts[y] > 0) stage_seen[y] = true;
      for (std::size_t c = 0; c < counts[y]; ++c, ++pos) {
        const auto i = ranked[pos].second;
        data.outcomes.push_back({ids[i], selections[k], y});
        if (y > best_stage[i]) {
          best_stage[i] = y;
          keyword_selection[i] = k;
        }
      }
    }
    stage_counts[selections[k]] = counts;
  }
  for (std::size_t y = 0; y < kNumStages; ++y) {
    if (!stage_seen[y] && cfg.stage_marginals[y] > 0.0) {
      data.warnings.push_back("stage " + std::to_string(y) +
                              " rounds to zero members in every selection");
    }
  }
  std::sort(data.outcomes.begin(), data.outcomes.end(), [](const auto& a, const auto& b) {
    return std::tie(a.selection_id, a.candidate_id) < std::tie(b.selection_id, b.candidate_id);
  });

  // Traits.
  std::array<double, kNumTraits> trait_direction{};
  for (auto& t : trait_direction) t = unif(rng) < 0.5 ? -1.0 : 1.0;
  data.profiles.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& p = data.profiles[i];
    p.candidate_id = ids[i];
    for (std::size_t t = 0; t < kNumTraits; ++t) {
      const double x = gauss(rng) + s * cfg.trait_shift * best_stage[i] * trait_direction[t];
      const bool missing = unif(rng) < cfg.missing_trait_rate;
      if (!missing) p.traits[t] = std::clamp(kRawTraitScale * x, kTraitMin, kTraitMax);
    }
  }

  // Keyword vectors.
  std::vector<std::array<std::vector<double>, kNumCategories>> prototypes(num_sel);
  std::vector<std::array<std::array<std::vector<double>, kNumStages>, kNumCategories>> rungs(num_sel);
  for (std::size_t k = 0; k < num_sel; ++k) {
    for (std::size_t ci = 0; ci < kNumCategories; ++ci) {
      auto& proto = prototypes[k][ci];
      proto = random_unit(cfg.dim, rng);
      // Gram-Schmidt a second direction against the prototype.
      auto q = random_unit(cfg.dim, rng);
      double dot = 0.0;
      for (std::size_t d = 0; d < cfg.dim; ++d) dot += q[d] * proto[d];
      double n2 = 0.0;
      for (std::size_t d = 0; d < cfg.dim; ++d) {
        q[d] -= dot * proto[d];
        n2 += q[d] * q[d];
      }
      for (auto& x : q) x /= std::sqrt(n2);
      for (std::size_t y = 0; y < kNumStages; ++y) {
        auto& rung = rungs[k][ci][y];
        rung.resize(cfg.dim);
        const double offset = cfg.ladder_step * (static_cast<double>(y) - 2.0);
        for (std::size_t d = 0; d < cfg.dim; ++d) rung[d] = proto[d] + offset * q[d];
      }
    }
  }
  std::array<std::vector<std::vector<double>>, kNumCategories> generic_centers;
  for (auto c : kAllCategories) {
    const double pooled = static_cast<double>(n) * cfg.keywords_per_category[category_index(c)];
    const auto clusters =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(pooled / cfg.generic_cluster_size)));
    for (std::size_t g = 0; g < clusters; ++g) {
      generic_centers[category_index(c)].push_back(random_unit(cfg.dim, rng));
    }
  }
  std::size_t keyword_counter = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto& p = data.profiles[i];
    const double affinity = s * cfg.prototype_affinity[best_stage[i]];
    for (auto c : kAllCategories) {
      const auto ci = category_index(c);
      std::poisson_distribution<int> count_dist(cfg.keywords_per_category[ci]);
      const int count = cfg.keywords_per_category[ci] > 0.0 ? count_dist(rng) : 0;
      EmbeddingSet set{ids[i], c, cfg.dim, {}};
      for (int kw = 0; kw < count; ++kw) {
        std::vector<double> v;
        std::string name = keyword_stem(c);
        if (unif(rng) < affinity) {
          v = perturbed(rungs[keyword_selection[i]][ci][best_stage[i]], (1.0 - s) * kPrototypeNoise,
                        rng);
          name += "-s" + std::to_string(keyword_selection[i] + 1);
        } else {
          const auto& centers = generic_centers[ci];
          std::uniform_int_distribution<std::size_t> pick(0, centers.size() - 1);
          const std::size_t g = pick(rng);
          v = perturbed(centers[g], cfg.generic_spread, rng);
          name += "-t" + std::to_string(g);
        }
        name += "-k" + std::to_string(++keyword_counter);
        p.keywords(c).push_back(std::move(name));
        for (double x : v) set.data.push_back(static_cast<float>(x));
      }
      data.store.push_back(std::move(set));
    }
  }

  json protos = json::object();
  for (std::size_t k = 0; k < num_sel; ++k) {
    json per = json::object();
    for (auto c : kAllCategories) per[std::string(category_key(c))] = prototypes[k][category_index(c)];
    protos[selections[k]] = std::move(per);
  }
  data.manifest = {{"seed", cfg.seed},
                   {"config", to_json(cfg)},
                   {"selections", selections},
                   {"stage_counts", std::move(stage_counts)},
                   {"trait_direction", trait_direction},
                   {"prototypes", std::move(protos)},
                   {"warnings", data.warnings}};
  return data;
}

void write_dataset(const SynthDataset& data, const std::filesystem::path& dir) {
  save_profiles(data.profiles, dir / "profiles.jsonl");
  write_store(data.store, dir / "embeddings.emb");
  write_keyword_sidecar(data.profiles, dir / "embeddings.keywords.jsonl");
  save_outcomes(data.outcomes, dir / "outcomes.jsonl");
  detail::write_file(dir / "manifest.json", data.manifest.dump(2) + "\n");
}

}  // namespace talent
