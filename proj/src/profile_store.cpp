#include "talentgraph/profile_store.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include <json.hpp>

#include "io_util.hpp"
#include "talentgraph/errors.hpp"

namespace talent {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kNumCategories> kCategoryKeys = {
    "soft_skills", "hard_skills", "industry_sector", "education", "language_skills"};

bool has_ascii_upper(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char ch) { return ch >= 'A' && ch <= 'Z'; });
}

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

CandidateProfile profile_from_json(const json& obj) {
  if (!obj.is_object()) throw ValidationError("profile record is not a JSON object");
  CandidateProfile p;
  if (!obj.contains("candidate_id") || !obj["candidate_id"].is_string()) {
    throw ValidationError("missing string field candidate_id");
  }
  p.candidate_id = obj["candidate_id"].get<std::string>();

  if (!obj.contains("traits") || !obj["traits"].is_array()) {
    throw ValidationError("missing array field traits");
  }
  const auto& traits = obj["traits"];
  if (traits.size() != kNumTraits) {
    throw ValidationError("candidate " + p.candidate_id + ": expected " +
                          std::to_string(kNumTraits) + " traits, got " +
                          std::to_string(traits.size()));
  }
  for (std::size_t t = 0; t < kNumTraits; ++t) {
    if (traits[t].is_null()) continue;
    if (!traits[t].is_number()) {
      throw ValidationError("candidate " + p.candidate_id + ": trait " + std::to_string(t) +
                            " is not a number or null");
    }
    p.traits[t] = traits[t].get<double>();
  }

  if (obj.contains("entities")) {
    const auto& ents = obj["entities"];
    if (!ents.is_object()) throw ValidationError("entities must be an object");
    for (const auto& [key, list] : ents.items()) {
      auto cat = parse_category_key(key);
      if (!cat) throw ValidationError("unknown entity category '" + key + "'");
      if (!list.is_array()) throw ValidationError("entity list '" + key + "' is not an array");
      for (const auto& kw : list) {
        if (!kw.is_string()) throw ValidationError("keyword in '" + key + "' is not a string");
        p.keywords(*cat).push_back(kw.get<std::string>());
      }
    }
  }
  validate_profile(p);
  return p;
}

SelectionOutcome outcome_from_json(const json& obj) {
  if (!obj.is_object()) throw ValidationError("outcome record is not a JSON object");
  SelectionOutcome o;
  if (!obj.contains("candidate_id") || !obj["candidate_id"].is_string()) {
    throw ValidationError("missing string field candidate_id");
  }
  if (!obj.contains("selection_id") || !obj["selection_id"].is_string()) {
    throw ValidationError("missing string field selection_id");
  }
  if (!obj.contains("stage") || !obj["stage"].is_number_integer()) {
    throw ValidationError("missing integer field stage");
  }
  o.candidate_id = obj["candidate_id"].get<std::string>();
  o.selection_id = obj["selection_id"].get<std::string>();
  o.stage = obj["stage"].get<int>();
  validate_outcome(o);
  return o;
}

}  // namespace

std::string_view category_key(EntityCategory c) { return kCategoryKeys[category_index(c)]; }

std::optional<EntityCategory> parse_category_key(std::string_view key) {
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    if (kCategoryKeys[i] == key) return static_cast<EntityCategory>(i);
  }
  return std::nullopt;
}

EntityCategory category_from_code(int code) {
  if (code < 0 || code >= static_cast<int>(kNumCategories)) {
    throw ValidationError("entity category code out of range: " + std::to_string(code));
  }
  return static_cast<EntityCategory>(code);
}

int stage_of(RecruitmentStatus status) {
  switch (status) {
    case RecruitmentStatus::Applied:
    case RecruitmentStatus::Rejected:
      return 0;
    case RecruitmentStatus::Screened:
    case RecruitmentStatus::Interviewed:
      return 1;
    case RecruitmentStatus::OfferProposal:
      return 2;
    case RecruitmentStatus::Hired:
      return 3;
  }
  return 0;
}

void validate_profile(const CandidateProfile& p) {
  if (p.candidate_id.empty()) throw ValidationError("empty candidate_id");
  for (std::size_t t = 0; t < kNumTraits; ++t) {
    if (!p.traits[t]) continue;
    const double v = *p.traits[t];
    if (!std::isfinite(v) || v < kTraitMin || v > kTraitMax) {
      throw ValidationError("candidate " + p.candidate_id + ": trait " + std::to_string(t) +
                            " value " + std::to_string(v) + " outside [-100, 100]");
    }
  }
  for (auto c : kAllCategories) {
    std::set<std::string_view> seen;
    for (const auto& kw : p.keywords(c)) {
      if (kw.empty()) {
        throw ValidationError("candidate " + p.candidate_id + ": empty keyword in " +
                              std::string(category_key(c)));
      }
      if (has_ascii_upper(kw)) {
        throw ValidationError("candidate " + p.candidate_id + ": keyword '" + kw +
                              "' is not lowercase");
      }
      if (!seen.insert(kw).second) {
        throw ValidationError("candidate " + p.candidate_id + ": duplicate keyword '" + kw +
                              "' in " + std::string(category_key(c)));
      }
    }
  }
}

void validate_outcome(const SelectionOutcome& o) {
  if (o.candidate_id.empty() || o.selection_id.empty()) {
    throw ValidationError("outcome with empty candidate_id or selection_id");
  }
  if (o.stage < 0 || o.stage >= static_cast<int>(kNumStages)) {
    throw ValidationError("stage " + std::to_string(o.stage) + " outside 0..3 for " +
                          o.candidate_id + "/" + o.selection_id);
  }
}

std::vector<CandidateProfile> parse_profiles(std::string_view jsonl) {
  std::vector<CandidateProfile> out;
  std::set<std::string> ids;
  detail::for_each_line(jsonl, [&](std::size_t line_no, std::string_view line) {
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
    CandidateProfile p;
    try {
      p = profile_from_json(obj);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!ids.insert(p.candidate_id).second) {
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate candidate_id '" +
                            p.candidate_id + "'");
    }
    out.push_back(std::move(p));
  });
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.candidate_id < b.candidate_id; });
  return out;
}

std::vector<CandidateProfile> load_profiles(const std::filesystem::path& path) {
  return parse_profiles(detail::read_file(path));
}

std::string profile_to_json_line(const CandidateProfile& p) {
  json traits = json::array();
  for (const auto& t : p.traits) traits.push_back(t ? json(*t) : json(nullptr));
  json ents = json::object();
  for (auto c : kAllCategories) ents[std::string(category_key(c))] = p.keywords(c);
  json obj = json::object();
  obj["candidate_id"] = p.candidate_id;
  obj["traits"] = std::move(traits);
  obj["entities"] = std::move(ents);
  return obj.dump();
}

void save_profiles(const std::vector<CandidateProfile>& profiles,
                   const std::filesystem::path& path) {
  std::string text;
  for (const auto& p : profiles) {
    validate_profile(p);
    text += profile_to_json_line(p);
    text += '\n';
  }
  detail::write_file(path, text);
}

std::vector<SelectionOutcome> parse_outcomes(std::string_view jsonl) {
  std::vector<SelectionOutcome> out;
  std::set<std::pair<std::string, std::string>> pairs;
  detail::for_each_line(jsonl, [&](std::size_t line_no, std::string_view line) {
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, e.what());
    }
    SelectionOutcome o;
    try {
      o = outcome_from_json(obj);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!pairs.emplace(o.candidate_id, o.selection_id).second) {
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate pair (" +
                            o.candidate_id + ", " + o.selection_id + ")");
    }
    out.push_back(std::move(o));
  });
  return out;
}

std::vector<SelectionOutcome> load_outcomes(const std::filesystem::path& path) {
  return parse_outcomes(detail::read_file(path));
}

void save_outcomes(const std::vector<SelectionOutcome>& outcomes,
                   const std::filesystem::path& path) {
  std::string text;
  for (const auto& o : outcomes) {
    validate_outcome(o);
    json obj = {{"candidate_id", o.candidate_id},
                {"selection_id", o.selection_id},
                {"stage", o.stage}};
    text += obj.dump();
    text += '\n';
  }
  detail::write_file(path, text);
}

std::pair<std::vector<CandidateProfile>, TraitStats> normalize_traits(
    const std::vector<CandidateProfile>& profiles) {
  if (profiles.empty()) throw ValidationError("normalize_traits: no profiles");
  TraitStats stats;
  const double n = static_cast<double>(profiles.size());
  for (std::size_t t = 0; t < kNumTraits; ++t) {
    std::vector<double> present;
    for (const auto& p : profiles) {
      if (p.traits[t]) present.push_back(*p.traits[t]);
    }
    if (present.empty()) {
      throw ValidationError("trait column " + std::to_string(t) + " has no present values");
    }
    const double med = median_of(present);
    double sum = 0.0;
    for (const auto& p : profiles) sum += p.traits[t].value_or(med);
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& p : profiles) {
      const double d = p.traits[t].value_or(med) - mean;
      ss += d * d;
    }
    stats.median[t] = med;
    stats.mean[t] = mean;
    stats.std[t] = std::sqrt(ss / n);
  }
  return {apply_trait_stats(profiles, stats), stats};
}

std::vector<CandidateProfile> apply_trait_stats(const std::vector<CandidateProfile>& profiles,
                                                const TraitStats& stats) {
  std::vector<CandidateProfile> out = profiles;
  for (auto& p : out) {
    for (std::size_t t = 0; t < kNumTraits; ++t) {
      const double v = p.traits[t].value_or(stats.median[t]);
      p.traits[t] = stats.std[t] > 0.0 ? (v - stats.mean[t]) / stats.std[t] : 0.0;
    }
  }
  return out;
}

void save_trait_stats(const TraitStats& stats, const std::filesystem::path& path) {
  json obj = {{"median", stats.median}, {"mean", stats.mean}, {"std", stats.std}};
  detail::write_file(path, obj.dump() + "\n");
}

TraitStats load_trait_stats(const std::filesystem::path& path) {
  json obj;
  try {
    obj = json::parse(detail::read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(1, e.what());
  }
  TraitStats stats;
  auto read = [&](const char* key, std::array<double, kNumTraits>& dst) {
    if (!obj.contains(key) || !obj[key].is_array() || obj[key].size() != kNumTraits) {
      throw ValidationError(std::string("trait_stats: field '") + key + "' must have 18 numbers");
    }
    for (std::size_t t = 0; t < kNumTraits; ++t) dst[t] = obj[key][t].get<double>();
  };
  read("median", stats.median);
  read("mean", stats.mean);
  read("std", stats.std);
  for (double s : stats.std) {
    if (!(s >= 0.0)) throw ValidationError("trait_stats: negative std");
  }
  return stats;
}

DatasetStats compute_dataset_stats(const std::vector<SelectionOutcome>& outcomes) {
  DatasetStats ds;
  std::set<std::string> candidates;
  std::map<std::string, std::array<std::size_t, kNumStages>> counts;
  std::array<std::size_t, kNumStages> pooled{};
  for (const auto& o : outcomes) {
    candidates.insert(o.candidate_id);
    counts[o.selection_id][static_cast<std::size_t>(o.stage)] += 1;
    pooled[static_cast<std::size_t>(o.stage)] += 1;
  }
  ds.num_candidates = candidates.size();
  ds.num_selections = counts.size();
  ds.num_pairs = outcomes.size();
  for (const auto& [sel, c] : counts) {
    std::size_t total = 0;
    for (auto v : c) total += v;
    std::array<double, kNumStages> pct{};
    for (std::size_t s = 0; s < kNumStages; ++s) pct[s] = 100.0 * c[s] / total;
    ds.stage_percentages[sel] = pct;
  }
  if (!outcomes.empty()) {
    for (std::size_t s = 0; s < kNumStages; ++s) {
      ds.pooled_percentages[s] = 100.0 * pooled[s] / outcomes.size();
    }
  }
  return ds;
}

std::string normalize_text(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char ch : raw) {
    if (std::isspace(ch)) {
      pending_space = !out.empty();
      continue;
    }
    const bool keep = ch >= 0x80 || std::isalnum(ch) || ch == '-';
    if (!keep) continue;
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(ch >= 0x80 ? ch : std::tolower(ch)));
  }
  return out;
}

}  // namespace talent
