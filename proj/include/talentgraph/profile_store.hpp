#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace talent {

inline constexpr std::size_t kNumTraits = 18;
inline constexpr std::size_t kNumCategories = 5;
inline constexpr std::size_t kNumStages = 4;
inline constexpr double kTraitMin = -100.0;
inline constexpr double kTraitMax = 100.0;

enum class EntityCategory : std::uint8_t {
  SoftSkills = 0,
  HardSkills = 1,
  IndustrySector = 2,
  Education = 3,
  LanguageSkills = 4,
};

inline constexpr std::array<EntityCategory, kNumCategories> kAllCategories = {
    EntityCategory::SoftSkills, EntityCategory::HardSkills, EntityCategory::IndustrySector,
    EntityCategory::Education, EntityCategory::LanguageSkills};

constexpr std::size_t category_index(EntityCategory c) { return static_cast<std::size_t>(c); }

/// JSON key used in profiles.jsonl, e.g. "soft_skills".
std::string_view category_key(EntityCategory c);
/// Inverse of category_key; nullopt for unknown keys.
std::optional<EntityCategory> parse_category_key(std::string_view key);
/// Throws ValidationError for codes outside 0..4.
EntityCategory category_from_code(int code);

using TraitVector = std::array<std::optional<double>, kNumTraits>;
using EntityMap = std::array<std::vector<std::string>, kNumCategories>;

struct CandidateProfile {
  std::string candidate_id;
  TraitVector traits{};
  EntityMap entities{};

  const std::vector<std::string>& keywords(EntityCategory c) const {
    return entities[category_index(c)];
  }
  std::vector<std::string>& keywords(EntityCategory c) { return entities[category_index(c)]; }

  bool operator==(const CandidateProfile&) const = default;
};

struct SelectionOutcome {
  std::string candidate_id;
  std::string selection_id;
  int stage = 0;

  bool operator==(const SelectionOutcome&) const = default;
};

enum class RecruitmentStatus { Applied, Rejected, Screened, Interviewed, OfferProposal, Hired };

/// Applied/Rejected -> 0, Screened/Interviewed -> 1, Offer Proposal -> 2, Hired -> 3.
int stage_of(RecruitmentStatus status);

struct TraitStats {
  std::array<double, kNumTraits> median{};
  std::array<double, kNumTraits> mean{};
  std::array<double, kNumTraits> std{};
};

struct DatasetStats {
  std::size_t num_candidates = 0;
  std::size_t num_selections = 0;
  std::size_t num_pairs = 0;
  // selection id -> percentage of pairs at each stage
  std::map<std::string, std::array<double, kNumStages>> stage_percentages;
  std::array<double, kNumStages> pooled_percentages{};
};

// Validation helpers; each throws ValidationError describing the first violation.
void validate_profile(const CandidateProfile& profile);
void validate_outcome(const SelectionOutcome& outcome);

/// Parses profiles.jsonl; result is sorted by candidate_id.
std::vector<CandidateProfile> load_profiles(const std::filesystem::path& path);
std::vector<CandidateProfile> parse_profiles(std::string_view jsonl);
void save_profiles(const std::vector<CandidateProfile>& profiles, const std::filesystem::path& path);
std::string profile_to_json_line(const CandidateProfile& profile);

std::vector<SelectionOutcome> load_outcomes(const std::filesystem::path& path);
std::vector<SelectionOutcome> parse_outcomes(std::string_view jsonl);
void save_outcomes(const std::vector<SelectionOutcome>& outcomes, const std::filesystem::path& path);

/// Median imputation followed by population z-scoring, column by column.
/// A column with no present value is an error; zero-variance columns map to 0.
std::pair<std::vector<CandidateProfile>, TraitStats> normalize_traits(
    const std::vector<CandidateProfile>& profiles);

/// Applies previously computed statistics (impute with stats.median, then z-score).
std::vector<CandidateProfile> apply_trait_stats(const std::vector<CandidateProfile>& profiles,
                                                const TraitStats& stats);

void save_trait_stats(const TraitStats& stats, const std::filesystem::path& path);
TraitStats load_trait_stats(const std::filesystem::path& path);

DatasetStats compute_dataset_stats(const std::vector<SelectionOutcome>& outcomes);

/// Lowercase, drop everything but letters/digits/whitespace/hyphen, collapse
/// whitespace runs to one space and trim. Bytes >= 0x80 (non-ASCII UTF-8) are
/// kept as letters.
std::string normalize_text(std::string_view raw);

}  // namespace talent
