#include <doctest.h>

#include <cmath>
#include <random>

#include "talentgraph/errors.hpp"
#include "talentgraph/extraction.hpp"
#include "talentgraph/profile_store.hpp"
#include "test_util.hpp"

using namespace talent;

namespace {

std::string zero_traits() {
  std::string s = "[";
  for (std::size_t i = 0; i < kNumTraits; ++i) s += i ? ",0" : "0";
  return s + "]";
}

std::string profile_line(const std::string& id, const std::string& traits = zero_traits()) {
  return R"({"candidate_id":")" + id + R"(","traits":)" + traits +
         R"(,"entities":{"soft_skills":["teamwork"],"hard_skills":[],"industry_sector":[],"education":[],"language_skills":[]}})";
}

CandidateProfile make_profile(const std::string& id, std::array<std::optional<double>, kNumTraits> traits) {
  CandidateProfile p;
  p.candidate_id = id;
  p.traits = traits;
  return p;
}

}  // namespace

TEST_CASE("category codes are stable and round-trip through keys") {
  CHECK(kAllCategories.size() == 5);
  for (int code = 0; code < 5; ++code) {
    const auto c = category_from_code(code);
    CHECK(static_cast<int>(category_index(c)) == code);
    CHECK(parse_category_key(category_key(c)) == c);
  }
  CHECK(category_key(EntityCategory::SoftSkills) == "soft_skills");
  CHECK(category_key(EntityCategory::LanguageSkills) == "language_skills");
  CHECK_THROWS_AS(category_from_code(5), ValidationError);
  CHECK_FALSE(parse_category_key("skills").has_value());
}

TEST_CASE("stage mapping of recruitment statuses") {
  CHECK(stage_of(RecruitmentStatus::Applied) == 0);
  CHECK(stage_of(RecruitmentStatus::Rejected) == 0);
  CHECK(stage_of(RecruitmentStatus::Screened) == 1);
  CHECK(stage_of(RecruitmentStatus::Interviewed) == 1);
  CHECK(stage_of(RecruitmentStatus::OfferProposal) == 2);
  CHECK(stage_of(RecruitmentStatus::Hired) == 3);
}

TEST_CASE("load_profiles parses a single line with zero traits") {
  const auto profiles = parse_profiles(profile_line("c1") + "\n");
  REQUIRE(profiles.size() == 1);
  CHECK(profiles[0].candidate_id == "c1");
  for (const auto& t : profiles[0].traits) {
    REQUIRE(t.has_value());
    CHECK(*t == 0.0);
  }
  CHECK(profiles[0].keywords(EntityCategory::SoftSkills) == std::vector<std::string>{"teamwork"});
  CHECK(profiles[0].keywords(EntityCategory::Education).empty());
}

TEST_CASE("load_profiles sorts by candidate id") {
  const auto profiles = parse_profiles(profile_line("c2") + "\n" + profile_line("c10") + "\n" +
                                       profile_line("c1") + "\n");
  REQUIRE(profiles.size() == 3);
  CHECK(profiles[0].candidate_id == "c1");
  CHECK(profiles[1].candidate_id == "c10");
  CHECK(profiles[2].candidate_id == "c2");
}

TEST_CASE("out-of-range trait is a validation error") {
  std::string traits = "[150";
  for (std::size_t i = 1; i < kNumTraits; ++i) traits += ",0";
  traits += "]";
  CHECK_THROWS_AS(parse_profiles(profile_line("c1", traits)), ValidationError);
  CHECK_NOTHROW(parse_profiles(profile_line("c1", "[100,-100,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,null]")));
}

TEST_CASE("duplicate candidate id is rejected") {
  CHECK_THROWS_AS(parse_profiles(profile_line("c1") + "\n" + profile_line("c1") + "\n"),
                  ValidationError);
}

TEST_CASE("trait length other than 18 is rejected") {
  CHECK_THROWS_AS(parse_profiles(profile_line("c1", "[0,0,0]")), ValidationError);
}

TEST_CASE("malformed line reports its line number") {
  try {
    parse_profiles(profile_line("c1") + "\n{not json\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("keyword invariants") {
  CandidateProfile p = make_profile("c1", {});
  p.traits.fill(0.0);
  p.keywords(EntityCategory::HardSkills) = {"python", "python"};
  CHECK_THROWS_AS(validate_profile(p), ValidationError);
  p.keywords(EntityCategory::HardSkills) = {""};
  CHECK_THROWS_AS(validate_profile(p), ValidationError);
  p.keywords(EntityCategory::HardSkills) = {"Python"};
  CHECK_THROWS_AS(validate_profile(p), ValidationError);
  p.keywords(EntityCategory::HardSkills) = {"python", "sql"};
  CHECK_NOTHROW(validate_profile(p));
}

TEST_CASE("outcomes parse, validate and reject duplicate pairs") {
  const auto outcomes = parse_outcomes(
      R"({"candidate_id":"c1","selection_id":"s1","stage":3})"
      "\n"
      R"({"candidate_id":"c1","selection_id":"s2","stage":0})"
      "\n");
  REQUIRE(outcomes.size() == 2);
  CHECK(outcomes[0].stage == 3);
  CHECK_THROWS_AS(parse_outcomes(R"({"candidate_id":"c1","selection_id":"s1","stage":4})"),
                  ValidationError);
  CHECK_THROWS_AS(parse_outcomes(R"({"candidate_id":"c1","selection_id":"s1","stage":1})"
                                 "\n"
                                 R"({"candidate_id":"c1","selection_id":"s1","stage":2})"),
                  ValidationError);
}

TEST_CASE("normalize_traits imputes the median then z-scores") {
  std::vector<CandidateProfile> ps;
  const std::array<std::optional<double>, 4> column = {1.0, 2.0, 3.0, std::nullopt};
  for (std::size_t i = 0; i < 4; ++i) {
    std::array<std::optional<double>, kNumTraits> t{};
    t.fill(0.0);
    t[0] = column[i];
    ps.push_back(make_profile("c" + std::to_string(i), t));
  }
  const auto [norm, stats] = normalize_traits(ps);
  CHECK(stats.median[0] == doctest::Approx(2.0));
  CHECK(stats.mean[0] == doctest::Approx(2.0));
  CHECK(stats.std[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  const double expected[] = {-1.4142135623730951, 0.0, 1.4142135623730951, 0.0};
  for (std::size_t i = 0; i < 4; ++i) CHECK(*norm[i].traits[0] == doctest::Approx(expected[i]).epsilon(1e-12));
  // all-zero column and constant column both map to zero
  for (const auto& p : norm) CHECK(*p.traits[1] == 0.0);
}

TEST_CASE("constant column maps to zero and an all-missing column is an error") {
  std::vector<CandidateProfile> ps;
  for (int i = 0; i < 3; ++i) {
    std::array<std::optional<double>, kNumTraits> t{};
    t.fill(5.0);
    ps.push_back(make_profile("c" + std::to_string(i), t));
  }
  const auto [norm, stats] = normalize_traits(ps);
  CHECK(stats.std[0] == 0.0);
  for (const auto& p : norm) CHECK(*p.traits[0] == 0.0);
  for (auto& p : ps) p.traits[7].reset();
  CHECK_THROWS_AS(normalize_traits(ps), ValidationError);
}

TEST_CASE("re-normalizing normalized data gives mean 0 and std 1") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(10.0, 20.0);
  std::bernoulli_distribution missing(0.1);
  std::vector<CandidateProfile> ps;
  for (int i = 0; i < 200; ++i) {
    std::array<std::optional<double>, kNumTraits> t{};
    for (auto& v : t) {
      if (!missing(rng)) v = std::clamp(g(rng), -100.0, 100.0);
    }
    ps.push_back(make_profile("c" + std::to_string(1000 + i), t));
  }
  const auto first = normalize_traits(ps).first;
  const auto [second, stats] = normalize_traits(first);
  for (std::size_t t = 0; t < kNumTraits; ++t) {
    CHECK(std::abs(stats.mean[t]) < 1e-9);
    CHECK(std::abs(stats.std[t] - 1.0) < 1e-9);
  }
  (void)second;
}

TEST_CASE("imputation leaves present values untouched before scaling") {
  std::vector<CandidateProfile> ps;
  for (int i = 0; i < 5; ++i) {
    std::array<std::optional<double>, kNumTraits> t{};
    t.fill(static_cast<double>(i));
    if (i == 4) t[3].reset();
    ps.push_back(make_profile("c" + std::to_string(i), t));
  }
  const auto [norm, stats] = normalize_traits(ps);
  for (int i = 0; i < 4; ++i) {
    const double back = *norm[i].traits[3] * stats.std[3] + stats.mean[3];
    CHECK(back == doctest::Approx(static_cast<double>(i)).epsilon(1e-12));
  }
}

TEST_CASE("trait stats persist") {
  testutil::TempDir dir;
  TraitStats s;
  for (std::size_t t = 0; t < kNumTraits; ++t) {
    s.median[t] = 0.1 * t;
    s.mean[t] = -0.3 * t;
    s.std[t] = 1.0 / (t + 1.0);
  }
  save_trait_stats(s, dir / "trait_stats.json");
  const auto back = load_trait_stats(dir / "trait_stats.json");
  CHECK(back.median == s.median);
  CHECK(back.mean == s.mean);
  CHECK(back.std == s.std);
}

TEST_CASE("profiles round-trip through a file") {
  testutil::TempDir dir;
  auto ps = parse_profiles(profile_line("a") + "\n" +
                           profile_line("b", "[1.5,-2.25,null,0,0,0,0,0,0,0,0,0,0,0,0,0,0,99.125]") + "\n");
  ps[1].keywords(EntityCategory::LanguageSkills) = {"italian", "english"};
  save_profiles(ps, dir / "p.jsonl");
  const auto back = load_profiles(dir / "p.jsonl");
  CHECK(back == ps);
  save_profiles(back, dir / "q.jsonl");
  CHECK(testutil::read_text(dir / "p.jsonl") == testutil::read_text(dir / "q.jsonl"));
}

TEST_CASE("missing input file is a validation error naming the path") {
  try {
    load_profiles("/nonexistent/profiles.jsonl");
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/profiles.jsonl") != std::string::npos);
  }
}

TEST_CASE("dataset statistics") {
  std::vector<SelectionOutcome> os = {{"a", "s1", 0}, {"b", "s1", 0}, {"c", "s1", 1}, {"d", "s1", 3},
                                      {"a", "s2", 2}};
  const auto st = compute_dataset_stats(os);
  CHECK(st.num_candidates == 4);
  CHECK(st.num_selections == 2);
  CHECK(st.num_pairs == 5);
  const auto& s1 = st.stage_percentages.at("s1");
  CHECK(s1[0] == doctest::Approx(50.0));
  CHECK(s1[1] == doctest::Approx(25.0));
  CHECK(s1[2] == doctest::Approx(0.0));
  CHECK(s1[3] == doctest::Approx(25.0));
  double total = 0.0;
  for (double v : s1) total += v;
  CHECK(std::abs(total - 100.0) <= 0.01);
  CHECK(st.pooled_percentages[2] == doctest::Approx(20.0));
}

TEST_CASE("normalize_text") {
  CHECK(normalize_text("  Team\tWork!! ") == "team work");
  CHECK(normalize_text("") == "");
  CHECK(normalize_text("C++  &  Java") == "c java");
  CHECK(normalize_text("Front-End   DEV") == "front-end dev");
  CHECK(normalize_text("caf\xc3\xa9 Menu") == "caf\xc3\xa9 menu");
  for (const char* s : {"  Team\tWork!! ", "C++  &  Java", "a\n\nb -- c", "!!!", "X_Y.Z"}) {
    const auto once = normalize_text(s);
    CHECK(normalize_text(once) == once);
  }
}

// ---------------------------------------------------------------------------
// Entity extraction

namespace {

class FlakyClient final : public ExtractionClient {
 public:
  explicit FlakyClient(int failures) : failures_(failures) {}
  nlohmann::json extract(const nlohmann::json& request) override {
    ++calls;
    if (calls <= failures_) throw TransportError("timeout");
    return {{"soft_skills", {"Team Work!"}}, {"hard_skills", nlohmann::json::array()},
            {"industry_sector", nlohmann::json::array()}, {"education", nlohmann::json::array()},
            {"language_skills", {request.at("text").get<std::string>()}}};
  }
  int calls = 0;

 private:
  int failures_;
};

class RogueClient final : public ExtractionClient {
 public:
  nlohmann::json extract(const nlohmann::json&) override { return {{"hobbies", {"chess"}}}; }
};

}  // namespace

TEST_CASE("dictionary stub extracts matching phrases") {
  DictionaryExtractor client({{"python", EntityCategory::HardSkills}});
  const auto map = extract_entities("python developer", client);
  CHECK(map[category_index(EntityCategory::HardSkills)] == std::vector<std::string>{"python"});
  for (auto c : kAllCategories) {
    if (c != EntityCategory::HardSkills) CHECK(map[category_index(c)].empty());
  }
}

TEST_CASE("dictionary stub respects word boundaries and multi-word phrases") {
  auto client = DictionaryExtractor::from_json(
      {{"java", "hard_skills"}, {"project management", "soft_skills"}, {"english", "language_skills"}});
  const auto map = extract_entities("JavaScript and Java; Project  Management, English.", client);
  CHECK(map[category_index(EntityCategory::HardSkills)] == std::vector<std::string>{"java"});
  CHECK(map[category_index(EntityCategory::SoftSkills)] ==
        std::vector<std::string>{"project management"});
  CHECK(map[category_index(EntityCategory::LanguageSkills)] == std::vector<std::string>{"english"});
  CHECK_THROWS_AS(DictionaryExtractor::from_json({{"x", "hobbies"}}), ValidationError);
}

TEST_CASE("empty text yields five empty sets") {
  DictionaryExtractor client({{"python", EntityCategory::HardSkills}});
  const auto map = extract_entities("", client);
  for (const auto& kws : map) CHECK(kws.empty());
}

TEST_CASE("responses are normalized") {
  FlakyClient client(0);
  const auto map = extract_entities("German", client);
  CHECK(map[category_index(EntityCategory::SoftSkills)] == std::vector<std::string>{"team work"});
  CHECK(map[category_index(EntityCategory::LanguageSkills)] == std::vector<std::string>{"german"});
}

TEST_CASE("transport failures are retried, then surfaced with the attempt count") {
  FlakyClient recovers(2);
  CHECK_NOTHROW(extract_entities("x", recovers, RetryPolicy{3}));
  CHECK(recovers.calls == 3);

  FlakyClient broken(10);
  try {
    extract_entities("x", broken, RetryPolicy{3});
    FAIL("expected a retryable error");
  } catch (const RetryableError& e) {
    CHECK(e.attempts() == 3);
    CHECK(broken.calls == 3);
  }
}

TEST_CASE("unknown category key is a protocol error") {
  RogueClient client;
  CHECK_THROWS_AS(extract_entities("x", client), ProtocolError);
}
