#pragma once

#include <cstdint>
#include <memory>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "talentgraph/extraction.hpp"
#include "talentgraph/profile_store.hpp"

namespace talent {

inline constexpr std::size_t kDefaultEmbeddingDim = 768;

/// Keyword vectors of one (candidate, category) pair, row-major with `dim` floats per row.
struct EmbeddingSet {
  std::string candidate_id;
  EntityCategory category = EntityCategory::SoftSkills;
  std::size_t dim = 0;
  std::vector<float> data;

  std::size_t size() const { return dim == 0 ? 0 : data.size() / dim; }
  bool empty() const { return data.empty(); }
  std::span<const float> vector(std::size_t i) const { return {data.data() + i * dim, dim}; }

  bool operator==(const EmbeddingSet&) const = default;
};

enum class ProviderKind { External, Stub };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::Stub;
  std::size_t dim = kDefaultEmbeddingDim;
  std::uint64_t stub_seed = 0;
};

/// Maps one keyword to one vector. Failed calls throw TransportError.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<double> embed(std::string_view keyword) = 0;
  virtual std::size_t dimension() const = 0;
};

/// Deterministic unit vector: Gaussian draw seeded from a hash of (keyword, seed), normalized.
std::vector<double> stub_embed(std::string_view keyword, std::size_t dim, std::uint64_t seed);

class StubEmbeddingProvider final : public EmbeddingProvider {
 public:
  StubEmbeddingProvider(std::size_t dim, std::uint64_t seed);
  std::vector<double> embed(std::string_view keyword) override;
  std::size_t dimension() const override { return dim_; }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Builds a provider for the config. ProviderKind::External has no in-tree
/// implementation and raises ValidationError.
std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config);

/// One EmbeddingSet per category (in category order), one L2-normalized vector per keyword.
std::vector<EmbeddingSet> embed_profile(const CandidateProfile& profile,
                                        EmbeddingProvider& provider, RetryPolicy retry = {});

// EMB1 container: "EMB1" | u32 version | u32 dim | u64 record_count | records,
// record = u32 id_len | id bytes | u8 category | u32 vec_count | vec_count*dim f32.
void write_store(const std::vector<EmbeddingSet>& sets, const std::filesystem::path& path);
std::vector<EmbeddingSet> read_store(const std::filesystem::path& path);
std::string encode_store(const std::vector<EmbeddingSet>& sets);
std::vector<EmbeddingSet> decode_store(std::string_view bytes);

/// Sidecar JSONL with {"candidate_id","category","keywords"} per (candidate, category).
void write_keyword_sidecar(const std::vector<CandidateProfile>& profiles,
                           const std::filesystem::path& path);

}  // namespace talent
