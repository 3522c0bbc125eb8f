#include "talentgraph/embedding_service.hpp"

#include <cmath>
#include <random>

#include <json.hpp>

#include "io_util.hpp"
#include "talentgraph/errors.hpp"

namespace talent {

namespace {

constexpr std::string_view kStoreMagic = "EMB1";
constexpr std::uint32_t kStoreVersion = 1;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::vector<double> stub_embed(std::string_view keyword, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(splitmix64(fnv1a(keyword) ^ splitmix64(seed)));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : v) {
      x = gauss(rng);
      norm2 += x * x;
    }
  } while (norm2 == 0.0);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

StubEmbeddingProvider::StubEmbeddingProvider(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim < 2) throw ValidationError("embedding dimension must be >= 2");
}

std::vector<double> StubEmbeddingProvider::embed(std::string_view keyword) {
  return stub_embed(keyword, dim_, seed_);
}

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config) {
  if (config.dim < 2) throw ValidationError("embedding dimension must be >= 2");
  if (config.kind == ProviderKind::External) {
    throw ValidationError("external embedding provider is not available in this build");
  }
  return std::make_unique<StubEmbeddingProvider>(config.dim, config.stub_seed);
}

std::vector<EmbeddingSet> embed_profile(const CandidateProfile& profile,
                                        EmbeddingProvider& provider, RetryPolicy retry) {
  const std::size_t dim = provider.dimension();
  const int attempts = std::max(1, retry.max_attempts);
  std::vector<EmbeddingSet> sets;
  sets.reserve(kNumCategories);
  for (auto cat : kAllCategories) {
    EmbeddingSet set{profile.candidate_id, cat, dim, {}};
    for (const auto& kw : profile.keywords(cat)) {
      std::vector<double> v;
      std::string last_error;
      bool ok = false;
      for (int attempt = 1; attempt <= attempts && !ok; ++attempt) {
        try {
          v = provider.embed(kw);
          ok = true;
        } catch (const TransportError& e) {
          last_error = e.what();
        }
      }
      if (!ok) throw RetryableError(attempts, "embedding '" + kw + "' failed: " + last_error);
      if (v.size() != dim) {
        throw ProtocolError("provider returned dimension " + std::to_string(v.size()) +
                            " for '" + kw + "', expected " + std::to_string(dim));
      }
      double norm2 = 0.0;
      for (double x : v) norm2 += x * x;
      const double norm = std::sqrt(norm2);
      if (!std::isfinite(norm) || norm == 0.0) {
        throw ProtocolError("provider returned a zero or non-finite vector for '" + kw + "'");
      }
      for (double x : v) set.data.push_back(static_cast<float>(x / norm));
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

std::string encode_store(const std::vector<EmbeddingSet>& sets) {
  const std::size_t dim = sets.empty() ? 0 : sets.front().dim;
  detail::BinaryWriter w;
  w.put_bytes(kStoreMagic);
  w.put<std::uint32_t>(kStoreVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dim));
  w.put<std::uint64_t>(sets.size());
  for (const auto& s : sets) {
    if (s.dim != dim) {
      throw ValidationError("inconsistent embedding dimension for " + s.candidate_id + ": " +
                            std::to_string(s.dim) + " vs " + std::to_string(dim));
    }
    if (dim != 0 && s.data.size() % dim != 0) {
      throw ValidationError("embedding payload not a multiple of dim for " + s.candidate_id);
    }
    w.put_string(s.candidate_id);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.category));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    for (float x : s.data) w.put<float>(x);
  }
  return w.data();
}

std::vector<EmbeddingSet> decode_store(std::string_view bytes) {
  detail::BinaryReader r(bytes);
  auto magic = r.get_bytes(4, "magic");
  if (magic != kStoreMagic) throw FormatError(0, "bad magic, expected EMB1");
  auto version = r.get<std::uint32_t>("version");
  if (version != kStoreVersion) {
    throw FormatError(4, "unsupported EMB1 version " + std::to_string(version));
  }
  const std::size_t dim = r.get<std::uint32_t>("dim");
  const auto count = r.get<std::uint64_t>("record count");
  std::vector<EmbeddingSet> sets;
  for (std::uint64_t rec = 0; rec < count; ++rec) {
    EmbeddingSet s;
    s.dim = dim;
    s.candidate_id = r.get_string("candidate id");
    const std::size_t cat_offset = r.offset();
    const int code = r.get<std::uint8_t>("category");
    if (code >= static_cast<int>(kNumCategories)) {
      throw FormatError(cat_offset, "invalid category code " + std::to_string(code));
    }
    s.category = static_cast<EntityCategory>(code);
    const std::size_t n = r.get<std::uint32_t>("vector count");
    const std::size_t floats = n * dim;
    auto payload = r.get_bytes(floats * sizeof(float), "vector payload");
    s.data.resize(floats);
    if (floats != 0) std::memcpy(s.data.data(), payload.data(), payload.size());
    sets.push_back(std::move(s));
  }
  if (!r.at_end()) throw FormatError(r.offset(), "trailing bytes after last record");
  return sets;
}

void write_store(const std::vector<EmbeddingSet>& sets, const std::filesystem::path& path) {
  detail::write_file(path, encode_store(sets));
}

std::vector<EmbeddingSet> read_store(const std::filesystem::path& path) {
  return decode_store(detail::read_file(path));
}

void write_keyword_sidecar(const std::vector<CandidateProfile>& profiles,
                           const std::filesystem::path& path) {
  std::string text;
  for (const auto& p : profiles) {
    for (auto cat : kAllCategories) {
      nlohmann::json obj = {{"candidate_id", p.candidate_id},
                            {"category", static_cast<int>(cat)},
                            {"keywords", p.keywords(cat)}};
      text += obj.dump();
      text += '\n';
    }
  }
  detail::write_file(path, text);
}

}  // namespace talent
