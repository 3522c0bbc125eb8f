#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "talentgraph/profile_store.hpp"

namespace talent {

/// Entity-extraction client. The request is {"text": str}; the response is the
/// five-key entity map used in profiles.jsonl. Implementations signal a failed
/// call with TransportError.
class ExtractionClient {
 public:
  virtual ~ExtractionClient() = default;
  virtual nlohmann::json extract(const nlohmann::json& request) = 0;
};

/// Offline client: reports every dictionary phrase found in the text on word
/// boundaries, under the phrase's category.
class DictionaryExtractor final : public ExtractionClient {
 public:
  explicit DictionaryExtractor(std::map<std::string, EntityCategory> dictionary);

  /// Reads {"phrase": "category_key", ...}.
  static DictionaryExtractor from_json(const nlohmann::json& dictionary);

  nlohmann::json extract(const nlohmann::json& request) override;

 private:
  std::map<std::string, EntityCategory> dictionary_;
};

struct RetryPolicy {
  int max_attempts = 3;
};

/// Calls the client with the normalized text, retrying transport failures.
/// Keywords in the response are normalized and deduplicated (first occurrence wins);
/// empty keywords are dropped.
EntityMap extract_entities(std::string_view cv_text, ExtractionClient& client,
                           RetryPolicy retry = {});

/// Converts an entity-map JSON object into EntityMap. Unknown keys raise ProtocolError.
EntityMap entity_map_from_json(const nlohmann::json& object);
nlohmann::json entity_map_to_json(const EntityMap& entities);

}  // namespace talent
