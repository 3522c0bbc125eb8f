#include "talentgraph/extraction.hpp"

#include <algorithm>
#include <set>

#include "talentgraph/errors.hpp"

namespace talent {

using nlohmann::json;

DictionaryExtractor::DictionaryExtractor(std::map<std::string, EntityCategory> dictionary) {
  for (auto& [phrase, cat] : dictionary) {
    auto key = normalize_text(phrase);
    if (!key.empty()) dictionary_.emplace(std::move(key), cat);
  }
}

DictionaryExtractor DictionaryExtractor::from_json(const json& dictionary) {
  if (!dictionary.is_object()) throw ValidationError("extraction dictionary must be an object");
  std::map<std::string, EntityCategory> entries;
  for (const auto& [phrase, value] : dictionary.items()) {
    if (!value.is_string()) throw ValidationError("dictionary value for '" + phrase + "' not a string");
    auto cat = parse_category_key(value.get<std::string>());
    if (!cat) throw ValidationError("dictionary: unknown category '" + value.get<std::string>() + "'");
    entries.emplace(phrase, *cat);
  }
  return DictionaryExtractor(std::move(entries));
}

json DictionaryExtractor::extract(const json& request) {
  if (!request.is_object() || !request.contains("text") || !request["text"].is_string()) {
    throw ProtocolError("extraction request must be {\"text\": str}");
  }
  const std::string text = normalize_text(request["text"].get<std::string>());
  EntityMap found;
  for (const auto& [phrase, cat] : dictionary_) {
    std::size_t pos = 0;
    while ((pos = text.find(phrase, pos)) != std::string::npos) {
      const bool left_ok = pos == 0 || text[pos - 1] == ' ';
      const std::size_t end = pos + phrase.size();
      const bool right_ok = end == text.size() || text[end] == ' ';
      if (left_ok && right_ok) {
        found[category_index(cat)].push_back(phrase);
        break;
      }
      ++pos;
    }
  }
  return entity_map_to_json(found);
}

EntityMap entity_map_from_json(const json& object) {
  if (!object.is_object()) throw ProtocolError("entity response is not a JSON object");
  EntityMap out;
  for (const auto& [key, list] : object.items()) {
    auto cat = parse_category_key(key);
    if (!cat) throw ProtocolError("unknown entity category '" + key + "' in response");
    if (!list.is_array()) throw ProtocolError("entity list '" + key + "' is not an array");
    auto& dst = out[category_index(*cat)];
    std::set<std::string> seen;
    for (const auto& kw : list) {
      if (!kw.is_string()) throw ProtocolError("non-string keyword in '" + key + "'");
      auto norm = normalize_text(kw.get<std::string>());
      if (norm.empty() || !seen.insert(norm).second) continue;
      dst.push_back(std::move(norm));
    }
  }
  return out;
}

json entity_map_to_json(const EntityMap& entities) {
  json obj = json::object();
  for (auto c : kAllCategories) obj[std::string(category_key(c))] = entities[category_index(c)];
  return obj;
}

EntityMap extract_entities(std::string_view cv_text, ExtractionClient& client, RetryPolicy retry) {
  const json request = {{"text", normalize_text(cv_text)}};
  const int attempts = std::max(1, retry.max_attempts);
  std::string last_error;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    json response;
    try {
      response = client.extract(request);
    } catch (const TransportError& e) {
      last_error = e.what();
      continue;
    }
    return entity_map_from_json(response);
  }
  throw RetryableError(attempts, "entity extraction failed: " + last_error);
}

}  // namespace talent
