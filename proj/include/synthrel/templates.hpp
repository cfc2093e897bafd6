#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "synthrel/corpus.hpp"
#include "synthrel/error.hpp"
#include "synthrel/jsonl.hpp"
#include "synthrel/random.hpp"

namespace synthrel {

/// Separator between rendered slots in a metadata string.
inline constexpr std::string_view kSlotDelimiter = " | ";
/// Literal left in place of a keyword slot for the model to fill.
inline constexpr std::string_view kKeywordSentinel = "{KEYWORD}";

struct PatternSlot {
  enum class Kind { MetadataField, KeywordPlaceholder };

  Kind kind = Kind::MetadataField;
  std::string name;  // field name; empty for keyword slots

  static PatternSlot field(std::string name) { return {Kind::MetadataField, std::move(name)}; }
  static PatternSlot keyword() { return {Kind::KeywordPlaceholder, {}}; }

  bool operator==(const PatternSlot&) const = default;
};

struct QueryPattern {
  std::string id;
  std::vector<PatternSlot> slots;
  double weight = 1.0;
};

// Query patterns with prefix sums over their weights for sampling.
class PatternTable {
 public:
  explicit PatternTable(std::vector<QueryPattern> patterns) : patterns_(std::move(patterns)) {
    if (patterns_.empty()) throw DataError("empty pattern table");
    double total = 0.0;
    cumulative_.reserve(patterns_.size());
    for (const auto& p : patterns_) {
      if (p.id.empty()) throw DataError("pattern with empty id");
      if (p.slots.empty()) throw DataError("pattern " + p.id + " has no slots");
      if (!(p.weight > 0.0)) throw DataError("pattern " + p.id + " has non-positive weight");
      total += p.weight;
      cumulative_.push_back(total);
    }
  }

  const std::vector<QueryPattern>& patterns() const noexcept { return patterns_; }
  const std::vector<double>& cumulative_weights() const noexcept { return cumulative_; }
  double total_weight() const noexcept { return cumulative_.back(); }
  std::size_t size() const noexcept { return patterns_.size(); }

  const QueryPattern* find(std::string_view id) const {
    for (const auto& p : patterns_) {
      if (p.id == id) return &p;
    }
    return nullptr;
  }

 private:
  std::vector<QueryPattern> patterns_;
  std::vector<double> cumulative_;
};

inline PatternSlot slot_from_json(const json& j, const std::string& pattern_id) {
  if (j.is_string()) {
    // Shorthand: "keyword" or a bare field name.
    const auto s = j.get<std::string>();
    if (s == "keyword") return PatternSlot::keyword();
    return PatternSlot::field(s);
  }
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw DataError("pattern " + pattern_id + ": slot needs a string kind");
  }
  const auto kind = j["kind"].get<std::string>();
  if (kind == "keyword") return PatternSlot::keyword();
  if (kind == "metadata_field") {
    if (!j.contains("name") || !j["name"].is_string() || j["name"].get<std::string>().empty()) {
      throw DataError("pattern " + pattern_id + ": metadata_field slot needs a name");
    }
    return PatternSlot::field(j["name"].get<std::string>());
  }
  throw DataError("pattern " + pattern_id + ": unknown slot kind " + kind);
}

inline PatternTable pattern_table_from_json(const json& arr) {
  if (!arr.is_array()) throw DataError("pattern table must be a JSON array");
  std::vector<QueryPattern> patterns;
  for (const auto& item : arr) {
    if (!item.is_object()) throw DataError("pattern entry must be an object");
    QueryPattern p;
    p.id = item.value("id", std::string{});
    if (!item.contains("weight") || !item["weight"].is_number()) {
      throw DataError("pattern " + p.id + " needs a numeric weight");
    }
    p.weight = item["weight"].get<double>();
    if (!item.contains("slots") || !item["slots"].is_array()) {
      throw DataError("pattern " + p.id + " needs a slots array");
    }
    for (const auto& s : item["slots"]) p.slots.push_back(slot_from_json(s, p.id));
    patterns.push_back(std::move(p));
  }
  return PatternTable(std::move(patterns));
}

inline PatternTable load_pattern_table(const std::filesystem::path& path) {
  json arr;
  try {
    arr = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw DataError("malformed pattern table " + path.string() + ": " + e.what());
  }
  return pattern_table_from_json(arr);
}

inline json pattern_to_json(const QueryPattern& p) {
  json slots = json::array();
  for (const auto& s : p.slots) {
    if (s.kind == PatternSlot::Kind::KeywordPlaceholder) {
      slots.push_back({{"kind", "keyword"}});
    } else {
      slots.push_back({{"kind", "metadata_field"}, {"name", s.name}});
    }
  }
  return {{"id", p.id}, {"slots", slots}, {"weight", p.weight}};
}

/// Draws one pattern with probability weight / total (with replacement).
inline const QueryPattern& sample_pattern(const PatternTable& table, Rng& rng) {
  const auto& cum = table.cumulative_weights();
  const double u = uniform01(rng) * table.total_weight();
  auto it = std::upper_bound(cum.begin(), cum.end(), u);
  if (it == cum.end()) --it;
  return table.patterns()[static_cast<std::size_t>(it - cum.begin())];
}

/// Renders the pattern's slots, in order, joined by kSlotDelimiter. Keyword
/// slots become kKeywordSentinel; empty field values become empty segments.
inline std::string render_metadata_string(const QueryPattern& pattern, const Document& doc) {
  std::string out;
  for (std::size_t i = 0; i < pattern.slots.size(); ++i) {
    if (i > 0) out += kSlotDelimiter;
    const auto& slot = pattern.slots[i];
    if (slot.kind == PatternSlot::Kind::KeywordPlaceholder) {
      out += kKeywordSentinel;
      continue;
    }
    auto value = doc.field(slot.name);
    if (!value) {
      throw DataError("field " + slot.name + " unresolved in pattern " + pattern.id);
    }
    // A delimiter inside a value would break segment alignment.
    std::string v(*value);
    for (auto pos = v.find(kSlotDelimiter); pos != std::string::npos; pos = v.find(kSlotDelimiter)) {
      v.replace(pos, kSlotDelimiter.size(), " / ");
    }
    out += v;
  }
  return out;
}

/// Splits a rendered metadata string back into its segments.
inline std::vector<std::string> split_metadata_string(std::string_view s) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(kSlotDelimiter, start);
    if (pos == std::string_view::npos) {
      parts.emplace_back(s.substr(start));
      break;
    }
    parts.emplace_back(s.substr(start, pos - start));
    start = pos + kSlotDelimiter.size();
  }
  return parts;
}

}  // namespace synthrel
