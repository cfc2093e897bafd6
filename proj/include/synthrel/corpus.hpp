#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "synthrel/error.hpp"
#include "synthrel/jsonl.hpp"

namespace synthrel {

using TokenList = std::vector<std::string>;

// One enterprise item: extracted text plus its structured metadata.
struct Document {
  std::string id;
  std::string content;
  std::string file_name;
  std::string author;
  std::string title;
  std::string file_type;
  std::string parent_folder;
  std::map<std::string, std::string> extra;

  /// Looks up a metadata field by name. Built-in fields always resolve
  /// (possibly to ""); other names resolve only through `extra`.
  std::optional<std::string_view> field(std::string_view name) const;

  bool operator==(const Document&) const = default;
};

namespace detail {

struct FieldAlias {
  std::string_view name;
  std::string Document::*member;
};

inline constexpr FieldAlias kFieldAliases[] = {
    {"file_name", &Document::file_name},
    {"filename", &Document::file_name},
    {"author", &Document::author},
    {"author_name", &Document::author},
    {"title", &Document::title},
    {"file_type", &Document::file_type},
    {"document_type", &Document::file_type},
    {"doc_type", &Document::file_type},
    {"parent_folder", &Document::parent_folder},
    {"folder", &Document::parent_folder},
    {"folder_name", &Document::parent_folder},
};

inline constexpr std::string_view kMetadataFields[] = {"file_name", "author", "title",
                                                       "file_type", "parent_folder"};

}  // namespace detail

inline std::optional<std::string_view> Document::field(std::string_view name) const {
  for (const auto& alias : detail::kFieldAliases) {
    if (alias.name == name) return std::string_view(this->*(alias.member));
  }
  if (auto it = extra.find(std::string(name)); it != extra.end()) return std::string_view(it->second);
  return std::nullopt;
}

/// True when `name` is a built-in metadata field or one of its aliases.
inline bool is_builtin_field(std::string_view name) {
  return std::any_of(std::begin(detail::kFieldAliases), std::end(detail::kFieldAliases),
                     [&](const auto& a) { return a.name == name; });
}

// Documents in ingestion order with an id lookup. Immutable once built.
class Corpus {
 public:
  Corpus() = default;

  /// Throws DataError on an empty or duplicate id.
  explicit Corpus(std::vector<Document> documents) : documents_(std::move(documents)) {
    by_id_.reserve(documents_.size());
    for (std::size_t i = 0; i < documents_.size(); ++i) {
      const auto& id = documents_[i].id;
      if (id.empty()) throw DataError("empty id at position " + std::to_string(i + 1));
      if (!by_id_.emplace(id, i).second) {
        throw DataError("duplicate id " + id + " at position " + std::to_string(i + 1));
      }
    }
  }

  const std::vector<Document>& documents() const noexcept { return documents_; }
  std::size_t size() const noexcept { return documents_.size(); }
  bool empty() const noexcept { return documents_.empty(); }
  const Document& operator[](std::size_t i) const { return documents_[i]; }

  std::optional<std::size_t> index_of(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  const Document& at(std::string_view id) const {
    auto idx = index_of(id);
    if (!idx) throw DataError("unknown document id " + std::string(id));
    return documents_[*idx];
  }

 private:
  std::vector<Document> documents_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

namespace detail {

// Decodes one UTF-8 code point starting at `i`. Invalid sequences yield
// U+FFFD and consume a single byte.
inline char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    const int c = cont(static_cast<std::size_t>(k));
    if (c < 0) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

inline void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

// Word characters: ASCII letters and digits, and every non-ASCII code point
// outside the common punctuation, symbol and space blocks.
inline bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  }
  if (cp <= 0xBF) return false;  // C1 controls, NBSP, Latin-1 punctuation
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x206F) return false;  // general punctuation
  if (cp >= 0x2190 && cp <= 0x2BFF) return false;  // arrows, math, shapes
  if (cp >= 0x3000 && cp <= 0x3003) return false;
  if (cp == 0xFEFF || cp == 0xFFFD) return false;
  if ((cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20)) return false;
  return true;
}

inline char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if ((cp >= 0xC0 && cp <= 0xDE) && cp != 0xD7) return cp + 32;  // Latin-1
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x100 && cp <= 0x17F && cp != 0x130 && cp != 0x131 && cp != 0x138 &&
      cp != 0x149 && cp != 0x17F) {
    // Latin Extended-A alternates upper/lower, with the parity flipping at
    // U+0139..U+0148 and U+0179..U+017E.
    const bool odd_upper = (cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E);
    const bool is_upper = odd_upper ? (cp % 2 == 1) : (cp % 2 == 0);
    return is_upper ? cp + 1 : cp;
  }
  if (cp >= 0x391 && cp <= 0x3AB && cp != 0x3A2) return cp + 32;  // Greek
  if (cp >= 0x410 && cp <= 0x42F) return cp + 32;                 // Cyrillic
  if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
  return cp;
}

}  // namespace detail

/// Lowercases and splits on every non-alphanumeric boundary. No stemming.
inline TokenList tokenize(std::string_view text) {
  TokenList tokens;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t cp = detail::decode_utf8(text, i);
    if (detail::is_word_char(cp)) {
      detail::encode_utf8(detail::to_lower(cp), current);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

// ---------------------------------------------------------------------------
// Stopwords and keyword fallback
// ---------------------------------------------------------------------------

using StopwordSet = std::unordered_set<std::string>;

inline const StopwordSet& default_stopwords() {
  static const StopwordSet words = {
      "a",       "about",   "above",  "after",   "again", "against", "all",    "am",
      "an",      "and",     "any",    "are",     "as",    "at",      "be",     "because",
      "been",    "before",  "being",  "below",   "between", "both",  "but",    "by",
      "can",     "could",   "did",    "do",      "does",  "doing",   "down",   "during",
      "each",    "few",     "for",    "from",    "further", "had",   "has",    "have",
      "having",  "he",      "her",    "here",    "hers",  "herself", "him",    "himself",
      "his",     "how",     "i",      "if",      "in",    "into",    "is",     "it",
      "its",     "itself",  "just",   "me",      "more",  "most",    "my",     "myself",
      "no",      "nor",     "not",    "now",     "of",    "off",     "on",     "once",
      "only",    "or",      "other",  "our",     "ours",  "ourselves", "out",  "over",
      "own",     "same",    "she",    "should",  "so",    "some",    "such",   "than",
      "that",    "the",     "their",  "theirs",  "them",  "themselves", "then", "there",
      "these",   "they",    "this",   "those",   "through", "to",    "too",    "under",
      "until",   "up",      "very",   "was",     "we",    "were",    "what",   "when",
      "where",   "which",   "while",  "who",     "whom",  "why",     "will",   "with",
      "would",   "you",     "your",   "yours",   "yourself", "yourselves", "also", "may",
  };
  return words;
}

/// Reads a stopword file: one word per line, '#' starts a comment.
inline StopwordSet load_stopwords(const std::filesystem::path& path) {
  StopwordSet words;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (auto& tok : tokenize(line)) words.insert(std::move(tok));
  }
  return words;
}

/// Deterministic keyword extraction: the `max_k` most frequent non-stopword
/// content tokens, ties broken lexicographically.
inline TokenList extract_keywords_fallback(const Document& doc, std::size_t max_k = 6,
                                           const StopwordSet& stopwords = default_stopwords()) {
  if (max_k == 0) throw ConfigError("max_k must be at least 1");
  std::unordered_map<std::string, std::size_t> freq;
  for (auto& tok : tokenize(doc.content)) {
    if (!stopwords.contains(tok)) ++freq[std::move(tok)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  TokenList out;
  for (std::size_t i = 0; i < ranked.size() && i < max_k; ++i) out.push_back(ranked[i].first);
  return out;
}

// ---------------------------------------------------------------------------
// JSONL ingestion
// ---------------------------------------------------------------------------

inline Document document_from_json(const json& obj) {
  if (!obj.is_object()) throw DataError("expected a JSON object");
  auto id_it = obj.find("id");
  if (id_it == obj.end() || !id_it->is_string() || id_it->get<std::string>().empty()) {
    throw DataError("missing string field id");
  }
  Document doc;
  doc.id = id_it->get<std::string>();
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const std::string& key = it.key();
    if (key == "id") continue;
    std::string value = it->is_string() ? it->get<std::string>() : (it->is_null() ? "" : it->dump());
    if (key == "content") doc.content = std::move(value);
    else if (key == "file_name") doc.file_name = std::move(value);
    else if (key == "author") doc.author = std::move(value);
    else if (key == "title") doc.title = std::move(value);
    else if (key == "file_type") doc.file_type = std::move(value);
    else if (key == "parent_folder") doc.parent_folder = std::move(value);
    else doc.extra.emplace(key, std::move(value));
  }
  return doc;
}

inline ordered_json document_to_json(const Document& doc) {
  ordered_json obj;
  obj["id"] = doc.id;
  obj["content"] = doc.content;
  obj["file_name"] = doc.file_name;
  obj["author"] = doc.author;
  obj["title"] = doc.title;
  obj["file_type"] = doc.file_type;
  obj["parent_folder"] = doc.parent_folder;
  for (const auto& [k, v] : doc.extra) obj[k] = v;
  return obj;
}

/// Loads a JSON-lines corpus, one document per line, preserving file order.
inline Corpus ingest_corpus(const std::filesystem::path& path) {
  std::vector<Document> docs;
  std::unordered_map<std::string, std::size_t> seen;
  for_each_jsonl(path, [&](const json& obj, std::size_t line_no) {
    Document doc;
    try {
      doc = document_from_json(obj);
    } catch (const DataError& e) {
      throw DataError(std::string(e.what()) + " at line " + std::to_string(line_no));
    }
    if (!seen.emplace(doc.id, line_no).second) {
      throw DataError("duplicate id " + doc.id + " at line " + std::to_string(line_no));
    }
    docs.push_back(std::move(doc));
  });
  return Corpus(std::move(docs));
}

inline void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::vector<ordered_json> rows;
  rows.reserve(corpus.size());
  for (const auto& d : corpus.documents()) rows.push_back(document_to_json(d));
  write_jsonl(path, rows);
}

}  // namespace synthrel
