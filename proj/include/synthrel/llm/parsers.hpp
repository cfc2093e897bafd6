#pragma once

#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "synthrel/corpus.hpp"
#include "synthrel/error.hpp"

namespace synthrel::llm {

inline constexpr std::size_t kMaxKeywords = 6;
inline constexpr std::size_t kQueriesPerPrompt = 3;

struct GenerationResult {
  TokenList keywords;
  std::vector<std::string> queries;  // exactly 3, non-empty
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

inline bool iequals_prefix(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

// Body of the last line of the form "<prefix>: body". Leading markdown
// emphasis is tolerated.
inline std::optional<std::string_view> last_prefixed_line(std::string_view text,
                                                          std::string_view prefix) {
  std::optional<std::string_view> found;
  for (auto line : lines_of(text)) {
    line = trim(line);
    while (!line.empty() && (line.front() == '*' || line.front() == '#')) line.remove_prefix(1);
    line = trim(line);
    if (!iequals_prefix(line, prefix)) continue;
    auto rest = trim(line.substr(prefix.size()));
    while (!rest.empty() && rest.front() == '*') rest.remove_prefix(1);
    rest = trim(rest);
    if (rest.empty() || rest.front() != ':') continue;
    rest.remove_prefix(1);
    while (!rest.empty() && rest.front() == '*') rest.remove_prefix(1);
    found = trim(rest);
  }
  return found;
}

}  // namespace detail

/// Splits a comma-separated list. Double-quoted items may contain commas;
/// the quotes are removed and items are trimmed. An all-blank body yields an
/// empty list.
inline std::vector<std::string> split_list(std::string_view body) {
  std::vector<std::string> items;
  if (detail::trim(body).empty()) return items;
  std::string current;
  bool quoted = false;
  bool was_quoted = false;
  auto flush = [&] {
    std::string item = was_quoted ? current : std::string(detail::trim(current));
    items.push_back(std::move(item));
    current.clear();
    was_quoted = false;
  };
  for (char c : body) {
    if (c == '"') {
      if (quoted) {
        quoted = false;
      } else if (detail::trim(current).empty()) {
        current.clear();
        quoted = true;
        was_quoted = true;
      } else {
        current += c;
      }
    } else if (c == ',' && !quoted) {
      flush();
    } else if (quoted || !was_quoted) {
      current += c;
    }
  }
  if (quoted) throw ParseError(ParseErrorKind::Malformed, "unterminated quote");
  flush();
  return items;
}

namespace detail {

inline std::vector<std::string> parse_three_queries(std::string_view text, std::string_view prefix) {
  auto body = last_prefixed_line(text, prefix);
  if (!body) throw ParseError(ParseErrorKind::MissingLine, "missing " + std::string(prefix) + " line");
  auto queries = split_list(*body);
  if (queries.size() != kQueriesPerPrompt) {
    throw ParseError(ParseErrorKind::WrongCount,
                     "expected 3 queries, got " + std::to_string(queries.size()));
  }
  for (const auto& q : queries) {
    if (q.empty()) throw ParseError(ParseErrorKind::Malformed, "empty query in " + std::string(prefix) + " line");
  }
  return queries;
}

}  // namespace detail

/// Parses "Keywords: k1, k2, ...\nQueries: q1, q2, q3". Both lines are
/// required; keywords beyond six are dropped.
inline GenerationResult parse_generation(std::string_view text) {
  GenerationResult result;
  auto kw = detail::last_prefixed_line(text, "Keywords");
  if (!kw) throw ParseError(ParseErrorKind::MissingLine, "missing Keywords line");
  for (auto& k : split_list(*kw)) {
    if (k.empty()) throw ParseError(ParseErrorKind::Malformed, "empty keyword");
    if (result.keywords.size() < kMaxKeywords) result.keywords.push_back(std::move(k));
  }
  result.queries = detail::parse_three_queries(text, "Queries");
  return result;
}

/// Parses "Revised Queries: q1, q2, q3".
inline std::vector<std::string> parse_revision(std::string_view text) {
  return detail::parse_three_queries(text, "Revised Queries");
}

/// Integer from the last "Score: <n>" line; n must be in 0..4.
inline int parse_score(std::string_view text) {
  auto body = detail::last_prefixed_line(text, "Score");
  if (!body) throw ParseError(ParseErrorKind::MissingLine, "missing score line");
  std::string_view s = *body;
  while (!s.empty() && (s.back() == '.' || s.back() == '*')) s.remove_suffix(1);
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (s.empty() || s.size() > 9) throw ParseError(ParseErrorKind::Malformed, "malformed score line");
  int value = 0;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      throw ParseError(ParseErrorKind::Malformed, "malformed score line");
    }
    value = value * 10 + (c - '0');
  }
  if (negative) value = -value;
  if (value < 0 || value > 4) throw ParseError(ParseErrorKind::OutOfRange, "score out of range");
  return value;
}

}  // namespace synthrel::llm
