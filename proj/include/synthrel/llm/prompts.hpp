#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "synthrel/corpus.hpp"
#include "synthrel/error.hpp"
#include "synthrel/jsonl.hpp"
#include "synthrel/templates.hpp"

namespace synthrel::llm {

enum class PromptKind { PositiveGen, Revision, Labeling };

inline const char* to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::PositiveGen: return "positive_gen";
    case PromptKind::Revision: return "revision";
    case PromptKind::Labeling: return "labeling";
  }
  return "unknown";
}

struct Prompt {
  PromptKind kind = PromptKind::Labeling;
  std::string text;
  // Audit and replay fields: doc_id, query, pattern_id, plus the raw inputs
  // the prompt was built from.
  std::map<std::string, std::string> metadata;

  std::string meta(const std::string& key) const {
    auto it = metadata.find(key);
    return it == metadata.end() ? std::string{} : it->second;
  }

  /// Identity of the logical request: (kind, doc, query, pattern, unit).
  /// `unit_id` tells apart otherwise identical requests issued for
  /// different work items.
  std::string request_key() const {
    std::string key = to_string(kind);
    for (const char* field : {"doc_id", "query", "pattern_id", "unit_id"}) {
      key += '\x1f';
      key += meta(field);
    }
    return key;
  }
};

// Prompt bodies. Placeholders in braces are substituted in a single pass;
// unknown names (such as the {KEYWORD} sentinel) are left untouched.
struct PromptTemplates {
  std::string positive_gen;
  std::string revision;
  std::string labeling;

  static PromptTemplates defaults();

  /// Replaces the bodies whose path is non-empty with the file contents.
  static PromptTemplates load(const std::filesystem::path& positive_gen,
                              const std::filesystem::path& revision,
                              const std::filesystem::path& labeling) {
    auto t = defaults();
    if (!positive_gen.empty()) t.positive_gen = read_text_file(positive_gen);
    if (!revision.empty()) t.revision = read_text_file(revision);
    if (!labeling.empty()) t.labeling = read_text_file(labeling);
    return t;
  }
};

inline PromptTemplates PromptTemplates::defaults() {
  PromptTemplates t;
  t.positive_gen = R"(## Role
You are an assistant generating keywords and user search queries from file metadata and content.

## Input
- A structured string of file metadata parts, separated by " | ".
- Text content of the file.
- Metadata may contain content placeholders written as {KEYWORD}.

## Task
Step 1: Keyword Extraction
- Extract up to 6 relevant single-word keywords from the content.
- Exclude stop words.
- If content is empty, return an empty list.

Step 2: Query Generation
- Use the metadata string in exact order to form natural queries.
- Replace each content placeholder {KEYWORD} with a keyword.
- Generate 3 distinct queries without reordering parts.

## Examples
{examples}

## Metadata
{metadata}

## Content
{content}

## Output Format
Keywords: k1, k2, k3, ...
Queries: q1, q2, q3
)";

  t.revision = R"(## Role
You are an assistant validating and revising user-generated search queries.

## Input
- Metadata string (with possible keyword placeholders written as {KEYWORD})
- Keywords list
- Three generated queries

## Task
Step 1: Validation
- Ensure queries follow metadata order and structure.
- Replace each content placeholder {KEYWORD} with a keyword.
- Avoid redundancy; keep queries short and natural.

Step 2: Modification
- Revise queries so that each metadata part is phrased differently across the three queries.

## Examples
{examples}

## Metadata
{metadata}

## Keywords
{keywords}

## Queries
{queries}

## Output Format
Revised Queries: query1, query2, query3
)";

  t.labeling = R"(## Role
You are an enterprise search quality rater evaluating file/message relevance.

## Task
Given a query and an entity (document), assign a relevance score in the range of 0-4:
- 4 = ideal quality, should be the ideal result
- 3 = good quality, clearly useful for the query
- 2 = fair quality, partially matches the query
- 1 = poor quality, barely related to the query
- 0 = bad quality, should never be shown
{explanation}
## Query
{query}

## Document metadata and highlights
{document}

## Output
Score: <between 0 and 4>
)";
  return t;
}

inline constexpr std::string_view kDefaultGenerationExamples =
    R"(Metadata: Word Tutorial | {KEYWORD}
Content: How to add a page in Word: place the cursor and choose Insert > Blank Page.
Keywords: page, word, add, insert, blank, cursor
Queries: word tutorial add page, word tutorial blank page, tutorial insert page)";

inline constexpr std::string_view kDefaultRevisionExamples =
    R"(Metadata: Lisa Morrison | AddPage.docx
Queries: lisa morrison addpage, lisa morrison addpage docx, lisa morrison add page
Revised Queries: lisa addpage, morrison add page docx, lisa morrison page)";

inline constexpr std::string_view kExplanationInstruction =
    "Before the score line, explain your reasoning in one or two sentences.\n";

/// Single-pass `{name}` substitution; substituted text is never rescanned.
inline std::string fill_template(std::string_view tmpl,
                                 const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

struct PromptOptions {
  std::string generation_examples{kDefaultGenerationExamples};
  std::string revision_examples{kDefaultRevisionExamples};
  // Content characters shown as highlights in the labeling prompt; 0 = all.
  std::size_t highlight_chars = 0;
};

inline Prompt build_positive_prompt(const PromptTemplates& templates, const PromptOptions& opts,
                                    const std::string& metadata_string, const std::string& content) {
  if (metadata_string.empty()) throw ConfigError("metadata string must not be empty");
  Prompt p;
  p.kind = PromptKind::PositiveGen;
  p.text = fill_template(templates.positive_gen, {{"metadata", metadata_string},
                                                  {"content", content},
                                                  {"examples", opts.generation_examples}});
  p.metadata["metadata_string"] = metadata_string;
  p.metadata["content"] = content;
  return p;
}

inline std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += sep;
    out += items[i];
  }
  return out;
}

inline Prompt build_revision_prompt(const PromptTemplates& templates, const PromptOptions& opts,
                                    const std::string& metadata_string, const TokenList& keywords,
                                    const std::vector<std::string>& queries) {
  if (queries.size() != 3) throw ConfigError("revision requires exactly 3 queries");
  Prompt p;
  p.kind = PromptKind::Revision;
  p.text = fill_template(templates.revision, {{"metadata", metadata_string},
                                              {"keywords", join(keywords, ", ")},
                                              {"queries", join(queries, ", ")},
                                              {"examples", opts.revision_examples}});
  p.metadata["metadata_string"] = metadata_string;
  p.metadata["keywords"] = join(keywords, ", ");
  for (std::size_t i = 0; i < 3; ++i) p.metadata["query_" + std::to_string(i)] = queries[i];
  return p;
}

namespace detail {

// Cuts at a UTF-8 boundary, backing up to the last space when one is near.
inline std::string truncate_highlight(const std::string& s, std::size_t limit) {
  if (limit == 0 || s.size() <= limit) return s;
  std::size_t cut = limit;
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  auto space = s.rfind(' ', cut);
  if (space != std::string::npos && space + 32 > cut) cut = space;
  return s.substr(0, cut);
}

}  // namespace detail

/// Metadata lines followed by the content highlight, as shown to the labeler.
inline std::string render_document_for_labeling(const Document& doc, std::size_t highlight_chars) {
  std::string out;
  auto line = [&](std::string_view label, const std::string& value) {
    out += label;
    out += ": ";
    out += value;
    out += '\n';
  };
  line("File name", doc.file_name);
  line("Author", doc.author);
  line("Title", doc.title);
  line("File type", doc.file_type);
  line("Parent folder", doc.parent_folder);
  for (const auto& [k, v] : doc.extra) line(k, v);
  line("Highlights", detail::truncate_highlight(doc.content, highlight_chars));
  return out;
}

/// Labeling prompt; `for_training` drops the explanation instruction so the
/// expected completion is the bare score line.
inline Prompt build_labeling_prompt(const PromptTemplates& templates, const PromptOptions& opts,
                                    const std::string& query, const Document& doc,
                                    bool for_training = false) {
  if (query.empty()) throw ConfigError("labeling requires a non-empty query");
  Prompt p;
  p.kind = PromptKind::Labeling;
  const auto document = render_document_for_labeling(doc, opts.highlight_chars);
  p.text = fill_template(templates.labeling,
                         {{"query", query},
                          {"document", document},
                          {"explanation", for_training ? std::string{} : std::string(kExplanationInstruction)}});
  p.metadata["doc_id"] = doc.id;
  p.metadata["query"] = query;
  p.metadata["document"] = document;
  return p;
}

}  // namespace synthrel::llm
