#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthrel/error.hpp"

namespace synthrel {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

/// Calls `fn(object, line_number)` for every non-blank line. Line numbers are
/// 1-based. Malformed JSON raises DataError naming file and line.
inline void for_each_jsonl(const std::filesystem::path& path,
                           const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error&) {
      throw DataError("malformed JSON at " + path.filename().string() + " line " +
                      std::to_string(line_no));
    }
    fn(obj, line_no);
  }
}

template <typename Json>
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows) {
  std::string text;
  for (const auto& row : rows) {
    text += row.dump();
    text += '\n';
  }
  write_text_file(path, text);
}

}  // namespace synthrel
