#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace adbcr {

struct KeyValue {
  std::string key;
  std::string value;
  int line = 0;
};

// Flat "key = value" text. Blank lines and lines starting with '#' are
// skipped; keys and values are trimmed. Throws ParseError naming the source
// and line for a line without '=' or with an empty key, and for a repeated key.
std::vector<KeyValue> parse_key_values(const std::string& text,
                                       const std::string& source = "<memory>");
std::vector<KeyValue> load_key_values(const std::filesystem::path& path);

std::string trim(const std::string& s);
// Splits on `sep` and trims each piece; empty pieces are dropped.
std::vector<std::string> split_list(const std::string& s, char sep);

double parse_double(const std::string& text, const std::string& what);
long long parse_integer(const std::string& text, const std::string& what);

}  // namespace adbcr
