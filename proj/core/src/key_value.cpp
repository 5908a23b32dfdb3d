#include "adbcr/key_value.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "adbcr/errors.hpp"

namespace adbcr {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<KeyValue> parse_key_values(const std::string& text, const std::string& source) {
  std::vector<KeyValue> out;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    const std::string where = source + ":" + std::to_string(number);
    if (eq == std::string::npos) throw ParseError(where + ": expected key = value");
    KeyValue kv{trim(body.substr(0, eq)), trim(body.substr(eq + 1)), number};
    if (kv.key.empty()) throw ParseError(where + ": empty key");
    if (!seen.insert(kv.key).second) throw ParseError(where + ": duplicate key '" + kv.key + "'");
    out.push_back(std::move(kv));
  }
  return out;
}

std::vector<KeyValue> load_key_values(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path.string());
}

double parse_double(const std::string& text, const std::string& what) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError(what + ": '" + text + "' is not a number");
  }
  return v;
}

long long parse_integer(const std::string& text, const std::string& what) {
  const std::string s = trim(text);
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError(what + ": '" + text + "' is not an integer");
  }
  return v;
}

}  // namespace adbcr
