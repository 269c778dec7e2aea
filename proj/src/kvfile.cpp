#include "gmce/kvfile.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gmce/errors.hpp"

namespace gmce {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

std::vector<KvEntry> parse_kv_text(const std::string& text) {
  std::vector<KvEntry> entries;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    KvEntry e;
    e.section = section;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    e.line = lineno;
    if (e.key.empty()) {
      throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<KvEntry> parse_kv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_kv_text(buf.str());
}

double kv_to_double(const KvEntry& e) {
  const char* s = e.value.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0') {
    throw ConfigError("key '" + e.key + "': expected a number, got '" + e.value + "'");
  }
  return v;
}

long kv_to_long(const KvEntry& e) {
  const char* s = e.value.c_str();
  char* end = nullptr;
  const long v = std::strtol(s, &end, 10);
  if (end == s || *end != '\0') {
    throw ConfigError("key '" + e.key + "': expected an integer, got '" + e.value + "'");
  }
  return v;
}

bool kv_to_bool(const KvEntry& e) {
  if (e.value == "on" || e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "off" || e.value == "false" || e.value == "0" || e.value == "no") return false;
  throw ConfigError("key '" + e.key + "': expected on/off, got '" + e.value + "'");
}

}  // namespace gmce
