#pragma once

#include <string>
#include <vector>

namespace gmce {

/// One `key = value` entry of a sectioned text file. Entries keep file
/// order, which is significant for schema column declarations.
struct KvEntry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

/// Parse `[section]` / `key = value` text. `#` and `;` start comments,
/// blank lines are ignored, values are whitespace-trimmed. Duplicate keys
/// are allowed (consumers decide); malformed lines raise ConfigError.
std::vector<KvEntry> parse_kv_text(const std::string& text);
std::vector<KvEntry> parse_kv_file(const std::string& path);

double kv_to_double(const KvEntry& e);
long kv_to_long(const KvEntry& e);
bool kv_to_bool(const KvEntry& e);

}  // namespace gmce
