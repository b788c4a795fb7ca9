#ifndef MEMLAYOUT_CORE_DOCS_HPP
#define MEMLAYOUT_CORE_DOCS_HPP

#include <optional>
#include <string>
#include <vector>

#include "core/types.hpp"

namespace memlayout {

// Line-oriented configuration documents: `[section]` headers followed by
// `key = value` entries.  `#` starts a comment.  Integers accept 0x hex and
// K/M size suffixes.

struct DocEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct DocSection {
  std::string name;
  int line = 0;
  std::vector<DocEntry> entries;

  const DocEntry* find(const std::string& key) const;
};

struct Document {
  std::string file;  // name used in error messages
  std::vector<DocSection> sections;
};

Document parse_document(const std::string& file, const std::string& text);

// Value parsers; throw SchemaError naming `doc.file` and the entry line.
std::uint64_t parse_int(const Document& doc, const DocEntry& e);
bool parse_bool(const Document& doc, const DocEntry& e);
std::vector<std::string> split_list(const std::string& value);

// Schema helpers.
const DocEntry& require_key(const Document& doc, const DocSection& s, const std::string& key);
void reject_unknown_keys(const Document& doc, const DocSection& s,
                         const std::vector<std::string>& known);

}  // namespace memlayout

#endif
