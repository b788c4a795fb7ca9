#include "core/docs.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "core/error.hpp"

namespace memlayout {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const DocEntry* DocSection::find(const std::string& key) const {
  for (const auto& e : entries)
    if (e.key == key) return &e;
  return nullptr;
}

Document parse_document(const std::string& file, const std::string& text) {
  Document doc;
  doc.file = file;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw SchemaError(file, lineno, "unterminated section header");
      std::string name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) throw SchemaError(file, lineno, "empty section name");
      doc.sections.push_back(DocSection{name, lineno, {}});
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw SchemaError(file, lineno, "expected `key = value`");
    if (doc.sections.empty())
      throw SchemaError(file, lineno, "entry outside any [section]");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw SchemaError(file, lineno, "empty key");
    auto& sec = doc.sections.back();
    if (sec.find(key))
      throw SchemaError(file, lineno, "duplicate key `" + key + "` in [" + sec.name + "]");
    sec.entries.push_back(DocEntry{key, value, lineno});
  }
  return doc;
}

std::uint64_t parse_int(const Document& doc, const DocEntry& e) {
  std::string v = e.value;
  if (v.empty()) throw SchemaError(doc.file, e.line, "`" + e.key + "`: empty integer");
  std::uint64_t mult = 1;
  char suffix = v.back();
  if (suffix == 'K' || suffix == 'k') {
    mult = kib(1);
    v.pop_back();
  } else if (suffix == 'M' || suffix == 'm') {
    mult = mib(1);
    v.pop_back();
  }
  if (v.empty()) throw SchemaError(doc.file, e.line, "`" + e.key + "`: missing digits");
  int base = 10;
  std::size_t start = 0;
  if (v.size() > 2 && v[0] == '0' && (v[1] == 'x' || v[1] == 'X')) {
    base = 16;
    start = 2;
  }
  std::uint64_t out = 0;
  for (std::size_t i = start; i < v.size(); ++i) {
    char c = static_cast<char>(::tolower(v[i]));
    int digit;
    if (c >= '0' && c <= '9') digit = c - '0';
    else if (base == 16 && c >= 'a' && c <= 'f') digit = c - 'a' + 10;
    else
      throw SchemaError(doc.file, e.line, "`" + e.key + "`: bad integer `" + e.value + "`");
    std::uint64_t next = out * base + static_cast<std::uint64_t>(digit);
    if (next / base != out)
      throw SchemaError(doc.file, e.line, "`" + e.key + "`: integer overflow");
    out = next;
  }
  if (mult != 1 && out > ~std::uint64_t{0} / mult)
    throw SchemaError(doc.file, e.line, "`" + e.key + "`: integer overflow");
  return out * mult;
}

bool parse_bool(const Document& doc, const DocEntry& e) {
  if (e.value == "true" || e.value == "yes" || e.value == "1") return true;
  if (e.value == "false" || e.value == "no" || e.value == "0") return false;
  throw SchemaError(doc.file, e.line, "`" + e.key + "`: expected true/false");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::istringstream in(value);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

const DocEntry& require_key(const Document& doc, const DocSection& s, const std::string& key) {
  const DocEntry* e = s.find(key);
  if (!e)
    throw SchemaError(doc.file, s.line, "[" + s.name + "] is missing required key `" + key + "`");
  return *e;
}

void reject_unknown_keys(const Document& doc, const DocSection& s,
                         const std::vector<std::string>& known) {
  for (const auto& e : s.entries) {
    if (std::find(known.begin(), known.end(), e.key) == known.end())
      throw SchemaError(doc.file, e.line, "unknown key `" + e.key + "` in [" + s.name + "]");
  }
}

}  // namespace memlayout
