#ifndef MEMLAYOUT_CORE_REPORT_HPP
#define MEMLAYOUT_CORE_REPORT_HPP

#include <string>
#include <vector>

#include "core/types.hpp"

namespace memlayout {

enum class Severity { Info, Warn, Error };

std::string to_string(Severity s);

struct Finding {
  Severity severity = Severity::Error;
  std::string code;     // stable machine-readable identifier, e.g. "VIRTUAL_OVERLAP"
  std::string owner;    // owner key ("kernel", partition name) or "-"
  std::string subject;  // block name, entry id, page address, ...
  std::string message;

  bool operator==(const Finding&) const = default;
};

class VerificationReport {
 public:
  void add(Severity sev, std::string code, std::string owner, std::string subject,
           std::string message);
  void merge(const VerificationReport& other);
  // Canonical order: severity (errors first), then code, owner, subject, message.
  void sort();

  bool passed() const;  // true iff no ERROR findings
  const std::vector<Finding>& findings() const { return findings_; }
  std::size_t error_count() const;
  bool has(const std::string& code) const;

  std::string render_text() const;

 private:
  std::vector<Finding> findings_;
};

}  // namespace memlayout

#endif
