#include "core/report.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

namespace memlayout {

std::string to_string(Severity s) {
  switch (s) {
    case Severity::Info: return "INFO";
    case Severity::Warn: return "WARN";
    case Severity::Error: return "ERROR";
  }
  return "?";
}

void VerificationReport::add(Severity sev, std::string code, std::string owner,
                             std::string subject, std::string message) {
  findings_.push_back(Finding{sev, std::move(code), std::move(owner), std::move(subject),
                              std::move(message)});
}

void VerificationReport::merge(const VerificationReport& other) {
  findings_.insert(findings_.end(), other.findings_.begin(), other.findings_.end());
}

void VerificationReport::sort() {
  auto rank = [](Severity s) { return s == Severity::Error ? 0 : s == Severity::Warn ? 1 : 2; };
  std::stable_sort(findings_.begin(), findings_.end(), [&](const Finding& a, const Finding& b) {
    return std::tuple(rank(a.severity), a.code, a.owner, a.subject, a.message) <
           std::tuple(rank(b.severity), b.code, b.owner, b.subject, b.message);
  });
}

bool VerificationReport::passed() const { return error_count() == 0; }

std::size_t VerificationReport::error_count() const {
  std::size_t n = 0;
  for (const auto& f : findings_)
    if (f.severity == Severity::Error) ++n;
  return n;
}

bool VerificationReport::has(const std::string& code) const {
  for (const auto& f : findings_)
    if (f.code == code) return true;
  return false;
}

std::string VerificationReport::render_text() const {
  std::ostringstream os;
  std::size_t warns = 0, infos = 0;
  for (const auto& f : findings_) {
    if (f.severity == Severity::Warn) ++warns;
    if (f.severity == Severity::Info) ++infos;
    os << "[" << to_string(f.severity) << "] " << f.code << " " << f.owner;
    if (!f.subject.empty()) os << "/" << f.subject;
    os << ": " << f.message << "\n";
  }
  os << (passed() ? "PASSED" : "FAILED") << " (" << error_count() << " errors, " << warns
     << " warnings, " << infos << " notes)\n";
  return os.str();
}

}  // namespace memlayout
