#ifndef MEMLAYOUT_CORE_PROJECT_HPP
#define MEMLAYOUT_CORE_PROJECT_HPP

#include <string>
#include <vector>

#include "core/report.hpp"
#include "core/types.hpp"

namespace memlayout {

// Parses the three project documents.  Throws SchemaError for structural
// problems and SemanticError when type invariants are violated; both carry
// file/line.  On success every returned value satisfies its invariants.
Project parse_project(const std::string& requirements_text, const std::string& memmap_text,
                      const std::string& mmu_text,
                      const std::string& requirements_file = "requirements",
                      const std::string& memmap_file = "memmap",
                      const std::string& mmu_file = "mmu");

Project parse_project_files(const std::string& requirements_path, const std::string& memmap_path,
                            const std::string& mmu_path);

struct ValidateOptions {
  bool strict_wx = true;  // flag write+exec on one block
};

// Fig.-2 step 1: reports one finding per malformed condition.  Never throws;
// findings are data.  An empty report means the requirement set is well formed.
VerificationReport validate_requirements(const std::vector<MemoryBlockRequirement>& reqs,
                                         const SystemMemoryMap& map, const MmuModel& mmu,
                                         const ValidateOptions& opts = {});

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace memlayout

#endif
