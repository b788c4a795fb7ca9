#ifndef MEMLAYOUT_CORE_INTERCHANGE_HPP
#define MEMLAYOUT_CORE_INTERCHANGE_HPP

#include <string>

#include <nlohmann/json.hpp>

#include "core/report.hpp"
#include "core/types.hpp"
#include "layout/layout.hpp"

namespace memlayout {

// Canonical interchange form: ordered key/value trees with addresses and
// sizes carried as hex strings, so consumers never round them through
// floating point.  Field order is stable to keep artifacts diffable.
using Json = nlohmann::ordered_json;

Json addr_json(Addr v);
Addr addr_from_json(const Json& j, const std::string& what);

Json to_json(const Permissions& p);
Json to_json(const Owner& o);
Json to_json(const PhysicalRegion& r);
Json to_json(const SystemMemoryMap& m);
Json to_json(const PageTableGeometry& g);
Json to_json(const MmuModel& m);
Json to_json(const MemoryBlockRequirement& b);
Json to_json(const ResolvedBlock& b);
Json to_json(const MemoryLayout& l);
Json to_json(const VerificationReport& r);

Permissions permissions_from_json(const Json& j);
Owner owner_from_json(const Json& j);
PhysicalRegion region_from_json(const Json& j);
SystemMemoryMap memmap_from_json(const Json& j);
PageTableGeometry geometry_from_json(const Json& j);
MmuModel mmu_from_json(const Json& j);
MemoryBlockRequirement requirement_from_json(const Json& j);
ResolvedBlock resolved_block_from_json(const Json& j);
MemoryLayout layout_from_json(const Json& j);
VerificationReport report_from_json(const Json& j);

std::string layout_to_string(const MemoryLayout& l);
MemoryLayout layout_from_string(const std::string& text);

std::string report_to_string(const VerificationReport& r);

}  // namespace memlayout

#endif
