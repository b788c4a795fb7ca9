#ifndef MEMLAYOUT_LAYOUT_LAYOUT_HPP
#define MEMLAYOUT_LAYOUT_LAYOUT_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/report.hpp"
#include "core/types.hpp"

namespace memlayout {

// A requirement with every attribute assigned.
struct ResolvedBlock {
  Owner owner;
  std::string logical_name;
  Addr virtual_address = 0;  // canonical mapping, as seen in the owner's space
  Addr physical_address = 0;
  Size size = 0;
  Permissions permissions;
  CachePolicy cache_policy = CachePolicy::Normal;
  Size alignment = 0;
  bool physically_contiguous = false;
  std::vector<Owner> shared_with;
  RegionClass region_class = RegionClass::ExternalRam;

  Addr virt_end() const { return virtual_address + size; }
  Addr phys_end() const { return physical_address + size; }
  std::string id() const { return owner.key() + "/" + logical_name; }
  bool operator==(const ResolvedBlock&) const = default;
};

// One block as mapped in one address space.  A shared block may be mapped at
// a different virtual address in a partner space; everything else is the
// canonical block.
struct PlanEntry {
  std::size_t block = 0;  // index into MemoryLayout::blocks
  Addr virtual_address = 0;
  bool operator==(const PlanEntry&) const = default;
};

struct AddressSpacePlan {
  Owner space;
  std::vector<PlanEntry> entries;
  bool operator==(const AddressSpacePlan&) const = default;
};

struct MemoryLayout {
  std::vector<ResolvedBlock> blocks;
  std::vector<AddressSpacePlan> plans;  // kernel plan first, partitions in declaration order
  SystemMemoryMap memmap;
  MmuModel mmu;

  const ResolvedBlock& block_of(const PlanEntry& e) const { return blocks[e.block]; }
  const AddressSpacePlan* find_plan(const Owner& space) const;
  std::vector<Owner> partitions() const;
  // 1-based identifier for a partition (PID / ASID / artifact owner id);
  // kernel is 0.  Follows plan order.
  unsigned space_id(const Owner& space) const;
  bool operator==(const MemoryLayout&) const = default;
};

// Assigns all missing attributes (Fig.-1 memory layout process).  Fixed
// blocks are reserved first; free blocks are placed first-fit-decreasing by
// backend-aware alignment, falling back to a bounded exhaustive search when
// the heuristic fails on small instances.  Deterministic.
// Throws InfeasibleError with a witness when no placement exists.
MemoryLayout plan_layout(const std::vector<MemoryBlockRequirement>& reqs,
                         const SystemMemoryMap& map, const MmuModel& mmu);

// Per-plan budget findings for an existing (possibly hand-edited) layout.
// zero_miss additionally requires every partition's page count, kernel
// included, to fit the TLB capacity (page-table backend).
VerificationReport feasibility_check(const MemoryLayout& layout, bool zero_miss = false);

// Entry/page demand of one plan under the layout's MMU model.
unsigned plan_budget_demand(const MemoryLayout& layout, const AddressSpacePlan& plan);

// Alignment the placement uses for a block under the given MMU model.
Size backend_alignment(const MemoryBlockRequirement& req, const SystemMemoryMap& map,
                       const MmuModel& mmu);

}  // namespace memlayout

#endif
