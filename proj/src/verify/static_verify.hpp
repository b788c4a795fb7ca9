#ifndef MEMLAYOUT_VERIFY_STATIC_VERIFY_HPP
#define MEMLAYOUT_VERIFY_STATIC_VERIFY_HPP

#include <vector>

#include "config/mmu_config.hpp"
#include "core/report.hpp"
#include "layout/layout.hpp"
#include "verify/intervals.hpp"

namespace memlayout {

// Checks the architecture-independent half: everything the requirements fix
// must hold in the layout, spaces must be internally consistent, and owners
// must stay physically isolated unless sharing authorizes the overlap.
VerificationReport verify_layout(const MemoryLayout& layout,
                                 const std::vector<MemoryBlockRequirement>& reqs);

// Checks the architecture-dependent half: decodes the artifact through the
// backend decoders and requires exact mapping-set equality with the layout,
// permissions, cache policy and ASID/global attribution included.  The
// decode path shares no state with the generators.
VerificationReport verify_mmu_config(const MmuConfig& config, const MemoryLayout& layout);

// The mapping set one address space is supposed to have.
std::vector<MappingInterval> expected_intervals(const MemoryLayout& layout,
                                                const AddressSpacePlan& plan);

}  // namespace memlayout

#endif
