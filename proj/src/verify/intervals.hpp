#ifndef MEMLAYOUT_VERIFY_INTERVALS_HPP
#define MEMLAYOUT_VERIFY_INTERVALS_HPP

#include <functional>
#include <string>
#include <vector>

#include "core/types.hpp"

namespace memlayout {

// One contiguous virtual mapping with its attribution.  phys corresponds to
// v0; the mapping is linear across the interval.
struct MappingAttr {
  Addr phys = 0;
  Permissions perms;
  CachePolicy cache = CachePolicy::Normal;
  bool global = false;
  unsigned tag = 0;  // PID / ASID attribution
};

struct MappingInterval {
  Addr v0 = 0;
  Addr v1 = 0;
  MappingAttr attr;
  std::string origin;  // block id or entry id, for messages
};

struct CompareFlags {
  bool cache = true;
  bool global_flag = true;
  bool tag = true;
};

struct SegmentDiff {
  Addr v0 = 0;
  Addr v1 = 0;
  const MappingInterval* expected = nullptr;  // null = unmapped on that side
  const MappingInterval* actual = nullptr;
  std::string code;  // MISSING_MAPPING, EXTRA_MAPPING, PHYS_MISMATCH, ...
};

// Self-overlaps inside one set, resolved first-listed-wins for comparison.
std::vector<std::pair<const MappingInterval*, const MappingInterval*>> internal_overlaps(
    const std::vector<MappingInterval>& set);

// Segment-wise comparison at the finest granularity both sets induce.
// Equivalent to a page-by-page walk without enumerating pages; coalescing
// differences are not diffs.
std::vector<SegmentDiff> diff_mappings(const std::vector<MappingInterval>& expected,
                                       const std::vector<MappingInterval>& actual,
                                       const CompareFlags& flags);

bool mappings_equal(const std::vector<MappingInterval>& a,
                    const std::vector<MappingInterval>& b, const CompareFlags& flags);

}  // namespace memlayout

#endif
