#include "verify/intervals.hpp"

#include <algorithm>
#include <set>

namespace memlayout {

namespace {

// Covering interval for a point, first-listed-wins on overlap.
const MappingInterval* covering(const std::vector<MappingInterval>& set, Addr point) {
  const MappingInterval* best = nullptr;
  for (const auto& m : set) {
    if (m.v0 <= point && point < m.v1) {
      best = &m;
      break;  // listed order resolves overlaps
    }
  }
  return best;
}

}  // namespace

std::vector<std::pair<const MappingInterval*, const MappingInterval*>> internal_overlaps(
    const std::vector<MappingInterval>& set) {
  std::vector<std::pair<const MappingInterval*, const MappingInterval*>> out;
  for (std::size_t i = 0; i < set.size(); ++i)
    for (std::size_t j = i + 1; j < set.size(); ++j)
      if (set[i].v0 < set[j].v1 && set[j].v0 < set[i].v1) out.push_back({&set[i], &set[j]});
  return out;
}

std::vector<SegmentDiff> diff_mappings(const std::vector<MappingInterval>& expected,
                                       const std::vector<MappingInterval>& actual,
                                       const CompareFlags& flags) {
  std::set<Addr> bounds;
  for (const auto& m : expected) {
    bounds.insert(m.v0);
    bounds.insert(m.v1);
  }
  for (const auto& m : actual) {
    bounds.insert(m.v0);
    bounds.insert(m.v1);
  }
  std::vector<SegmentDiff> out;
  if (bounds.size() < 2) return out;
  auto it = bounds.begin();
  Addr prev = *it++;
  for (; it != bounds.end(); prev = *it++) {
    Addr lo = prev, hi = *it;
    const MappingInterval* e = covering(expected, lo);
    const MappingInterval* a = covering(actual, lo);
    if (!e && !a) continue;
    std::string code;
    if (e && !a) {
      code = "MISSING_MAPPING";
    } else if (!e && a) {
      code = "EXTRA_MAPPING";
    } else {
      Addr ep = e->attr.phys + (lo - e->v0);
      Addr ap = a->attr.phys + (lo - a->v0);
      if (ep != ap) code = "PHYS_MISMATCH";
      else if (!(e->attr.perms == a->attr.perms)) code = "PERM_MISMATCH";
      else if (flags.cache && e->attr.cache != a->attr.cache) code = "CACHE_MISMATCH";
      else if (flags.global_flag && e->attr.global != a->attr.global) code = "GLOBAL_MISMATCH";
      else if (flags.tag && e->attr.tag != a->attr.tag) code = "ASID_MISMATCH";
    }
    if (!code.empty()) out.push_back(SegmentDiff{lo, hi, e, a, code});
  }
  return out;
}

bool mappings_equal(const std::vector<MappingInterval>& a,
                    const std::vector<MappingInterval>& b, const CompareFlags& flags) {
  return diff_mappings(a, b, flags).empty();
}

}  // namespace memlayout
