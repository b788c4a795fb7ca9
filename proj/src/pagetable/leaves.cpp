#include "pagetable/leaves.hpp"

#include <algorithm>

#include "core/error.hpp"

namespace memlayout {

std::vector<LeafMapping> decompose_leaves(Addr v, Addr p, Size size,
                                          const PageTableGeometry& geometry) {
  if (size == 0) return {};
  Size page = geometry.page_size;
  if (v % page != 0 || p % page != 0 || size % page != 0)
    throw AlignmentError("range " + hex(v) + "->" + hex(p) + " size " + format_size(size) +
                         " is not aligned to the " + format_size(page) + " page size");
  // Candidate leaf levels, largest span first.
  std::vector<unsigned> levels;
  for (unsigned l = 1; l <= geometry.levels; ++l)
    if (geometry.leaf_allowed(l)) levels.push_back(l);

  std::vector<LeafMapping> out;
  Size remaining = size;
  while (remaining > 0) {
    for (unsigned l : levels) {
      Size span = geometry.leaf_size(l);
      if (span <= remaining && v % span == 0 && p % span == 0) {
        out.push_back(LeafMapping{v, p, l, span});
        v += span;
        p += span;
        remaining -= span;
        break;
      }
    }
  }
  return out;
}

std::size_t leaf_count(Addr v, Addr p, Size size, const PageTableGeometry& geometry) {
  return decompose_leaves(v, p, size, geometry).size();
}

}  // namespace memlayout
