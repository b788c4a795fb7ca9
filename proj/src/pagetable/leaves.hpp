#ifndef MEMLAYOUT_PAGETABLE_LEAVES_HPP
#define MEMLAYOUT_PAGETABLE_LEAVES_HPP

#include <vector>

#include "core/types.hpp"

namespace memlayout {

struct LeafMapping {
  Addr virtual_base = 0;
  Addr physical_base = 0;
  unsigned level = 0;  // table level holding the leaf descriptor
  Size size = 0;
};

// Covers [v, v+size) with the fewest leaf descriptors the geometry permits:
// a leaf at level L is used whenever both addresses are aligned to its span
// and the remainder is large enough.  Leaf sizes form a divisibility chain,
// so the greedy choice is minimal.  Throws AlignmentError when the range is
// not page-aligned.
std::vector<LeafMapping> decompose_leaves(Addr v, Addr p, Size size,
                                          const PageTableGeometry& geometry);

std::size_t leaf_count(Addr v, Addr p, Size size, const PageTableGeometry& geometry);

}  // namespace memlayout

#endif
