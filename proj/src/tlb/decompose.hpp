#ifndef MEMLAYOUT_TLB_DECOMPOSE_HPP
#define MEMLAYOUT_TLB_DECOMPOSE_HPP

#include <vector>

#include "core/types.hpp"

namespace memlayout {

struct TlbChunk {
  Addr virtual_base = 0;
  Addr physical_base = 0;
  unsigned log2_size = 0;
};

// Greedy largest-aligned-first cover of [v, v+size) with power-of-two chunks
// whose virtual and physical bases are aligned by their size.  Minimal for
// the given bases.  Throws AlignmentError when v, p or size is not a
// multiple of min_entry_size; chunks never exceed max_entry_size.
std::vector<TlbChunk> decompose_range(Addr v, Addr p, Size size, Size min_entry_size,
                                      Size max_entry_size);

unsigned chunk_count(Addr v, Addr p, Size size, Size min_entry_size, Size max_entry_size);

}  // namespace memlayout

#endif
