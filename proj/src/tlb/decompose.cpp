#include "tlb/decompose.hpp"

#include <algorithm>

#include "core/error.hpp"

namespace memlayout {

std::vector<TlbChunk> decompose_range(Addr v, Addr p, Size size, Size min_entry_size,
                                      Size max_entry_size) {
  if (size == 0) return {};
  if (v % min_entry_size != 0 || p % min_entry_size != 0 || size % min_entry_size != 0)
    throw AlignmentError("range " + hex(v) + "->" + hex(p) + " size " + format_size(size) +
                         " is not representable at " + format_size(min_entry_size) +
                         " granularity");
  std::vector<TlbChunk> out;
  Size remaining = size;
  while (remaining > 0) {
    Size step = std::min({max_entry_size, pow2_divisor(v), pow2_divisor(p),
                          pow2_floor(remaining)});
    out.push_back(TlbChunk{v, p, log2_exact(step)});
    v += step;
    p += step;
    remaining -= step;
  }
  return out;
}

unsigned chunk_count(Addr v, Addr p, Size size, Size min_entry_size, Size max_entry_size) {
  return static_cast<unsigned>(decompose_range(v, p, size, min_entry_size, max_entry_size).size());
}

}  // namespace memlayout
