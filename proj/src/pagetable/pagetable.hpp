#ifndef MEMLAYOUT_PAGETABLE_PAGETABLE_HPP
#define MEMLAYOUT_PAGETABLE_PAGETABLE_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "layout/layout.hpp"
#include "pagetable/leaves.hpp"

namespace memlayout {

// 64-bit descriptor layout (all other bits reserved-zero):
//   bit 0        valid
//   bit 1        table (1) / leaf (0)
//   bits 47:12   output address (next table or physical page base)
//   bits 58:53   permissions UR,UW,UX,KR,KW,KX (leaves only)
//   bits 62:60   cache policy code (leaves only)
//   bit 11       global (leaves only)
// Table descriptors carry no permission, cache or global bits.
namespace desc {
constexpr std::uint64_t kValid = 1ull << 0;
constexpr std::uint64_t kTable = 1ull << 1;
constexpr std::uint64_t kGlobal = 1ull << 11;
constexpr std::uint64_t kAddrMask = ((1ull << 48) - 1) & ~((1ull << 12) - 1);
constexpr unsigned kPermShift = 53;
constexpr unsigned kCacheShift = 60;
constexpr std::uint64_t kPermMask = 0x3Full << kPermShift;
constexpr std::uint64_t kCacheMask = 0x7ull << kCacheShift;
constexpr std::uint64_t kReserved =
    ~(kValid | kTable | kGlobal | kAddrMask | kPermMask | kCacheMask);

std::uint64_t leaf(Addr phys, const Permissions& p, CachePolicy c, bool global);
std::uint64_t table(Addr next_table_phys);
}  // namespace desc

struct PageTableImage {
  Owner space;
  Addr root_physical = 0;
  std::shared_ptr<const std::vector<std::uint8_t>> bytes;  // whole table arena
  Addr image_base = 0;  // physical address of bytes[0]
  RegionClass table_region = RegionClass::ExternalRam;
  std::size_t page_count = 0;  // leaf mappings this space contributes beyond the kernel set
  unsigned asid = 0;           // 0 for the kernel
};

struct AsidPlan {
  bool kernel_global = true;
  std::vector<std::pair<Owner, unsigned>> partition_asids;  // unique, nonzero
  bool flush_on_switch = false;
};

struct WarmupEntry {
  Addr vaddr = 0;
  bool readable = true;  // kernel-readable; unreadable pages stay listed but flagged
  bool operator==(const WarmupEntry&) const = default;
};

struct WarmupList {
  Owner space;
  std::vector<WarmupEntry> entries;
};

struct PageTableSet {
  std::vector<PageTableImage> images;  // kernel image first, partitions in plan order
  AsidPlan asid_plan;
};

// Builds one image per address space over a single physical table arena.
// Kernel tables are built once and shared; partition trees copy-on-write the
// contended path so kernel mappings stay bit-identical in every space.
// Tables land in internal RAM when it exists and has room, otherwise in the
// cheapest RAM region.
PageTableSet build_page_tables(const MemoryLayout& layout);

// One list per address space: the page bases the switch code must touch to
// preload the TLB.  Kernel pages are covered only when the model lacks a
// global bit (global entries are never flushed).
std::vector<WarmupList> generate_warmup(const MemoryLayout& layout, const PageTableSet& set);

// Checks that every partition, kernel pages included, fits the TLB so that
// post-warm-up execution never walks.
VerificationReport zero_miss_budget(const MemoryLayout& layout);

struct DecodedMapping {
  Addr virtual_base = 0;
  Size size = 0;
  Addr physical_base = 0;
  Permissions permissions;
  CachePolicy cache_policy = CachePolicy::Normal;
  bool global = false;
  bool operator==(const DecodedMapping&) const = default;
};

// Full software walk of one image; the exact mapping set reachable from its
// root.  Throws MalformedImageError on dangling pointers, reserved bits, or
// descriptors no hardware state machine would accept.
std::vector<DecodedMapping> decode_page_tables(const PageTableImage& image,
                                               const PageTableGeometry& geometry);

// How the hardware walker reads one descriptor: reserved bits are ignored,
// anything unusable translates to a fault, never an error.
struct LenientDesc {
  enum class Kind { Invalid, Table, Leaf } kind = Kind::Invalid;
  Addr addr = 0;
  Permissions perms;
  CachePolicy cache = CachePolicy::Normal;
  bool global = false;
};
LenientDesc interpret_lenient(std::uint64_t d, unsigned level, const PageTableGeometry& g);

// Mapping set under the lenient rules; subtrees behind unreadable pointers
// are simply absent.  Used to predict what the simulator will translate.
std::vector<DecodedMapping> lenient_mappings(const PageTableImage& image,
                                             const PageTableGeometry& geometry);

// MLPT artifact.
std::vector<std::uint8_t> write_mlpt(const PageTableSet& set,
                                     const std::vector<WarmupList>& warmups,
                                     const MemoryLayout& layout);

struct MlptSpace {
  unsigned owner_id = 0;
  unsigned asid = 0;
  Addr root_offset = 0;
  Addr image_base = 0;
  std::shared_ptr<const std::vector<std::uint8_t>> bytes;
  std::vector<WarmupEntry> warmup;
  std::size_t file_offset = 0;  // offset of the image blob in the artifact
};

struct MlptArtifact {
  PageTableGeometry geometry;
  bool kernel_global = true;
  bool flush_on_switch = false;
  std::vector<std::pair<unsigned, unsigned>> partition_asids;  // owner id -> asid
  std::vector<MlptSpace> spaces;
};

MlptArtifact read_mlpt(const std::vector<std::uint8_t>& bytes);

std::string mlpt_manifest(const PageTableSet& set, const std::vector<WarmupList>& warmups,
                          const MemoryLayout& layout);

}  // namespace memlayout

#endif
