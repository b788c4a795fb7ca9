#ifndef MEMLAYOUT_CORE_TYPES_HPP
#define MEMLAYOUT_CORE_TYPES_HPP

#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace memlayout {

using Addr = std::uint64_t;
using Size = std::uint64_t;

constexpr Size kib(Size n) { return n << 10; }
constexpr Size mib(Size n) { return n << 20; }

constexpr bool is_pow2(Size v) { return v != 0 && (v & (v - 1)) == 0; }
constexpr Size align_up(Size v, Size a) { return (v + a - 1) & ~(a - 1); }
constexpr Size align_down(Size v, Size a) { return v & ~(a - 1); }
constexpr unsigned log2_exact(Size v) { return static_cast<unsigned>(std::bit_width(v) - 1); }

// Largest power of two that divides v; for v == 0 every power of two does.
constexpr Size pow2_divisor(Addr v) { return v == 0 ? ~Size{0} : (v & (~v + 1)); }
constexpr Size pow2_floor(Size v) { return v == 0 ? 0 : Size{1} << log2_exact(v); }
constexpr Size pow2_ceil(Size v) { return is_pow2(v) ? v : Size{1} << std::bit_width(v); }

std::string hex(Addr v);
std::string format_size(Size v);

struct Permissions {
  bool user_read = false;
  bool user_write = false;
  bool user_exec = false;
  bool kernel_read = false;
  bool kernel_write = false;
  bool kernel_exec = false;

  bool any() const {
    return user_read || user_write || user_exec || kernel_read || kernel_write || kernel_exec;
  }
  // User-accessible memory must be kernel-visible.
  bool user_implies_kernel() const {
    return (!user_read || kernel_read) && (!user_write || kernel_write) &&
           (!user_exec || kernel_exec);
  }
  unsigned bits() const {
    return (user_read ? 1u : 0u) | (user_write ? 2u : 0u) | (user_exec ? 4u : 0u) |
           (kernel_read ? 8u : 0u) | (kernel_write ? 16u : 0u) | (kernel_exec ? 32u : 0u);
  }
  static Permissions from_bits(unsigned b) {
    return Permissions{(b & 1) != 0, (b & 2) != 0, (b & 4) != 0,
                       (b & 8) != 0, (b & 16) != 0, (b & 32) != 0};
  }
  bool operator==(const Permissions&) const = default;
};

std::string to_string(const Permissions& p);
std::optional<Permissions> permissions_from_string(const std::string& s);

enum class CachePolicy { Normal, NormalCoherent, Io, WriteThrough, Uncached };

std::string to_string(CachePolicy c);
std::optional<CachePolicy> cache_policy_from_string(const std::string& s);

struct Owner {
  enum class Kind { Kernel, Partition };
  Kind kind = Kind::Kernel;
  std::string partition_name;  // nonempty iff kind == Partition

  static Owner kernel() { return Owner{}; }
  static Owner partition(std::string name) {
    return Owner{Kind::Partition, std::move(name)};
  }
  bool is_kernel() const { return kind == Kind::Kernel; }
  // Stable key used in documents, reports and wire formats.
  std::string key() const { return is_kernel() ? "kernel" : partition_name; }
  bool operator==(const Owner&) const = default;
  auto operator<=>(const Owner&) const = default;
};

std::string to_string(const Owner& o);
std::optional<Owner> owner_from_string(const std::string& s);

struct MemoryBlockRequirement {
  Owner owner;
  std::string logical_name;
  std::optional<Addr> virtual_address;
  std::optional<Addr> physical_address;
  Size size = 0;
  Permissions permissions;
  CachePolicy cache_policy = CachePolicy::Normal;
  std::optional<Size> alignment;
  bool physically_contiguous = false;
  std::vector<Owner> shared_with;
  int source_line = 0;  // doc line of the [block] section, 0 when built in memory

  bool operator==(const MemoryBlockRequirement& o) const {
    return owner == o.owner && logical_name == o.logical_name &&
           virtual_address == o.virtual_address && physical_address == o.physical_address &&
           size == o.size && permissions == o.permissions && cache_policy == o.cache_policy &&
           alignment == o.alignment && physically_contiguous == o.physically_contiguous &&
           shared_with == o.shared_with;
  }
};

enum class RegionClass { ExternalRam, InternalRam, Device };

std::string to_string(RegionClass c);
std::optional<RegionClass> region_class_from_string(const std::string& s);

struct PhysicalRegion {
  std::string name;  // optional label for diagnostics
  Addr base = 0;
  Size size = 0;
  RegionClass region_class = RegionClass::ExternalRam;
  std::uint32_t access_cost = 1;  // abstract cost units per access

  Addr end() const { return base + size; }
  bool contains(Addr a, Size s) const { return a >= base && s <= size && a - base <= size - s; }
  bool operator==(const PhysicalRegion&) const = default;
};

struct SystemMemoryMap {
  std::vector<PhysicalRegion> regions;
  Size min_page_size = kib(4);

  const PhysicalRegion* find(Addr a, Size s) const {
    for (const auto& r : regions)
      if (r.contains(a, s)) return &r;
    return nullptr;
  }
  bool operator==(const SystemMemoryMap&) const = default;
};

struct PageTableGeometry {
  Size page_size = kib(4);
  unsigned levels = 4;                        // root is level 1, leaves at level `levels`
  std::vector<unsigned> index_bits;           // one entry per level, root first
  std::vector<unsigned> large_page_levels;    // levels < `levels` that may hold leaf descriptors

  unsigned va_bits() const {
    unsigned b = log2_exact(page_size);
    for (unsigned ib : index_bits) b += ib;
    return b;
  }
  // Bit position of the index for `level` (1-based) within a virtual address.
  unsigned shift_for(unsigned level) const {
    unsigned s = log2_exact(page_size);
    for (unsigned l = levels; l > level; --l) s += index_bits[l - 1];
    return s;
  }
  Size leaf_size(unsigned level) const { return Size{1} << shift_for(level); }
  Size table_bytes(unsigned level) const { return (Size{1} << index_bits[level - 1]) * 8; }
  bool leaf_allowed(unsigned level) const {
    if (level == levels) return true;
    for (unsigned l : large_page_levels)
      if (l == level) return true;
    return false;
  }
  bool operator==(const PageTableGeometry&) const = default;
};

struct SetAssociativity {
  unsigned ways = 0;
  unsigned sets = 0;
  std::string index_hook_id;  // named entry-selection hook, resolved by the consumer
  bool operator==(const SetAssociativity&) const = default;
};

struct MmuModel {
  enum class Kind { TlbFixed, PageTable };
  Kind kind = Kind::TlbFixed;

  // TlbFixed
  unsigned entry_count = 0;
  Size min_entry_size = kib(4);
  Size max_entry_size = mib(256);
  std::optional<SetAssociativity> set_associative;  // empty = fully associative
  unsigned pid_bits = 14;

  // PageTable
  PageTableGeometry geometry;
  unsigned tlb_capacity = 0;
  unsigned asid_bits = 16;
  bool has_global_bit = true;

  bool is_tlb() const { return kind == Kind::TlbFixed; }
  bool operator==(const MmuModel&) const = default;
};

struct Project {
  std::vector<MemoryBlockRequirement> blocks;
  SystemMemoryMap memmap;
  MmuModel mmu;
};

// All partitions named by a requirement set, in order of first appearance.
std::vector<Owner> partitions_of(const std::vector<MemoryBlockRequirement>& blocks);

}  // namespace memlayout

#endif
