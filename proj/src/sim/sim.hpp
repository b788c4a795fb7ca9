#ifndef MEMLAYOUT_SIM_SIM_HPP
#define MEMLAYOUT_SIM_SIM_HPP

#include <optional>
#include <string>
#include <vector>

#include "config/mmu_config.hpp"
#include "core/interchange.hpp"
#include "layout/layout.hpp"

namespace memlayout {

enum class SimMode { Static, NaiveRefill };
enum class AccessOp { Read, Write, Execute };
enum class Privilege { User, Kernel };
enum class FaultKind { NoMapping, PermissionViolation, PrivilegeViolation };

std::string to_string(AccessOp op);
std::string to_string(FaultKind k);

// Abstract cost units; values are configuration, not claims about hardware.
struct CostModel {
  std::uint64_t tlb_hit_cost = 1;
  std::uint64_t tlb_write_cost = 3;
  std::uint64_t walk_cost_external = 10;
  std::uint64_t walk_cost_internal = 2;
  std::uint64_t walk_cost_device = 20;
  std::uint64_t interrupt_overhead = 100;

  std::uint64_t walk_cost(RegionClass c) const {
    switch (c) {
      case RegionClass::ExternalRam: return walk_cost_external;
      case RegionClass::InternalRam: return walk_cost_internal;
      case RegionClass::Device: return walk_cost_device;
    }
    return walk_cost_external;
  }
  static CostModel from_json_text(const std::string& text);  // throws FormatError
  Json to_json() const;
};

struct CostBreakdown {
  std::uint64_t tlb_lookups = 0;
  std::uint64_t tlb_writes = 0;
  std::uint64_t walk_memory_accesses = 0;
  std::uint64_t interrupts = 0;
  std::uint64_t total = 0;  // weighted sum under the active cost model

  CostBreakdown& operator+=(const CostBreakdown& o) {
    tlb_lookups += o.tlb_lookups;
    tlb_writes += o.tlb_writes;
    walk_memory_accesses += o.walk_memory_accesses;
    interrupts += o.interrupts;
    total += o.total;
    return *this;
  }
  bool operator==(const CostBreakdown&) const = default;
};

struct AccessOutcome {
  bool translated = false;
  Addr paddr = 0;
  FaultKind fault = FaultKind::NoMapping;
  CostBreakdown cost;
};

struct AccessRequest {
  Owner space;
  AccessOp op = AccessOp::Read;
  Privilege privilege = Privilege::Kernel;
  Addr vaddr = 0;
  unsigned size = 4;  // 1, 2, 4 or 8
};

// Deterministic translation engine over a loaded MMU configuration: a
// fixed-capacity unified TLB with true-LRU replacement, a hardware-style
// page walker, ASIDs and address-space switching.
class SimulatedMmu {
 public:
  // Re-checks artifact structure; throws FormatError / DecodeError when the
  // artifact cannot be loaded at all.
  SimulatedMmu(const MmuConfig& config, const MemoryLayout& layout, CostModel cost = {},
               SimMode mode = SimMode::Static);

  CostBreakdown switch_space(const Owner& target);  // throws UnknownSpaceError
  AccessOutcome access(AccessOp op, Privilege priv, Addr vaddr, unsigned size);

  // Full invalidation, globals included (the tlbiall-style maintenance op
  // verification agents issue so stale entries cannot mask config faults).
  void invalidate_all() { tlb_.clear(); }

  bool has_current_space() const { return current_.has_value(); }
  const Owner& current_space() const;
  SimMode mode() const { return mode_; }
  const CostBreakdown& totals() const { return totals_; }
  std::vector<Owner> spaces() const;
  unsigned tlb_occupancy() const { return static_cast<unsigned>(tlb_.size()); }

 private:
  struct Slot {
    Addr vbase = 0;
    Size span = 0;
    Addr pbase = 0;
    Permissions perms;
    bool global = false;
    unsigned tag = 0;
    std::uint64_t stamp = 0;  // LRU clock
  };
  struct TlbSpace {
    Owner space;
    unsigned id = 0;
    std::vector<TlbEntry> entries;
  };
  struct PtSpace {
    Owner space;
    unsigned id = 0;
    unsigned asid = 0;
    PageTableImage image;
    std::vector<WarmupEntry> warmup;
  };

  const Slot* lookup(Addr vaddr, CostBreakdown& cost);
  void insert(const Slot& s, CostBreakdown& cost);
  void flush_non_global();
  std::optional<Slot> walk(const PtSpace& space, Addr vaddr, CostBreakdown& cost);
  AccessOutcome check(const Slot& s, AccessOp op, Privilege priv, Addr vaddr,
                      CostBreakdown cost) const;

  MmuModel model_;
  SimMode mode_;
  CostModel cost_model_;
  unsigned capacity_ = 0;
  RegionClass table_region_ = RegionClass::ExternalRam;
  bool flush_on_switch_ = true;
  std::vector<TlbSpace> tlb_spaces_;
  std::vector<PtSpace> pt_spaces_;
  std::vector<Slot> tlb_;  // insertion order; stamps carry recency
  std::uint64_t clock_ = 0;
  std::optional<Owner> current_;
  unsigned current_tag_ = 0;
  CostBreakdown totals_;
};

}  // namespace memlayout

#endif
