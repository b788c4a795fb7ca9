#include "layout/layout.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "core/error.hpp"
#include "pagetable/leaves.hpp"
#include "tlb/decompose.hpp"

namespace memlayout {

namespace {

// Disjoint interval bookkeeping for physical reservations and virtual
// obstacle sets.
class IntervalSet {
 public:
  void add(Addr base, Addr end) {
    if (base >= end) return;
    auto it = spans_.lower_bound(base);
    if (it != spans_.begin()) {
      auto prev = std::prev(it);
      if (prev->second >= base) {
        base = prev->first;
        end = std::max(end, prev->second);
        it = prev;
      }
    }
    while (it != spans_.end() && it->first <= end) {
      end = std::max(end, it->second);
      it = spans_.erase(it);
    }
    spans_[base] = end;
  }

  bool intersects(Addr base, Addr end) const {
    if (base >= end) return false;
    auto it = spans_.upper_bound(base);
    if (it != spans_.begin()) {
      auto prev = std::prev(it);
      if (prev->second > base) return true;
    }
    return it != spans_.end() && it->first < end;
  }

  void merge(const IntervalSet& other) {
    for (const auto& [b, e] : other.spans_) add(b, e);
  }

  // Lowest a >= from, aligned, with [a, a+size) inside [from, limit) and
  // disjoint from the set.
  std::optional<Addr> find_free(Addr from, Addr limit, Size size, Size align) const {
    Addr a = align_up(from, align);
    while (a + size <= limit && a + size > a) {
      auto it = spans_.upper_bound(a);
      if (it != spans_.begin()) {
        auto prev = std::prev(it);
        if (prev->second > a) {
          a = align_up(prev->second, align);
          continue;
        }
      }
      if (it != spans_.end() && it->first < a + size) {
        a = align_up(it->second, align);
        continue;
      }
      return a;
    }
    return std::nullopt;
  }

 private:
  std::map<Addr, Addr> spans_;
};

bool overlap(Addr a, Size as, Addr b, Size bs) { return a < b + bs && b < a + as; }

bool sharing_authorizes(const MemoryBlockRequirement& holder, const Owner& other) {
  for (const auto& o : holder.shared_with)
    if (o == other) return true;
  return false;
}

struct Placement {
  Addr phys = 0;
  RegionClass region_class = RegionClass::ExternalRam;
};

struct PlacedBlock {
  const MemoryBlockRequirement* req;
  Addr phys;
};

// Regions eligible for free placement, external RAM before internal so that
// fast internal memory stays available for page tables.
std::vector<const PhysicalRegion*> placement_regions(const SystemMemoryMap& map) {
  std::vector<const PhysicalRegion*> regions;
  for (const auto& r : map.regions)
    if (r.region_class != RegionClass::Device) regions.push_back(&r);
  std::stable_sort(regions.begin(), regions.end(),
                   [](const PhysicalRegion* a, const PhysicalRegion* b) {
                     auto rank = [](RegionClass c) { return c == RegionClass::InternalRam; };
                     if (rank(a->region_class) != rank(b->region_class))
                       return !rank(a->region_class);
                     return a->base < b->base;
                   });
  return regions;
}

class Placer {
 public:
  Placer(const SystemMemoryMap& map, const MmuModel& mmu) : map_(map), mmu_(mmu) {}

  void reserve_fixed(const MemoryBlockRequirement& req) {
    Addr base = *req.physical_address;
    for (const auto& p : placed_) {
      if (!overlap(base, req.size, p.phys, p.req->size)) continue;
      if (p.req->owner == req.owner) continue;
      if (sharing_authorizes(*p.req, req.owner) || sharing_authorizes(req, p.req->owner))
        continue;
      throw InfeasibleError(block_id(req), "physical overlap",
                            "fixed range [" + hex(base) + ", " + hex(base + req.size) +
                                ") collides with " + block_id(*p.req));
    }
    RegionClass cls = classify_fixed(req, base);
    used_.add(base, base + req.size);
    placed_.push_back(PlacedBlock{&req, base});
    result_[key(req)] = Placement{base, cls};
  }

  void place_free(const MemoryBlockRequirement& req, Size align) {
    for (const auto* r : placement_regions(map_)) {
      auto a = used_.find_free(r->base, r->end(), req.size, align);
      if (a) {
        used_.add(*a, *a + req.size);
        placed_.push_back(PlacedBlock{&req, *a});
        result_[key(req)] = Placement{*a, r->region_class};
        return;
      }
    }
    throw InfeasibleError(block_id(req), "no physical room",
                          "no region can hold " + format_size(req.size) + " aligned to " +
                              format_size(align));
  }

  const Placement& placement(const MemoryBlockRequirement& req) const {
    return result_.at(key(req));
  }

 private:
  static std::string key(const MemoryBlockRequirement& req) {
    return req.owner.key() + "/" + req.logical_name;
  }
  static std::string block_id(const MemoryBlockRequirement& req) { return key(req); }

  RegionClass classify_fixed(const MemoryBlockRequirement& req, Addr base) {
    const PhysicalRegion* first = nullptr;
    for (const auto& r : map_.regions)
      if (base >= r.base && base < r.end()) first = &r;
    if (!first)
      throw InfeasibleError(block_id(req), "no physical room",
                            "fixed physical address " + hex(base) +
                                " lies outside the memory map");
    if (req.physically_contiguous || true) {
      // Single-range placement: the whole block must sit in covering regions.
      Addr cur = base;
      Addr end = base + req.size;
      bool device = first->region_class == RegionClass::Device;
      while (cur < end) {
        const PhysicalRegion* r = nullptr;
        for (const auto& cand : map_.regions)
          if (cur >= cand.base && cur < cand.end()) r = &cand;
        if (!r)
          throw InfeasibleError(block_id(req), "no physical room",
                                "fixed range leaves the memory map at " + hex(cur));
        if (req.physically_contiguous && r != first)
          throw InfeasibleError(block_id(req), "contiguity",
                                "physically contiguous block spans multiple regions");
        if ((r->region_class == RegionClass::Device) != device)
          throw InfeasibleError(block_id(req), "region class",
                                "fixed range mixes device and RAM regions");
        cur = r->end();
      }
      if (device && req.cache_policy != CachePolicy::Io)
        throw InfeasibleError(block_id(req), "region class",
                              "block in a device region must use the io cache policy");
    }
    return first->region_class;
  }

  const SystemMemoryMap& map_;
  const MmuModel& mmu_;
  IntervalSet used_;
  std::vector<PlacedBlock> placed_;
  std::map<std::string, Placement> result_;
};

Size resolved_alignment(const MemoryBlockRequirement& req, const SystemMemoryMap& map,
                        const MmuModel& mmu, Addr v, Addr p) {
  Size backend = backend_alignment(req, map, mmu);
  Size a = std::min(pow2_divisor(v), pow2_divisor(p));
  a = std::min(a, backend);
  return std::max(a, std::max(req.alignment.value_or(1), map.min_page_size));
}

Addr va_limit(const MmuModel& mmu) {
  if (mmu.is_tlb()) return Addr{1} << 32;
  unsigned bits = mmu.geometry.va_bits();
  return bits >= 64 ? ~Addr{0} : (Addr{1} << bits);
}

}  // namespace

const AddressSpacePlan* MemoryLayout::find_plan(const Owner& space) const {
  for (const auto& p : plans)
    if (p.space == space) return &p;
  return nullptr;
}

std::vector<Owner> MemoryLayout::partitions() const {
  std::vector<Owner> out;
  for (const auto& p : plans)
    if (!p.space.is_kernel()) out.push_back(p.space);
  return out;
}

unsigned MemoryLayout::space_id(const Owner& space) const {
  if (space.is_kernel()) return 0;
  unsigned id = 0;
  for (const auto& p : plans) {
    if (p.space.is_kernel()) continue;
    ++id;
    if (p.space == space) return id;
  }
  throw UnknownSpaceError(space.key());
}

Size backend_alignment(const MemoryBlockRequirement& req, const SystemMemoryMap& map,
                       const MmuModel& mmu) {
  Size base = std::max(req.alignment.value_or(1), map.min_page_size);
  if (mmu.is_tlb()) {
    Size covering = std::min(pow2_ceil(req.size), mmu.max_entry_size);
    covering = std::max(covering, mmu.min_entry_size);
    return std::max(base, covering);
  }
  return std::max(base, mmu.geometry.page_size);
}

namespace {

struct LayoutBuild {
  const std::vector<MemoryBlockRequirement>& reqs;
  const SystemMemoryMap& map;
  const MmuModel& mmu;
  std::vector<Owner> partitions;

  // Free blocks in placement order (kernel group first, then per partition).
  std::vector<const MemoryBlockRequirement*> fixed;
  std::vector<const MemoryBlockRequirement*> free_blocks;

  explicit LayoutBuild(const std::vector<MemoryBlockRequirement>& r,
                       const SystemMemoryMap& m, const MmuModel& u)
      : reqs(r), map(m), mmu(u), partitions(partitions_of(r)) {
    auto group_rank = [&](const MemoryBlockRequirement& b) -> std::size_t {
      if (b.owner.is_kernel()) return 0;
      for (std::size_t i = 0; i < partitions.size(); ++i)
        if (partitions[i] == b.owner) return i + 1;
      return partitions.size() + 1;
    };
    for (const auto& b : reqs)
      (b.physical_address ? fixed : free_blocks).push_back(&b);
    std::stable_sort(fixed.begin(), fixed.end(),
                     [&](const MemoryBlockRequirement* a, const MemoryBlockRequirement* b) {
                       return group_rank(*a) < group_rank(*b);
                     });
    std::stable_sort(
        free_blocks.begin(), free_blocks.end(),
        [&](const MemoryBlockRequirement* a, const MemoryBlockRequirement* b) {
          std::size_t ga = group_rank(*a), gb = group_rank(*b);
          if (ga != gb) return ga < gb;
          Size aa = backend_alignment(*a, map, mmu), ab = backend_alignment(*b, map, mmu);
          if (aa != ab) return aa > ab;
          if (a->size != b->size) return a->size > b->size;
          return a->logical_name < b->logical_name;
        });
  }

  // Physical placement with the given free-block order.  Throws
  // InfeasibleError when some block cannot be placed.
  Placer place(const std::vector<const MemoryBlockRequirement*>& order) const {
    Placer placer(map, mmu);
    for (const auto* b : fixed) placer.reserve_fixed(*b);
    for (const auto* b : order) placer.place_free(*b, backend_alignment(*b, map, mmu));
    return placer;
  }

  Placer place_with_fallback() const {
    try {
      return place(free_blocks);
    } catch (const InfeasibleError& primary) {
      // First-fit-decreasing can miss tight packings; desk-scale instances
      // are searched exhaustively before giving up.
      if (free_blocks.size() > 8) throw;
      std::vector<std::size_t> idx(free_blocks.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::vector<std::size_t> perm = idx;
      do {
        std::vector<const MemoryBlockRequirement*> order;
        for (std::size_t i : perm) order.push_back(free_blocks[i]);
        try {
          return place(order);
        } catch (const InfeasibleError&) {
        }
      } while (std::next_permutation(perm.begin(), perm.end()));
      throw primary;
    }
  }
};

}  // namespace

MemoryLayout plan_layout(const std::vector<MemoryBlockRequirement>& reqs,
                         const SystemMemoryMap& map, const MmuModel& mmu) {
  // Backend granularity: every block must be representable.
  Size granule = mmu.is_tlb() ? std::max(mmu.min_entry_size, map.min_page_size)
                              : std::max(mmu.geometry.page_size, map.min_page_size);
  for (const auto& b : reqs) {
    auto misaligned = [&](std::optional<Addr> a) { return a && *a % granule != 0; };
    if (b.size % granule != 0 || misaligned(b.virtual_address) ||
        misaligned(b.physical_address))
      throw InfeasibleError(b.owner.key() + "/" + b.logical_name, "granularity",
                            "block is not representable at the backend granularity of " +
                                format_size(granule));
  }

  LayoutBuild build(reqs, map, mmu);
  Placer placer = build.place_with_fallback();

  MemoryLayout layout;
  layout.memmap = map;
  layout.mmu = mmu;

  // Resolve physical attributes in requirement order.
  std::map<std::string, std::size_t> index_of;
  for (const auto& b : reqs) {
    const Placement& pl = placer.placement(b);
    ResolvedBlock rb;
    rb.owner = b.owner;
    rb.logical_name = b.logical_name;
    rb.physical_address = b.physical_address.value_or(pl.phys);
    rb.size = b.size;
    rb.permissions = b.permissions;
    rb.cache_policy = b.cache_policy;
    rb.physically_contiguous = b.physically_contiguous;
    rb.shared_with = b.shared_with;
    rb.region_class = pl.region_class;
    index_of[rb.id()] = layout.blocks.size();
    layout.blocks.push_back(std::move(rb));
  }

  // Virtual assignment.  Kernel mappings are chosen first and must avoid
  // every fixed virtual range in the project, since they appear in every
  // address space.
  Addr vlimit = va_limit(mmu);
  IntervalSet all_fixed_v;
  for (const auto& b : reqs)
    if (b.virtual_address) all_fixed_v.add(*b.virtual_address, *b.virtual_address + b.size);

  IntervalSet kernel_v;
  auto assign_virtual = [&](const MemoryBlockRequirement& req, IntervalSet& space_v,
                            const IntervalSet* extra_obstacles) -> Addr {
    ResolvedBlock& rb = layout.blocks[index_of[req.owner.key() + "/" + req.logical_name]];
    if (req.virtual_address) {
      space_v.add(*req.virtual_address, *req.virtual_address + req.size);
      return *req.virtual_address;
    }
    Size align = backend_alignment(req, map, mmu);
    Addr identity = rb.physical_address;
    IntervalSet obstacles = space_v;
    if (extra_obstacles) obstacles.merge(*extra_obstacles);
    Addr v;
    if (identity % align == 0 && identity + req.size <= vlimit &&
        !obstacles.intersects(identity, identity + req.size)) {
      v = identity;
    } else {
      // Lowest non-colliding aligned address; the null page is skipped.
      auto found = obstacles.find_free(map.min_page_size, vlimit, req.size, align);
      if (!found)
        throw InfeasibleError(rb.id(), "virtual space",
                              "no virtual room for " + format_size(req.size));
      v = *found;
    }
    space_v.add(v, v + req.size);
    return v;
  };

  // Kernel pass: fixed virtual ranges land in kernel_v via assign_virtual;
  // free kernel blocks must additionally dodge partition fixed ranges.
  for (const auto& b : reqs) {
    if (!b.owner.is_kernel()) continue;
    Addr v = assign_virtual(b, kernel_v, &all_fixed_v);
    layout.blocks[index_of[b.owner.key() + "/" + b.logical_name]].virtual_address = v;
  }
  // Partition passes; each space starts out obstructed by its own fixed
  // virtual ranges so that free blocks dodge them regardless of order.
  std::map<std::string, IntervalSet> space_v;
  for (const auto& part : build.partitions) {
    IntervalSet& sv = space_v[part.key()];
    for (const auto& b : reqs)
      if (b.owner == part && b.virtual_address)
        sv.add(*b.virtual_address, *b.virtual_address + b.size);
    for (const auto& b : reqs) {
      if (!(b.owner == part)) continue;
      Addr v = assign_virtual(b, sv, &kernel_v);
      layout.blocks[index_of[b.owner.key() + "/" + b.logical_name]].virtual_address = v;
    }
  }

  // Resolved alignments.
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    ResolvedBlock& rb = layout.blocks[i];
    rb.alignment =
        resolved_alignment(reqs[i], map, mmu, rb.virtual_address, rb.physical_address);
  }

  // Plans: kernel first, then partitions; each partition sees all kernel
  // blocks.  Shared blocks are inserted afterwards, remapped when their
  // canonical virtual range is taken in the partner space.
  layout.plans.push_back(AddressSpacePlan{Owner::kernel(), {}});
  for (const auto& part : build.partitions)
    layout.plans.push_back(AddressSpacePlan{part, {}});
  auto plan_of = [&](const Owner& o) -> AddressSpacePlan& {
    for (auto& p : layout.plans)
      if (p.space == o) return p;
    throw UnknownSpaceError(o.key());
  };
  std::map<std::string, IntervalSet> occupied;
  occupied["kernel"] = {};
  for (std::size_t i = 0; i < layout.blocks.size(); ++i) {
    const ResolvedBlock& rb = layout.blocks[i];
    if (rb.owner.is_kernel()) {
      for (auto& p : layout.plans) {
        p.entries.push_back(PlanEntry{i, rb.virtual_address});
        occupied[p.space.key()].add(rb.virtual_address, rb.virt_end());
      }
    } else {
      plan_of(rb.owner).entries.push_back(PlanEntry{i, rb.virtual_address});
      occupied[rb.owner.key()].add(rb.virtual_address, rb.virt_end());
    }
  }
  for (std::size_t i = 0; i < layout.blocks.size(); ++i) {
    const ResolvedBlock& rb = layout.blocks[i];
    if (rb.owner.is_kernel()) continue;  // kernel blocks are already everywhere
    for (const auto& target : rb.shared_with) {
      AddressSpacePlan& plan = plan_of(target);
      IntervalSet& occ = occupied[target.key()];
      Addr v = rb.virtual_address;
      if (occ.intersects(v, v + rb.size)) {
        auto cand = occ.find_free(map.min_page_size, vlimit, rb.size, rb.alignment);
        if (!cand)
          throw InfeasibleError(rb.id(), "virtual space",
                                "no virtual room in space " + target.key() +
                                    " for shared block");
        v = *cand;
      }
      plan.entries.push_back(PlanEntry{i, v});
      occ.add(v, v + rb.size);
    }
  }
  for (auto& p : layout.plans)
    std::sort(p.entries.begin(), p.entries.end(), [](const PlanEntry& a, const PlanEntry& b) {
      return a.virtual_address < b.virtual_address;
    });

  // Hard budget for the TLB backend: every plan must fit the entry count.
  if (mmu.is_tlb()) {
    for (const auto& p : layout.plans) {
      unsigned total = 0;
      for (const auto& e : p.entries) {
        const ResolvedBlock& rb = layout.block_of(e);
        unsigned n;
        try {
          n = chunk_count(e.virtual_address, rb.physical_address, rb.size, mmu.min_entry_size,
                          mmu.max_entry_size);
        } catch (const AlignmentError& err) {
          throw InfeasibleError(rb.id(), "entry alignment", err.what());
        }
        total += n;
        if (total > mmu.entry_count)
          throw InfeasibleError(rb.id(), "entry budget exceeded",
                                "space " + p.space.key() + " needs more than " +
                                    std::to_string(mmu.entry_count) + " TLB entries");
      }
    }
  }
  return layout;
}

unsigned plan_budget_demand(const MemoryLayout& layout, const AddressSpacePlan& plan) {
  unsigned total = 0;
  for (const auto& e : plan.entries) {
    const ResolvedBlock& rb = layout.block_of(e);
    if (layout.mmu.is_tlb())
      total += chunk_count(e.virtual_address, rb.physical_address, rb.size,
                           layout.mmu.min_entry_size, layout.mmu.max_entry_size);
    else
      total += static_cast<unsigned>(
          leaf_count(e.virtual_address, rb.physical_address, rb.size, layout.mmu.geometry));
  }
  return total;
}

VerificationReport feasibility_check(const MemoryLayout& layout, bool zero_miss) {
  VerificationReport report;
  for (const auto& p : layout.plans) {
    unsigned demand;
    try {
      demand = plan_budget_demand(layout, p);
    } catch (const AlignmentError& e) {
      report.add(Severity::Error, "ENTRY_ALIGNMENT", p.space.key(), "", e.what());
      continue;
    }
    if (layout.mmu.is_tlb()) {
      if (demand > layout.mmu.entry_count)
        report.add(Severity::Error, "ENTRY_BUDGET_EXCEEDED", p.space.key(), "",
                   std::to_string(demand) + " TLB entries needed, " +
                       std::to_string(layout.mmu.entry_count) + " available");
    } else if (zero_miss) {
      if (demand > layout.mmu.tlb_capacity)
        report.add(Severity::Error, "ZERO_MISS_UNACHIEVABLE", p.space.key(), "",
                   std::to_string(demand) + " pages mapped, TLB holds " +
                       std::to_string(layout.mmu.tlb_capacity));
    }
  }
  if (!layout.mmu.is_tlb()) {
    for (const auto& b : layout.blocks) {
      if (!b.permissions.kernel_read)
        report.add(Severity::Warn, "WARMUP_UNREACHABLE", b.owner.key(), b.logical_name,
                   "pages are not kernel-readable; warm-up reads cannot touch them");
    }
  }
  report.sort();
  return report;
}

}  // namespace memlayout
