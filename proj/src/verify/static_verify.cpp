#include "verify/static_verify.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "core/error.hpp"
#include "pagetable/leaves.hpp"

namespace memlayout {

namespace {

constexpr std::size_t kMismatchCap = 100;

bool overlap(Addr a, Size as, Addr b, Size bs) { return a < b + bs && b < a + as; }

bool authorizes(const ResolvedBlock& holder, const Owner& other) {
  for (const auto& o : holder.shared_with)
    if (o == other) return true;
  return false;
}

bool covered_by_map(const SystemMemoryMap& map, Addr base, Size size) {
  auto regions = map.regions;
  std::sort(regions.begin(), regions.end(),
            [](const PhysicalRegion& a, const PhysicalRegion& b) { return a.base < b.base; });
  Addr cur = base;
  Addr end = base + size;
  for (const auto& r : regions) {
    if (cur >= end) break;
    if (r.base > cur) return false;
    if (r.end() > cur) cur = r.end();
  }
  return cur >= end;
}

void emit_segment_findings(const std::vector<SegmentDiff>& diffs, const std::string& space,
                           VerificationReport& report) {
  std::size_t emitted = 0;
  for (const auto& d : diffs) {
    if (emitted == kMismatchCap) {
      report.add(Severity::Error, "MISMATCH_OVERFLOW", space, "",
                 std::to_string(diffs.size() - kMismatchCap) + " further mismatches omitted");
      break;
    }
    std::string subject = hex(d.v0) + "-" + hex(d.v1);
    std::string msg;
    if (d.code == "MISSING_MAPPING") {
      msg = "layout maps " + d.expected->origin + " here but the configuration does not";
    } else if (d.code == "EXTRA_MAPPING") {
      msg = "configuration maps " + d.actual->origin + " here but the layout does not";
    } else {
      msg = d.code + " between layout (" + d.expected->origin + ") and configuration (" +
            d.actual->origin + ")";
    }
    report.add(Severity::Error, d.code, space, subject, msg);
    ++emitted;
  }
}

struct PlanView {
  const AddressSpacePlan* plan;
  std::vector<MappingInterval> intervals;
};

}  // namespace

std::vector<MappingInterval> expected_intervals(const MemoryLayout& layout,
                                                const AddressSpacePlan& plan) {
  std::vector<MappingInterval> out;
  unsigned space_tag = plan.space.is_kernel() ? 0 : layout.space_id(plan.space);
  for (const auto& e : plan.entries) {
    const ResolvedBlock& rb = layout.block_of(e);
    MappingInterval m;
    m.v0 = e.virtual_address;
    m.v1 = e.virtual_address + rb.size;
    m.attr.phys = rb.physical_address;
    m.attr.perms = rb.permissions;
    m.attr.cache = rb.cache_policy;
    m.attr.global = rb.owner.is_kernel() &&
                    (layout.mmu.is_tlb() || layout.mmu.has_global_bit);
    m.attr.tag = rb.owner.is_kernel() ? 0 : space_tag;
    m.origin = rb.id();
    out.push_back(std::move(m));
  }
  std::sort(out.begin(), out.end(),
            [](const MappingInterval& a, const MappingInterval& b) { return a.v0 < b.v0; });
  return out;
}

VerificationReport verify_layout(const MemoryLayout& layout,
                                 const std::vector<MemoryBlockRequirement>& reqs) {
  VerificationReport report;

  // 1. Every requirement resolved, with fixed attributes preserved.
  for (const auto& req : reqs) {
    const ResolvedBlock* rb = nullptr;
    for (const auto& b : layout.blocks)
      if (b.owner == req.owner && b.logical_name == req.logical_name) rb = &b;
    const std::string owner = req.owner.key();
    if (!rb) {
      report.add(Severity::Error, "MISSING_BLOCK", owner, req.logical_name,
                 "requirement has no resolved block in the layout");
      continue;
    }
    auto violated = [&](const std::string& what, const std::string& detail) {
      report.add(Severity::Error, "FIXED_ATTR_VIOLATED", owner, req.logical_name,
                 what + " " + detail);
    };
    if (req.virtual_address && rb->virtual_address != *req.virtual_address)
      violated("virtual_address", "requested " + hex(*req.virtual_address) + ", resolved " +
                                      hex(rb->virtual_address));
    if (req.physical_address && rb->physical_address != *req.physical_address)
      violated("physical_address", "requested " + hex(*req.physical_address) + ", resolved " +
                                       hex(rb->physical_address));
    if (rb->size != req.size)
      violated("size", "requested " + format_size(req.size) + ", resolved " +
                           format_size(rb->size));
    if (rb->cache_policy != req.cache_policy)
      violated("cache_policy", "requested " + to_string(req.cache_policy) + ", resolved " +
                                   to_string(rb->cache_policy));
    unsigned want = req.permissions.bits(), got = rb->permissions.bits();
    if ((want & ~got) != 0)
      violated("permissions", "requested " + to_string(req.permissions) + ", resolved " +
                                  to_string(rb->permissions));
    else if ((got & ~want) != 0)
      report.add(Severity::Warn, "MIN_PERM", owner, req.logical_name,
                 "layout grants " + to_string(rb->permissions) + " where the requirement needs " +
                     to_string(req.permissions));
    if (req.alignment) {
      if (rb->alignment % *req.alignment != 0)
        violated("alignment", "requested " + format_size(*req.alignment) + ", resolved " +
                                  format_size(rb->alignment));
    }
    if (req.shared_with != rb->shared_with)
      violated("shared_with", "sharing list differs from the requirement");
    if (req.physically_contiguous != rb->physically_contiguous)
      violated("physically_contiguous", "contiguity flag differs from the requirement");
  }

  // Blocks without a requirement.
  for (const auto& b : layout.blocks) {
    bool known = false;
    for (const auto& req : reqs)
      if (b.owner == req.owner && b.logical_name == req.logical_name) known = true;
    if (!known)
      report.add(Severity::Error, "EXTRA_BLOCK", b.owner.key(), b.logical_name,
                 "layout contains a block no requirement asked for");
  }

  // 2. Block-level sanity: alignment invariants and map containment.
  for (const auto& b : layout.blocks) {
    if (!is_pow2(b.alignment) || b.virtual_address % b.alignment != 0 ||
        b.physical_address % b.alignment != 0)
      report.add(Severity::Error, "MISALIGNED", b.owner.key(), b.logical_name,
                 "addresses are not multiples of the resolved alignment " +
                     format_size(b.alignment));
    if (!covered_by_map(layout.memmap, b.physical_address, b.size))
      report.add(Severity::Error, "OUT_OF_MAP", b.owner.key(), b.logical_name,
                 "physical range [" + hex(b.physical_address) + ", " + hex(b.phys_end()) +
                     ") lies outside the memory map");
    if (b.physically_contiguous &&
        !layout.memmap.find(b.physical_address, b.size))
      report.add(Severity::Error, "CONTIGUITY", b.owner.key(), b.logical_name,
                 "physically contiguous block spans region boundaries");
    // Device memory must be mapped uncacheable-io; RAM must not pretend to
    // be a device.
    for (const auto& r : layout.memmap.regions) {
      if (!overlap(b.physical_address, b.size, r.base, r.size)) continue;
      if (r.region_class == RegionClass::Device && b.cache_policy != CachePolicy::Io)
        report.add(Severity::Error, "CACHE_INCOMPATIBLE", b.owner.key(), b.logical_name,
                   "block overlaps device region " + r.name + " without the io cache policy");
    }
  }

  // 3. Virtual overlaps inside each address space.
  for (const auto& plan : layout.plans) {
    for (std::size_t i = 0; i < plan.entries.size(); ++i) {
      for (std::size_t j = i + 1; j < plan.entries.size(); ++j) {
        const auto& a = plan.entries[i];
        const auto& b = plan.entries[j];
        const ResolvedBlock& ba = layout.block_of(a);
        const ResolvedBlock& bb = layout.block_of(b);
        if (overlap(a.virtual_address, ba.size, b.virtual_address, bb.size))
          report.add(Severity::Error, "VIRTUAL_OVERLAP", plan.space.key(),
                     ba.logical_name + "+" + bb.logical_name,
                     ba.id() + " and " + bb.id() + " overlap virtually in space " +
                         plan.space.key());
      }
    }
  }

  // 4. Physical isolation across owners.
  for (std::size_t i = 0; i < layout.blocks.size(); ++i) {
    for (std::size_t j = i + 1; j < layout.blocks.size(); ++j) {
      const ResolvedBlock& a = layout.blocks[i];
      const ResolvedBlock& b = layout.blocks[j];
      if (a.owner == b.owner) continue;
      if (!overlap(a.physical_address, a.size, b.physical_address, b.size)) continue;
      if (authorizes(a, b.owner) || authorizes(b, a.owner)) continue;
      report.add(Severity::Error, "PHYS_ISOLATION", a.owner.key(), a.logical_name,
                 a.id() + " and " + b.id() + " overlap physically without authorization");
    }
  }

  // 5. Kernel mappings identical in every space; shared blocks may move.
  for (const auto& plan : layout.plans) {
    for (const auto& e : plan.entries) {
      const ResolvedBlock& rb = layout.block_of(e);
      if (rb.owner.is_kernel()) {
        if (e.virtual_address != rb.virtual_address)
          report.add(Severity::Error, "KERNEL_MISMATCH", plan.space.key(), rb.logical_name,
                     "kernel block mapped at " + hex(e.virtual_address) + " here but at " +
                         hex(rb.virtual_address) + " canonically");
      } else if (e.virtual_address != rb.virtual_address) {
        report.add(Severity::Info, "SHARED_VADDR_DIFFERS", plan.space.key(), rb.logical_name,
                   rb.id() + " is mapped at " + hex(e.virtual_address) + " in space " +
                       plan.space.key() + " but at " + hex(rb.virtual_address) +
                       " in its own space");
      }
    }
  }

  // 6. Plans must exist for the kernel and every partition, and every plan
  // must carry every kernel block.
  if (!layout.find_plan(Owner::kernel()))
    report.add(Severity::Error, "MISSING_SPACE", "kernel", "", "layout has no kernel plan");
  for (const auto& b : layout.blocks) {
    if (b.owner.is_kernel()) continue;
    if (!layout.find_plan(b.owner))
      report.add(Severity::Error, "MISSING_SPACE", b.owner.key(), "",
                 "layout has no plan for the block's owner");
  }
  for (const auto& plan : layout.plans) {
    for (const auto& b : layout.blocks) {
      bool wanted = b.owner.is_kernel() || b.owner == plan.space ||
                    (std::find(b.shared_with.begin(), b.shared_with.end(), plan.space) !=
                     b.shared_with.end());
      bool present = false;
      for (const auto& e : plan.entries)
        if (&layout.block_of(e) == &b) present = true;
      if (wanted && !present)
        report.add(Severity::Error, "MISSING_MAPPING", plan.space.key(), b.logical_name,
                   b.id() + " is not mapped in space " + plan.space.key());
      if (!wanted && present)
        report.add(Severity::Error, "ISOLATION", plan.space.key(), b.logical_name,
                   b.id() + " is mapped in space " + plan.space.key() +
                       " without ownership or sharing");
    }
  }

  report.sort();
  return report;
}

namespace {

void verify_tlb_config(const MmuConfig& config, const MemoryLayout& layout,
                       VerificationReport& report) {
  auto partitions = layout.partitions();
  std::map<unsigned, const MltcSequence*> by_id;
  for (const auto& seq : config.tlb_sequences) {
    if (by_id.count(seq.owner_id)) {
      report.add(Severity::Error, "DUPLICATE_SPACE", "-", std::to_string(seq.owner_id),
                 "artifact contains two sequences for owner id " +
                     std::to_string(seq.owner_id));
      continue;
    }
    by_id[seq.owner_id] = &seq;
    if (seq.owner_id == 0 || seq.owner_id > partitions.size())
      report.add(Severity::Error, "UNKNOWN_SPACE", "-", std::to_string(seq.owner_id),
                 "sequence owner id does not name a partition of the layout");
    if (seq.entries.size() > layout.mmu.entry_count)
      report.add(Severity::Error, "ENTRY_BUDGET_EXCEEDED", std::to_string(seq.owner_id), "",
                 std::to_string(seq.entries.size()) + " entries exceed the model's " +
                     std::to_string(layout.mmu.entry_count));
  }

  for (std::size_t p = 0; p < partitions.size(); ++p) {
    const Owner& space = partitions[p];
    unsigned id = static_cast<unsigned>(p + 1);
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      report.add(Severity::Error, "MISSING_SPACE", space.key(), "",
                 "artifact has no sequence for this partition");
      continue;
    }
    const MltcSequence& seq = *it->second;
    std::vector<MappingInterval> actual;
    bool decode_failed = false;
    for (std::size_t k = 0; k < seq.entries.size(); ++k) {
      try {
        TlbEntry e = decode_entry(seq.entries[k]);
        if (!e.valid) continue;
        MappingInterval m;
        m.v0 = e.virtual_base;
        m.v1 = e.virtual_base + e.span();
        m.attr.phys = e.physical_base;
        m.attr.perms = e.permissions;
        m.attr.cache = e.cache_policy;
        m.attr.global = e.is_global();
        m.attr.tag = e.pid;
        m.origin = "entry[" + std::to_string(k) + "]";
        actual.push_back(std::move(m));
      } catch (const DecodeError& err) {
        report.add(Severity::Error, "DECODE_ERROR", space.key(),
                   "entry[" + std::to_string(k) + "]", err.what());
        decode_failed = true;
      }
    }
    for (const auto& [a, b] : internal_overlaps(actual))
      report.add(Severity::Error, "CONFIG_OVERLAP", space.key(), a->origin + "+" + b->origin,
                 "decoded entries overlap at " + hex(std::max(a->v0, b->v0)));
    const AddressSpacePlan* plan = layout.find_plan(space);
    if (!plan || decode_failed) continue;
    emit_segment_findings(
        diff_mappings(expected_intervals(layout, *plan), actual, CompareFlags{}), space.key(),
        report);
  }
}

void verify_pt_config(const MmuConfig& config, const MemoryLayout& layout,
                      VerificationReport& report) {
  const MlptArtifact& art = *config.pagetable;
  if (!(art.geometry == layout.mmu.geometry))
    report.add(Severity::Error, "GEOMETRY_MISMATCH", "-", "",
               "artifact geometry differs from the MMU model");
  if (art.kernel_global != layout.mmu.has_global_bit)
    report.add(Severity::Error, "GLOBAL_MISMATCH", "-", "",
               "kernel-global flag disagrees with the MMU model");

  auto partitions = layout.partitions();
  // Expected flush decision: kernel pages count once, partition pages once
  // per owning space.
  std::size_t total_pages = 0;
  for (const auto& plan : layout.plans) {
    for (const auto& e : plan.entries) {
      const ResolvedBlock& rb = layout.block_of(e);
      if (rb.owner.is_kernel() && !plan.space.is_kernel()) continue;
      total_pages +=
          leaf_count(e.virtual_address, rb.physical_address, rb.size, layout.mmu.geometry);
    }
  }
  bool expected_flush = total_pages > layout.mmu.tlb_capacity;
  if (art.flush_on_switch != expected_flush)
    report.add(Severity::Error, "FLUSH_MISMATCH", "-", "",
               std::string("flush_on_switch is ") + (art.flush_on_switch ? "set" : "clear") +
                   " but the page totals say otherwise");

  // ASID plan: one unique nonzero asid per partition.
  std::set<unsigned> seen_asids;
  std::map<unsigned, unsigned> asid_of;  // owner id -> asid
  for (const auto& [owner_id, asid] : art.partition_asids) {
    if (owner_id == 0 || owner_id > partitions.size()) {
      report.add(Severity::Error, "UNKNOWN_SPACE", "-", std::to_string(owner_id),
                 "asid plan names an owner id outside the layout");
      continue;
    }
    if (asid == 0 || asid >= (Size{1} << layout.mmu.asid_bits))
      report.add(Severity::Error, "ASID_MISMATCH", partitions[owner_id - 1].key(), "",
                 "partition asid " + std::to_string(asid) + " is out of range");
    if (!seen_asids.insert(asid).second)
      report.add(Severity::Error, "ASID_MISMATCH", partitions[owner_id - 1].key(), "",
                 "asid " + std::to_string(asid) + " is assigned twice");
    asid_of[owner_id] = asid;
  }
  for (std::size_t p = 0; p < partitions.size(); ++p)
    if (!asid_of.count(static_cast<unsigned>(p + 1)))
      report.add(Severity::Error, "ASID_MISMATCH", partitions[p].key(), "",
                 "partition has no asid assignment");

  std::map<unsigned, const MlptSpace*> by_id;
  for (const auto& s : art.spaces) {
    if (by_id.count(s.owner_id)) {
      report.add(Severity::Error, "DUPLICATE_SPACE", "-", std::to_string(s.owner_id),
                 "artifact contains two images for owner id " + std::to_string(s.owner_id));
      continue;
    }
    by_id[s.owner_id] = &s;
    if (s.owner_id > partitions.size())
      report.add(Severity::Error, "UNKNOWN_SPACE", "-", std::to_string(s.owner_id),
                 "image owner id does not name a space of the layout");
  }

  for (const auto& plan : layout.plans) {
    unsigned id = plan.space.is_kernel() ? 0 : layout.space_id(plan.space);
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      report.add(Severity::Error, "MISSING_SPACE", plan.space.key(), "",
                 "artifact has no page-table image for this space");
      continue;
    }
    const MlptSpace& s = *it->second;
    unsigned expected_asid = plan.space.is_kernel() ? 0 : asid_of[id];
    if (s.asid != expected_asid)
      report.add(Severity::Error, "ASID_MISMATCH", plan.space.key(), "",
                 "image asid " + std::to_string(s.asid) + " does not match the plan's " +
                     std::to_string(expected_asid));

    PageTableImage img;
    img.space = plan.space;
    img.root_physical = s.image_base + s.root_offset;
    img.bytes = s.bytes;
    img.image_base = s.image_base;
    std::vector<MappingInterval> actual;
    try {
      for (const auto& m : decode_page_tables(img, layout.mmu.geometry)) {
        MappingInterval mi;
        mi.v0 = m.virtual_base;
        mi.v1 = m.virtual_base + m.size;
        mi.attr.phys = m.physical_base;
        mi.attr.perms = m.permissions;
        mi.attr.cache = m.cache_policy;
        mi.attr.global = m.global;
        mi.attr.tag = 0;  // per-space images carry attribution at the root
        mi.origin = "page@" + hex(m.virtual_base);
        actual.push_back(std::move(mi));
      }
    } catch (const MalformedImageError& err) {
      report.add(Severity::Error, "DECODE_ERROR", plan.space.key(), "", err.what());
      continue;
    }
    auto expected = expected_intervals(layout, plan);
    for (auto& m : expected) m.attr.tag = 0;  // tag checked via the image asid
    CompareFlags flags;
    flags.tag = false;
    emit_segment_findings(diff_mappings(expected, actual, flags), plan.space.key(), report);

    // Warm-up list: one address per own leaf mapping, page-base exact;
    // kernel pages excluded while they stay globally resident.
    std::vector<std::pair<Addr, bool>> expected_warm;
    for (const auto& pe : plan.entries) {
      const ResolvedBlock& rb = layout.block_of(pe);
      if (rb.owner.is_kernel() && art.kernel_global) continue;
      for (const auto& leaf :
           decompose_leaves(pe.virtual_address, rb.physical_address, rb.size,
                            layout.mmu.geometry))
        expected_warm.push_back({leaf.virtual_base, rb.permissions.kernel_read});
    }
    std::sort(expected_warm.begin(), expected_warm.end());
    std::vector<std::pair<Addr, bool>> actual_warm;
    for (const auto& w : s.warmup) actual_warm.push_back({w.vaddr, w.readable});
    std::sort(actual_warm.begin(), actual_warm.end());
    if (expected_warm != actual_warm)
      report.add(Severity::Error, "WARMUP_MISMATCH", plan.space.key(), "",
                 "warm-up list does not cover the space's pages exactly (" +
                     std::to_string(actual_warm.size()) + " listed, " +
                     std::to_string(expected_warm.size()) + " expected)");
  }
}

}  // namespace

VerificationReport verify_mmu_config(const MmuConfig& config, const MemoryLayout& layout) {
  VerificationReport report;
  if (config.is_tlb() != layout.mmu.is_tlb()) {
    report.add(Severity::Error, "BACKEND_MISMATCH", "-", "",
               "artifact kind does not match the layout's MMU model");
    report.sort();
    return report;
  }
  if (config.is_tlb())
    verify_tlb_config(config, layout, report);
  else
    verify_pt_config(config, layout, report);
  report.sort();
  return report;
}

}  // namespace memlayout
