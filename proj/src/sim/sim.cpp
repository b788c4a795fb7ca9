#include "sim/sim.hpp"

#include <algorithm>

#include "core/error.hpp"

namespace memlayout {

std::string to_string(AccessOp op) {
  switch (op) {
    case AccessOp::Read: return "R";
    case AccessOp::Write: return "W";
    case AccessOp::Execute: return "X";
  }
  return "?";
}

std::string to_string(FaultKind k) {
  switch (k) {
    case FaultKind::NoMapping: return "NOMAPPING";
    case FaultKind::PermissionViolation: return "PERMISSION";
    case FaultKind::PrivilegeViolation: return "PRIVILEGE";
  }
  return "?";
}

CostModel CostModel::from_json_text(const std::string& text) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw FormatError("cost model: not a JSON object");
  CostModel cm;
  auto take = [&](const char* key, std::uint64_t& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_unsigned() || j[key].get<std::uint64_t>() == 0)
      throw FormatError(std::string("cost model: `") + key + "` must be a positive integer");
    out = j[key].get<std::uint64_t>();
  };
  take("tlb_hit_cost", cm.tlb_hit_cost);
  take("tlb_write_cost", cm.tlb_write_cost);
  take("walk_cost_external", cm.walk_cost_external);
  take("walk_cost_internal", cm.walk_cost_internal);
  take("walk_cost_device", cm.walk_cost_device);
  take("interrupt_overhead", cm.interrupt_overhead);
  return cm;
}

Json CostModel::to_json() const {
  Json j;
  j["tlb_hit_cost"] = tlb_hit_cost;
  j["tlb_write_cost"] = tlb_write_cost;
  j["walk_cost_external"] = walk_cost_external;
  j["walk_cost_internal"] = walk_cost_internal;
  j["walk_cost_device"] = walk_cost_device;
  j["interrupt_overhead"] = interrupt_overhead;
  return j;
}

SimulatedMmu::SimulatedMmu(const MmuConfig& config, const MemoryLayout& layout, CostModel cost,
                           SimMode mode)
    : model_(layout.mmu), mode_(mode), cost_model_(cost) {
  if (config.is_tlb() != model_.is_tlb())
    throw Error(ErrorCode::BackendMismatch,
                "artifact kind does not match the layout's MMU model");
  auto partitions = layout.partitions();
  if (config.is_tlb()) {
    capacity_ = model_.entry_count;
    for (const auto& seq : config.tlb_sequences) {
      if (seq.owner_id == 0 || seq.owner_id > partitions.size())
        throw FormatError("sequence owner id " + std::to_string(seq.owner_id) +
                          " names no partition");
      TlbSpace sp;
      sp.space = partitions[seq.owner_id - 1];
      sp.id = seq.owner_id;
      for (const auto& raw : seq.entries) sp.entries.push_back(decode_entry(raw));
      tlb_spaces_.push_back(std::move(sp));
    }
  } else {
    capacity_ = model_.tlb_capacity;
    const MlptArtifact& art = *config.pagetable;
    flush_on_switch_ = art.flush_on_switch;
    for (const auto& s : art.spaces) {
      PtSpace sp;
      if (s.owner_id > partitions.size())
        throw FormatError("image owner id " + std::to_string(s.owner_id) +
                          " names no space");
      sp.space = s.owner_id == 0 ? Owner::kernel() : partitions[s.owner_id - 1];
      sp.id = s.owner_id;
      sp.asid = s.asid;
      sp.image.space = sp.space;
      sp.image.bytes = s.bytes;
      sp.image.image_base = s.image_base;
      sp.image.root_physical = s.image_base + s.root_offset;
      sp.warmup = s.warmup;
      pt_spaces_.push_back(std::move(sp));
    }
    // Walk accesses are priced by the region holding the tables.
    if (!pt_spaces_.empty()) {
      Addr base = pt_spaces_.front().image.image_base;
      for (const auto& r : layout.memmap.regions)
        if (base >= r.base && base < r.end()) table_region_ = r.region_class;
    }
  }
}

const Owner& SimulatedMmu::current_space() const {
  if (!current_) throw Error(ErrorCode::InvalidArgument, "no address space is current");
  return *current_;
}

std::vector<Owner> SimulatedMmu::spaces() const {
  std::vector<Owner> out;
  for (const auto& s : tlb_spaces_) out.push_back(s.space);
  for (const auto& s : pt_spaces_) out.push_back(s.space);
  return out;
}

const SimulatedMmu::Slot* SimulatedMmu::lookup(Addr vaddr, CostBreakdown& cost) {
  cost.tlb_lookups += 1;
  cost.total += cost_model_.tlb_hit_cost;
  for (auto& s : tlb_) {
    if (vaddr >= s.vbase && vaddr - s.vbase < s.span && (s.global || s.tag == current_tag_)) {
      s.stamp = ++clock_;
      return &s;
    }
  }
  return nullptr;
}

void SimulatedMmu::insert(const Slot& slot, CostBreakdown& cost) {
  cost.tlb_writes += 1;
  cost.total += cost_model_.tlb_write_cost;
  for (auto& s : tlb_) {
    if (s.vbase == slot.vbase && s.span == slot.span && s.tag == slot.tag &&
        s.global == slot.global) {
      s = slot;
      s.stamp = ++clock_;
      return;
    }
  }
  if (tlb_.size() == capacity_) {
    auto victim = std::min_element(tlb_.begin(), tlb_.end(),
                                   [](const Slot& a, const Slot& b) { return a.stamp < b.stamp; });
    tlb_.erase(victim);
  }
  Slot s = slot;
  s.stamp = ++clock_;
  tlb_.push_back(s);
}

void SimulatedMmu::flush_non_global() {
  tlb_.erase(std::remove_if(tlb_.begin(), tlb_.end(),
                            [](const Slot& s) { return !s.global; }),
             tlb_.end());
}

std::optional<SimulatedMmu::Slot> SimulatedMmu::walk(const PtSpace& space, Addr vaddr,
                                                     CostBreakdown& cost) {
  const PageTableGeometry& g = model_.geometry;
  if (g.va_bits() < 64 && vaddr >= (Addr{1} << g.va_bits())) return std::nullopt;
  Addr table = space.image.root_physical;
  for (unsigned level = 1; level <= g.levels; ++level) {
    Size bytes = g.table_bytes(level);
    if (table < space.image.image_base ||
        table + bytes > space.image.image_base + space.image.bytes->size())
      return std::nullopt;  // wild pointer: nothing to fetch, translation fails
    cost.walk_memory_accesses += 1;
    cost.total += cost_model_.walk_cost(table_region_);
    std::size_t idx = (vaddr >> g.shift_for(level)) & ((Size{1} << g.index_bits[level - 1]) - 1);
    Addr off = table - space.image.image_base + idx * 8;
    std::uint64_t d = 0;
    for (int byte = 0; byte < 8; ++byte)
      d |= static_cast<std::uint64_t>((*space.image.bytes)[off + byte]) << (8 * byte);
    LenientDesc ld = interpret_lenient(d, level, g);
    if (ld.kind == LenientDesc::Kind::Invalid) return std::nullopt;
    if (ld.kind == LenientDesc::Kind::Table) {
      table = ld.addr;
      continue;
    }
    Slot s;
    s.span = g.leaf_size(level);
    s.vbase = vaddr & ~(s.span - 1);
    s.pbase = ld.addr;
    s.perms = ld.perms;
    s.global = ld.global;
    s.tag = ld.global ? 0 : space.asid;
    return s;
  }
  return std::nullopt;
}

AccessOutcome SimulatedMmu::check(const Slot& s, AccessOp op, Privilege priv, Addr vaddr,
                                  CostBreakdown cost) const {
  AccessOutcome out;
  out.cost = cost;
  bool user = priv == Privilege::User;
  bool granted;
  switch (op) {
    case AccessOp::Read: granted = user ? s.perms.user_read : s.perms.kernel_read; break;
    case AccessOp::Write: granted = user ? s.perms.user_write : s.perms.kernel_write; break;
    case AccessOp::Execute: granted = user ? s.perms.user_exec : s.perms.kernel_exec; break;
  }
  if (granted) {
    out.translated = true;
    out.paddr = s.pbase + (vaddr - s.vbase);
    return out;
  }
  out.translated = false;
  // User touching a page mapped for the kernel only is a privilege problem;
  // a page the user can partly use yields a plain permission fault.
  bool user_any = s.perms.user_read || s.perms.user_write || s.perms.user_exec;
  out.fault = (user && !user_any) ? FaultKind::PrivilegeViolation
                                  : FaultKind::PermissionViolation;
  return out;
}

CostBreakdown SimulatedMmu::switch_space(const Owner& target) {
  CostBreakdown cost;
  if (model_.is_tlb()) {
    const TlbSpace* sp = nullptr;
    for (const auto& s : tlb_spaces_)
      if (s.space == target) sp = &s;
    if (!sp) throw UnknownSpaceError(target.key());
    current_ = target;
    current_tag_ = sp->id;
    if (mode_ == SimMode::Static) {
      flush_non_global();
      for (const auto& e : sp->entries) {
        if (!e.valid) {  // written to hardware, but maps nothing
          cost.tlb_writes += 1;
          cost.total += cost_model_.tlb_write_cost;
          continue;
        }
        Slot s;
        s.vbase = e.virtual_base;
        s.span = e.span();
        s.pbase = e.physical_base;
        s.perms = e.permissions;
        s.global = e.is_global();
        s.tag = e.pid;
        insert(s, cost);
      }
    } else {
      // Lazy refill: a single invalidation, entries arrive on demand.
      flush_non_global();
      cost.tlb_writes += 1;
      cost.total += cost_model_.tlb_write_cost;
    }
  } else {
    const PtSpace* sp = nullptr;
    for (const auto& s : pt_spaces_)
      if (s.space == target) sp = &s;
    if (!sp) throw UnknownSpaceError(target.key());
    current_ = target;
    current_tag_ = sp->asid;
    if (mode_ == SimMode::Static) {
      if (flush_on_switch_) {
        flush_non_global();
        cost.tlb_writes += 1;
        cost.total += cost_model_.tlb_write_cost;
      }
      // Warm-up: one translating touch per page.  The touch only fills the
      // TLB; permissions are not exercised.
      for (const auto& w : sp->warmup) {
        if (lookup(w.vaddr, cost)) continue;
        auto slot = walk(*sp, w.vaddr, cost);
        if (slot) insert(*slot, cost);
      }
    } else {
      flush_non_global();
      cost.tlb_writes += 1;
      cost.total += cost_model_.tlb_write_cost;
    }
  }
  totals_ += cost;
  return cost;
}

AccessOutcome SimulatedMmu::access(AccessOp op, Privilege priv, Addr vaddr, unsigned size) {
  if (!current_) throw Error(ErrorCode::InvalidArgument, "no address space is current");
  if (size != 1 && size != 2 && size != 4 && size != 8)
    throw Error(ErrorCode::InvalidArgument, "access size must be 1, 2, 4 or 8");
  if (vaddr + size < vaddr)
    throw Error(ErrorCode::InvalidArgument, "access wraps the address space");
  CostBreakdown cost;
  if (const Slot* s = lookup(vaddr, cost)) {
    AccessOutcome out = check(*s, op, priv, vaddr, cost);
    totals_ += out.cost;
    return out;
  }
  AccessOutcome out;
  if (model_.is_tlb()) {
    if (mode_ == SimMode::Static) {
      out.translated = false;
      out.fault = FaultKind::NoMapping;  // nothing refills a fixed TLB
      out.cost = cost;
    } else {
      // Software refill: interrupt, then copy the entry from the sequence.
      cost.interrupts += 1;
      cost.total += cost_model_.interrupt_overhead;
      const TlbSpace* sp = nullptr;
      for (const auto& s : tlb_spaces_)
        if (s.space == *current_) sp = &s;
      const TlbEntry* found = nullptr;
      for (const auto& e : sp->entries)
        if (e.valid && vaddr >= e.virtual_base && vaddr - e.virtual_base < e.span()) {
          found = &e;
          break;
        }
      if (!found) {
        out.translated = false;
        out.fault = FaultKind::NoMapping;
        out.cost = cost;
      } else {
        Slot s;
        s.vbase = found->virtual_base;
        s.span = found->span();
        s.pbase = found->physical_base;
        s.perms = found->permissions;
        s.global = found->is_global();
        s.tag = found->pid;
        insert(s, cost);
        const Slot* hit = lookup(vaddr, cost);
        if (!hit) {  // refilled entry tagged for another space
          out.translated = false;
          out.fault = FaultKind::NoMapping;
          out.cost = cost;
        } else {
          out = check(*hit, op, priv, vaddr, cost);
          totals_ += out.cost;
          return out;
        }
      }
    }
  } else {
    const PtSpace* sp = nullptr;
    for (const auto& s : pt_spaces_)
      if (s.space == *current_) sp = &s;
    auto slot = walk(*sp, vaddr, cost);
    if (!slot) {
      out.translated = false;
      out.fault = FaultKind::NoMapping;
      out.cost = cost;
    } else {
      insert(*slot, cost);
      out = check(*slot, op, priv, vaddr, cost);
      totals_ += out.cost;
      return out;
    }
  }
  totals_ += out.cost;
  return out;
}

}  // namespace memlayout
