#include "pagetable/pagetable.hpp"

#include <algorithm>
#include <map>

#include "core/error.hpp"
#include "core/interchange.hpp"

namespace memlayout {

namespace desc {

std::uint64_t leaf(Addr phys, const Permissions& p, CachePolicy c, bool global) {
  std::uint64_t d = kValid;
  d |= phys & kAddrMask;
  d |= static_cast<std::uint64_t>(p.bits()) << kPermShift;
  d |= static_cast<std::uint64_t>(static_cast<unsigned>(c)) << kCacheShift;
  if (global) d |= kGlobal;
  return d;
}

std::uint64_t table(Addr next_table_phys) {
  return kValid | kTable | (next_table_phys & kAddrMask);
}

}  // namespace desc

namespace {

constexpr Size kDescGranule = 4096;  // bits 47:12 cannot express finer placement

struct BuildTable {
  unsigned level = 1;
  bool kernel_owned = false;
  std::vector<std::uint64_t> raw;  // leaf descriptors; table slots patched later
  std::vector<int> child;          // table id per slot, -1 = none
  Addr phys = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const PageTableGeometry& g) : g_(g) {}

  int alloc(unsigned level, bool kernel_owned) {
    BuildTable t;
    t.level = level;
    t.kernel_owned = kernel_owned;
    t.raw.assign(Size{1} << g_.index_bits[level - 1], 0);
    t.child.assign(t.raw.size(), -1);
    tables_.push_back(std::move(t));
    return static_cast<int>(tables_.size()) - 1;
  }

  int clone(int src) {
    BuildTable t = tables_[src];
    t.kernel_owned = false;
    tables_.push_back(std::move(t));
    return static_cast<int>(tables_.size()) - 1;
  }

  // Inserts one leaf mapping under `root`.  While descending on behalf of a
  // partition, kernel-owned tables on the path are cloned so the shared
  // kernel subtree is never modified.
  void insert(int root, const LeafMapping& leaf, std::uint64_t leaf_desc, bool for_kernel,
              const std::string& context) {
    int cur = root;
    for (unsigned level = 1; level < leaf.level; ++level) {
      std::size_t idx = slot(leaf.virtual_base, level);
      BuildTable& t = tables_[cur];
      int next = t.child[idx];
      if (next < 0) {
        if (t.raw[idx] != 0)
          throw InfeasibleError(context, "table conflict",
                                "leaf and table descriptors collide at level " +
                                    std::to_string(level));
        next = alloc(level + 1, for_kernel);
        tables_[cur].child[idx] = next;
      } else if (!for_kernel && tables_[next].kernel_owned) {
        next = clone(next);
        tables_[cur].child[idx] = next;
      }
      cur = next;
    }
    std::size_t idx = slot(leaf.virtual_base, leaf.level);
    BuildTable& t = tables_[cur];
    if (t.raw[idx] != 0 || t.child[idx] >= 0)
      throw InfeasibleError(context, "mapping conflict",
                            "slot already mapped at " + hex(leaf.virtual_base));
    t.raw[idx] = leaf_desc;
  }

  std::size_t slot(Addr v, unsigned level) const {
    return (v >> g_.shift_for(level)) & ((Size{1} << g_.index_bits[level - 1]) - 1);
  }

  std::vector<BuildTable>& tables() { return tables_; }

 private:
  const PageTableGeometry& g_;
  std::vector<BuildTable> tables_;
};

// Physical spans already taken by resolved blocks.
std::vector<std::pair<Addr, Addr>> block_spans(const MemoryLayout& layout) {
  std::vector<std::pair<Addr, Addr>> spans;
  for (const auto& b : layout.blocks) spans.push_back({b.physical_address, b.phys_end()});
  std::sort(spans.begin(), spans.end());
  return spans;
}

// Lowest gap of `size` bytes aligned to `align` inside the region, avoiding
// the given spans.
std::optional<Addr> region_gap(const PhysicalRegion& r,
                               const std::vector<std::pair<Addr, Addr>>& spans, Size size,
                               Size align) {
  Addr a = align_up(r.base, align);
  while (a + size <= r.end() && a + size > a) {
    bool moved = false;
    for (const auto& [b, e] : spans) {
      if (b < a + size && a < e) {
        a = align_up(e, align);
        moved = true;
        break;
      }
    }
    if (!moved) return a;
  }
  return std::nullopt;
}

}  // namespace

PageTableSet build_page_tables(const MemoryLayout& layout) {
  if (layout.mmu.is_tlb())
    throw Error(ErrorCode::BackendMismatch, "layout targets a fixed-TLB MMU");
  const PageTableGeometry& g = layout.mmu.geometry;
  if (g.page_size < kDescGranule)
    throw InfeasibleError("geometry", "page size",
                          "descriptor output field requires pages of at least 4K");

  const Addr va_limit = g.va_bits() >= 64 ? ~Addr{0} : (Addr{1} << g.va_bits());
  auto partitions = layout.partitions();
  if (partitions.size() >= (Size{1} << layout.mmu.asid_bits))
    throw InfeasibleError("asid plan", "asid space exhausted",
                          std::to_string(partitions.size()) + " partitions need more than " +
                              std::to_string(layout.mmu.asid_bits) + " asid bits");

  TreeBuilder builder(g);
  struct SpaceInfo {
    Owner space;
    int root = -1;
    std::size_t own_pages = 0;
  };
  std::vector<SpaceInfo> spaces;

  auto leaves_of = [&](const PlanEntry& pe) {
    const ResolvedBlock& rb = layout.block_of(pe);
    if (pe.virtual_address + rb.size > va_limit || pe.virtual_address + rb.size < pe.virtual_address)
      throw InfeasibleError(rb.id(), "address width",
                            "virtual range exceeds the " + std::to_string(g.va_bits()) +
                                "-bit space");
    if (rb.phys_end() > (Addr{1} << 48))
      throw InfeasibleError(rb.id(), "address width",
                            "physical range exceeds the 48-bit descriptor field");
    try {
      return decompose_leaves(pe.virtual_address, rb.physical_address, rb.size, g);
    } catch (const AlignmentError& e) {
      throw InfeasibleError(rb.id(), "page alignment", e.what());
    }
  };

  // Kernel space first; partitions clone the contended path.
  const AddressSpacePlan* kernel_plan = layout.find_plan(Owner::kernel());
  SpaceInfo kernel_info;
  kernel_info.space = Owner::kernel();
  kernel_info.root = builder.alloc(1, true);
  if (kernel_plan) {
    for (const auto& pe : kernel_plan->entries) {
      const ResolvedBlock& rb = layout.block_of(pe);
      bool global = layout.mmu.has_global_bit && rb.owner.is_kernel();
      for (const auto& leaf : leaves_of(pe)) {
        builder.insert(kernel_info.root, leaf,
                       desc::leaf(leaf.physical_base, rb.permissions, rb.cache_policy, global),
                       true, rb.id());
        ++kernel_info.own_pages;
      }
    }
  }
  spaces.push_back(kernel_info);

  for (const auto& part : partitions) {
    const AddressSpacePlan* plan = layout.find_plan(part);
    SpaceInfo info;
    info.space = part;
    info.root = builder.clone(kernel_info.root);
    for (const auto& pe : plan->entries) {
      const ResolvedBlock& rb = layout.block_of(pe);
      if (rb.owner.is_kernel()) continue;  // already present via the shared subtree
      for (const auto& leaf : leaves_of(pe)) {
        builder.insert(info.root, leaf,
                       desc::leaf(leaf.physical_base, rb.permissions, rb.cache_policy, false),
                       false, rb.id());
        ++info.own_pages;
      }
    }
    spaces.push_back(info);
  }

  // Arena layout: allocation order, every table aligned to its size (at
  // least the 4K descriptor granule).
  auto& tables = builder.tables();
  Size max_align = kDescGranule;
  std::vector<Addr> offsets(tables.size());
  Addr end = 0;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    Size bytes = tables[i].raw.size() * 8;
    Size align = std::max<Size>(pow2_ceil(bytes), kDescGranule);
    max_align = std::max(max_align, align);
    end = align_up(end, align);
    offsets[i] = end;
    end += bytes;
  }
  Size arena_size = end;

  // Region choice: internal RAM first, then cheapest RAM.
  auto spans = block_spans(layout);
  const PhysicalRegion* chosen = nullptr;
  Addr arena_base = 0;
  std::vector<const PhysicalRegion*> candidates;
  for (const auto& r : layout.memmap.regions)
    if (r.region_class == RegionClass::InternalRam) candidates.push_back(&r);
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const PhysicalRegion* a, const PhysicalRegion* b) {
                     return a->base < b->base;
                   });
  std::vector<const PhysicalRegion*> rest;
  for (const auto& r : layout.memmap.regions)
    if (r.region_class != RegionClass::Device) rest.push_back(&r);
  std::stable_sort(rest.begin(), rest.end(),
                   [](const PhysicalRegion* a, const PhysicalRegion* b) {
                     if (a->access_cost != b->access_cost) return a->access_cost < b->access_cost;
                     return a->base < b->base;
                   });
  candidates.insert(candidates.end(), rest.begin(), rest.end());
  for (const auto* r : candidates) {
    auto gap = region_gap(*r, spans, std::max<Size>(arena_size, 1), max_align);
    if (gap) {
      chosen = r;
      arena_base = *gap;
      break;
    }
  }
  if (!chosen)
    throw InfeasibleError("page tables", "no physical room",
                          "no RAM region can hold " + format_size(arena_size) +
                              " of page tables");

  // Patch table descriptors now that physical addresses are known.
  for (std::size_t i = 0; i < tables.size(); ++i) tables[i].phys = arena_base + offsets[i];
  auto arena = std::make_shared<std::vector<std::uint8_t>>(arena_size, 0);
  for (std::size_t i = 0; i < tables.size(); ++i) {
    BuildTable& t = tables[i];
    for (std::size_t s = 0; s < t.raw.size(); ++s) {
      std::uint64_t d = t.child[s] >= 0 ? desc::table(tables[t.child[s]].phys) : t.raw[s];
      for (int byte = 0; byte < 8; ++byte)
        (*arena)[offsets[i] + s * 8 + byte] =
            static_cast<std::uint8_t>((d >> (8 * byte)) & 0xFF);
    }
  }

  PageTableSet set;
  set.asid_plan.kernel_global = layout.mmu.has_global_bit;
  std::size_t total_pages = 0;
  for (const auto& info : spaces) total_pages += info.own_pages;
  set.asid_plan.flush_on_switch = total_pages > layout.mmu.tlb_capacity;
  unsigned next_asid = 1;
  for (const auto& part : partitions)
    set.asid_plan.partition_asids.push_back({part, next_asid++});

  for (const auto& info : spaces) {
    PageTableImage img;
    img.space = info.space;
    img.root_physical = tables[info.root].phys;
    img.bytes = arena;
    img.image_base = arena_base;
    img.table_region = chosen->region_class;
    img.page_count = info.own_pages;
    img.asid = info.space.is_kernel() ? 0 : layout.space_id(info.space);
    set.images.push_back(std::move(img));
  }
  return set;
}

std::vector<WarmupList> generate_warmup(const MemoryLayout& layout, const PageTableSet& set) {
  std::vector<WarmupList> out;
  for (const auto& img : set.images) {
    const AddressSpacePlan* plan = layout.find_plan(img.space);
    WarmupList list;
    list.space = img.space;
    for (const auto& pe : plan->entries) {
      const ResolvedBlock& rb = layout.block_of(pe);
      // Global kernel entries survive switches; only warm them when the
      // model cannot mark them global.
      if (rb.owner.is_kernel() && set.asid_plan.kernel_global && !img.space.is_kernel())
        continue;
      if (img.space.is_kernel() && set.asid_plan.kernel_global) continue;
      for (const auto& leaf :
           decompose_leaves(pe.virtual_address, rb.physical_address, rb.size,
                            layout.mmu.geometry))
        list.entries.push_back(WarmupEntry{leaf.virtual_base, rb.permissions.kernel_read});
    }
    std::sort(list.entries.begin(), list.entries.end(),
              [](const WarmupEntry& a, const WarmupEntry& b) { return a.vaddr < b.vaddr; });
    out.push_back(std::move(list));
  }
  return out;
}

VerificationReport zero_miss_budget(const MemoryLayout& layout) {
  VerificationReport report;
  if (layout.mmu.is_tlb()) return report;
  for (const auto& plan : layout.plans) {
    unsigned pages = plan_budget_demand(layout, plan);
    if (pages > layout.mmu.tlb_capacity)
      report.add(Severity::Error, "ZERO_MISS_UNACHIEVABLE", plan.space.key(), "",
                 std::to_string(pages) + " pages mapped in the space, TLB holds " +
                     std::to_string(layout.mmu.tlb_capacity));
  }
  report.sort();
  return report;
}

namespace {

struct Walker {
  const PageTableImage& image;
  const PageTableGeometry& g;
  std::vector<DecodedMapping> out;

  std::uint64_t read_desc(Addr table_phys, std::size_t slot) const {
    Addr off = table_phys - image.image_base + slot * 8;
    std::uint64_t d = 0;
    for (int byte = 0; byte < 8; ++byte)
      d |= static_cast<std::uint64_t>((*image.bytes)[off + byte]) << (8 * byte);
    return d;
  }

  void check_table_bounds(Addr phys, unsigned level) const {
    Size bytes = g.table_bytes(level);
    if (phys < image.image_base || phys + bytes > image.image_base + image.bytes->size())
      throw MalformedImageError("table pointer " + hex(phys) + " leaves the image");
    if (phys % std::max<Size>(pow2_ceil(bytes), kDescGranule) != 0)
      throw MalformedImageError("table pointer " + hex(phys) + " is misaligned");
  }

  void walk(Addr table_phys, unsigned level, Addr vbase) {
    check_table_bounds(table_phys, level);
    std::size_t slots = Size{1} << g.index_bits[level - 1];
    for (std::size_t i = 0; i < slots; ++i) {
      std::uint64_t d = read_desc(table_phys, i);
      Addr v = vbase | (static_cast<Addr>(i) << g.shift_for(level));
      if ((d & desc::kValid) == 0) {
        if (d != 0)
          throw MalformedImageError("invalid descriptor with stray bits at " + hex(v));
        continue;
      }
      if (d & desc::kReserved)
        throw MalformedImageError("reserved descriptor bits set at " + hex(v));
      if (d & desc::kTable) {
        if (level == g.levels)
          throw MalformedImageError("table descriptor at the leaf level at " + hex(v));
        if (d & (desc::kPermMask | desc::kCacheMask | desc::kGlobal))
          throw MalformedImageError("table descriptor carries leaf attributes at " + hex(v));
        walk(d & desc::kAddrMask, level + 1, v);
        continue;
      }
      if (!g.leaf_allowed(level))
        throw MalformedImageError("leaf descriptor at non-leaf level " +
                                  std::to_string(level) + " at " + hex(v));
      DecodedMapping m;
      m.virtual_base = v;
      m.size = g.leaf_size(level);
      m.physical_base = d & desc::kAddrMask;
      if (m.physical_base % m.size != 0 && m.size > kDescGranule)
        throw MalformedImageError("large-page output address misaligned at " + hex(v));
      unsigned perm_bits = static_cast<unsigned>((d & desc::kPermMask) >> desc::kPermShift);
      if (perm_bits == 0)
        throw MalformedImageError("leaf with empty permissions at " + hex(v));
      m.permissions = Permissions::from_bits(perm_bits);
      unsigned cache = static_cast<unsigned>((d & desc::kCacheMask) >> desc::kCacheShift);
      if (cache > 4)
        throw MalformedImageError("unknown cache code " + std::to_string(cache) + " at " +
                                  hex(v));
      m.cache_policy = static_cast<CachePolicy>(cache);
      m.global = (d & desc::kGlobal) != 0;
      out.push_back(m);
    }
  }
};

}  // namespace

std::vector<DecodedMapping> decode_page_tables(const PageTableImage& image,
                                               const PageTableGeometry& geometry) {
  Walker w{image, geometry, {}};
  w.walk(image.root_physical, 1, 0);
  std::sort(w.out.begin(), w.out.end(),
            [](const DecodedMapping& a, const DecodedMapping& b) {
              return a.virtual_base < b.virtual_base;
            });
  return w.out;
}

LenientDesc interpret_lenient(std::uint64_t d, unsigned level, const PageTableGeometry& g) {
  LenientDesc out;
  if ((d & desc::kValid) == 0) return out;
  bool table_bit = (d & desc::kTable) != 0;
  if (table_bit) {
    if (level == g.levels) return out;  // no level below: unusable, faults
    out.kind = LenientDesc::Kind::Table;
    out.addr = d & desc::kAddrMask;
    return out;
  }
  if (!g.leaf_allowed(level)) return out;
  out.kind = LenientDesc::Kind::Leaf;
  Size span = g.leaf_size(level);
  out.addr = (d & desc::kAddrMask) & ~(span - 1);
  out.perms = Permissions::from_bits(
      static_cast<unsigned>((d & desc::kPermMask) >> desc::kPermShift));
  unsigned cache = static_cast<unsigned>((d & desc::kCacheMask) >> desc::kCacheShift);
  out.cache = cache > 4 ? CachePolicy::Uncached : static_cast<CachePolicy>(cache);
  out.global = (d & desc::kGlobal) != 0;
  return out;
}

namespace {

void lenient_walk(const PageTableImage& image, const PageTableGeometry& g, Addr table_phys,
                  unsigned level, Addr vbase, std::vector<DecodedMapping>& out) {
  Size bytes = g.table_bytes(level);
  if (table_phys < image.image_base ||
      table_phys + bytes > image.image_base + image.bytes->size())
    return;  // wild pointer: nothing reachable behind it
  std::size_t slots = Size{1} << g.index_bits[level - 1];
  for (std::size_t i = 0; i < slots; ++i) {
    Addr off = table_phys - image.image_base + i * 8;
    std::uint64_t d = 0;
    for (int byte = 0; byte < 8; ++byte)
      d |= static_cast<std::uint64_t>((*image.bytes)[off + byte]) << (8 * byte);
    LenientDesc ld = interpret_lenient(d, level, g);
    Addr v = vbase | (static_cast<Addr>(i) << g.shift_for(level));
    if (ld.kind == LenientDesc::Kind::Table) {
      lenient_walk(image, g, ld.addr, level + 1, v, out);
    } else if (ld.kind == LenientDesc::Kind::Leaf) {
      DecodedMapping m;
      m.virtual_base = v;
      m.size = g.leaf_size(level);
      m.physical_base = ld.addr;
      m.permissions = ld.perms;
      m.cache_policy = ld.cache;
      m.global = ld.global;
      out.push_back(m);
    }
  }
}

}  // namespace

std::vector<DecodedMapping> lenient_mappings(const PageTableImage& image,
                                             const PageTableGeometry& geometry) {
  std::vector<DecodedMapping> out;
  lenient_walk(image, geometry, image.root_physical, 1, 0, out);
  std::sort(out.begin(), out.end(), [](const DecodedMapping& a, const DecodedMapping& b) {
    return a.virtual_base < b.virtual_base;
  });
  return out;
}

namespace {

void append_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}
void append_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

class MlptReader {
 public:
  MlptReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::vector<std::uint8_t> blob(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> out(bytes_.begin() + pos_, bytes_.begin() + pos_ + n);
    pos_ += n;
    return out;
  }
  void expect_magic(const char* magic) {
    need(4);
    for (int i = 0; i < 4; ++i)
      if (bytes_[pos_ + i] != static_cast<std::uint8_t>(magic[i]))
        throw FormatError(std::string("bad magic, expected ") + magic);
    pos_ += 4;
  }
  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw FormatError("truncated artifact");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> write_mlpt(const PageTableSet& set,
                                     const std::vector<WarmupList>& warmups,
                                     const MemoryLayout& layout) {
  const PageTableGeometry& g = layout.mmu.geometry;
  std::vector<std::uint8_t> out{'M', 'L', 'P', 'T'};
  append_u16(out, 1);
  append_u64(out, g.page_size);
  append_u16(out, static_cast<std::uint16_t>(g.levels));
  for (unsigned b : g.index_bits) out.push_back(static_cast<std::uint8_t>(b));
  out.push_back(static_cast<std::uint8_t>(g.large_page_levels.size()));
  for (unsigned l : g.large_page_levels) out.push_back(static_cast<std::uint8_t>(l));
  out.push_back(set.asid_plan.kernel_global ? 1 : 0);
  out.push_back(set.asid_plan.flush_on_switch ? 1 : 0);
  append_u16(out, static_cast<std::uint16_t>(set.asid_plan.partition_asids.size()));
  for (const auto& [owner, asid] : set.asid_plan.partition_asids) {
    append_u16(out, static_cast<std::uint16_t>(layout.space_id(owner)));
    append_u16(out, static_cast<std::uint16_t>(asid));
  }
  append_u16(out, static_cast<std::uint16_t>(set.images.size()));
  for (const auto& img : set.images) {
    const WarmupList* warm = nullptr;
    for (const auto& w : warmups)
      if (w.space == img.space) warm = &w;
    append_u16(out, static_cast<std::uint16_t>(layout.space_id(img.space)));
    append_u16(out, static_cast<std::uint16_t>(img.asid));
    append_u64(out, img.root_physical - img.image_base);
    append_u64(out, img.image_base);
    append_u64(out, img.bytes->size());
    out.insert(out.end(), img.bytes->begin(), img.bytes->end());
    append_u32(out, warm ? static_cast<std::uint32_t>(warm->entries.size()) : 0);
    if (warm) {
      for (const auto& e : warm->entries) {
        append_u64(out, e.vaddr);
        out.push_back(e.readable ? 1 : 0);
      }
    }
  }
  return out;
}

MlptArtifact read_mlpt(const std::vector<std::uint8_t>& bytes) {
  MlptReader r(bytes);
  r.expect_magic("MLPT");
  std::uint16_t version = r.u16();
  if (version != 1) throw FormatError("unsupported MLPT version " + std::to_string(version));
  MlptArtifact a;
  a.geometry.page_size = r.u64();
  a.geometry.levels = r.u16();
  if (a.geometry.levels < 1 || a.geometry.levels > 5)
    throw FormatError("bad level count " + std::to_string(a.geometry.levels));
  a.geometry.index_bits.clear();
  for (unsigned i = 0; i < a.geometry.levels; ++i) a.geometry.index_bits.push_back(r.u8());
  unsigned large = r.u8();
  for (unsigned i = 0; i < large; ++i) a.geometry.large_page_levels.push_back(r.u8());
  a.kernel_global = r.u8() != 0;
  a.flush_on_switch = r.u8() != 0;
  std::uint16_t parts = r.u16();
  for (unsigned i = 0; i < parts; ++i) {
    unsigned owner = r.u16();
    unsigned asid = r.u16();
    a.partition_asids.push_back({owner, asid});
  }
  std::uint16_t spaces = r.u16();
  for (unsigned i = 0; i < spaces; ++i) {
    MlptSpace s;
    s.owner_id = r.u16();
    s.asid = r.u16();
    s.root_offset = r.u64();
    s.image_base = r.u64();
    std::uint64_t len = r.u64();
    if (len > (Size{1} << 32)) throw FormatError("unreasonable image length");
    s.file_offset = r.pos();
    s.bytes = std::make_shared<std::vector<std::uint8_t>>(r.blob(len));
    if (s.root_offset + 8 > len) throw FormatError("root offset outside the image");
    std::uint32_t warm = r.u32();
    for (std::uint32_t k = 0; k < warm; ++k) {
      WarmupEntry e;
      e.vaddr = r.u64();
      e.readable = r.u8() != 0;
      s.warmup.push_back(e);
    }
    a.spaces.push_back(std::move(s));
  }
  if (!r.at_end()) throw FormatError("trailing bytes after the last space");
  return a;
}

std::string mlpt_manifest(const PageTableSet& set, const std::vector<WarmupList>& warmups,
                          const MemoryLayout& layout) {
  Json j;
  j["format"] = "memlayout/mlpt-manifest";
  j["version"] = 1;
  j["mmu"] = to_json(layout.mmu);
  j["kernel_global"] = set.asid_plan.kernel_global;
  j["flush_on_switch"] = set.asid_plan.flush_on_switch;
  Json asids = Json::array();
  for (const auto& [owner, asid] : set.asid_plan.partition_asids) {
    Json e;
    e["space"] = owner.key();
    e["asid"] = asid;
    asids.push_back(std::move(e));
  }
  j["partition_asids"] = std::move(asids);
  Json spaces = Json::array();
  for (const auto& img : set.images) {
    Json s;
    s["space"] = img.space.key();
    s["asid"] = img.asid;
    s["root_physical"] = addr_json(img.root_physical);
    s["image_base"] = addr_json(img.image_base);
    s["image_bytes"] = img.bytes->size();
    s["table_region"] = to_string(img.table_region);
    s["page_count"] = img.page_count;
    for (const auto& w : warmups) {
      if (w.space == img.space) {
        Json entries = Json::array();
        for (const auto& e : w.entries) {
          Json ej;
          ej["vaddr"] = addr_json(e.vaddr);
          ej["readable"] = e.readable;
          entries.push_back(std::move(ej));
        }
        s["warmup"] = std::move(entries);
      }
    }
    spaces.push_back(std::move(s));
  }
  j["spaces"] = std::move(spaces);
  return j.dump(2) + "\n";
}

}  // namespace memlayout
