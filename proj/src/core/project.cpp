#include "core/project.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "core/docs.hpp"
#include "core/error.hpp"

namespace memlayout {

namespace {

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!(isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
      return false;
  return true;
}

Owner parse_owner(const Document& doc, const DocEntry& e) {
  auto o = owner_from_string(e.value);
  if (!o)
    throw SchemaError(doc.file, e.line,
                      "`" + e.key + "`: expected `kernel` or `partition:<name>`, got `" +
                          e.value + "`");
  return *o;
}

SystemMemoryMap parse_memmap(const Document& doc) {
  SystemMemoryMap map;
  bool saw_header = false;
  for (const auto& sec : doc.sections) {
    if (sec.name == "memory_map") {
      if (saw_header) throw SchemaError(doc.file, sec.line, "duplicate [memory_map]");
      saw_header = true;
      reject_unknown_keys(doc, sec, {"min_page_size"});
      map.min_page_size = parse_int(doc, require_key(doc, sec, "min_page_size"));
    } else if (sec.name == "region") {
      reject_unknown_keys(doc, sec, {"name", "base", "size", "class", "access_cost"});
      PhysicalRegion r;
      if (const auto* e = sec.find("name")) {
        if (!valid_name(e->value))
          throw SchemaError(doc.file, e->line, "bad region name `" + e->value + "`");
        r.name = e->value;
      }
      r.base = parse_int(doc, require_key(doc, sec, "base"));
      r.size = parse_int(doc, require_key(doc, sec, "size"));
      const auto& cls = require_key(doc, sec, "class");
      auto c = region_class_from_string(cls.value);
      if (!c) throw SchemaError(doc.file, cls.line, "unknown region class `" + cls.value + "`");
      r.region_class = *c;
      if (const auto* e = sec.find("access_cost")) {
        std::uint64_t v = parse_int(doc, *e);
        if (v == 0 || v > 0xFFFFFFFFull)
          throw SemanticError(doc.file, e->line, "access_cost must be a positive 32-bit value");
        r.access_cost = static_cast<std::uint32_t>(v);
      }
      if (r.size == 0)
        throw SemanticError(doc.file, sec.line, "region size must be > 0");
      if (r.base + r.size < r.base)
        throw SemanticError(doc.file, sec.line, "region wraps the address space");
      map.regions.push_back(r);
    } else {
      throw SchemaError(doc.file, sec.line, "unknown section [" + sec.name + "] in memory map");
    }
  }
  if (!saw_header) throw SchemaError(doc.file, 1, "missing [memory_map] section");
  if (map.regions.empty()) throw SemanticError(doc.file, 1, "memory map has no regions");
  if (!is_pow2(map.min_page_size) || map.min_page_size < kib(1))
    throw SemanticError(doc.file, 1, "min_page_size must be a power of two >= 1K");
  auto sorted = map.regions;
  std::sort(sorted.begin(), sorted.end(),
            [](const PhysicalRegion& a, const PhysicalRegion& b) { return a.base < b.base; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].base < sorted[i - 1].end())
      throw SemanticError(doc.file, 1,
                          "regions overlap: [" + hex(sorted[i - 1].base) + ", " +
                              hex(sorted[i - 1].end()) + ") and [" + hex(sorted[i].base) + ", " +
                              hex(sorted[i].end()) + ")");
  }
  return map;
}

MmuModel parse_mmu(const Document& doc) {
  const DocSection* sec = nullptr;
  for (const auto& s : doc.sections) {
    if (s.name != "mmu")
      throw SchemaError(doc.file, s.line, "unknown section [" + s.name + "] in MMU model");
    if (sec) throw SchemaError(doc.file, s.line, "duplicate [mmu]");
    sec = &s;
  }
  if (!sec) throw SchemaError(doc.file, 1, "missing [mmu] section");

  MmuModel mmu;
  const auto& kind = require_key(doc, *sec, "kind");
  if (kind.value == "tlb_fixed") {
    mmu.kind = MmuModel::Kind::TlbFixed;
    reject_unknown_keys(doc, *sec,
                        {"kind", "entry_count", "min_entry_size", "max_entry_size",
                         "associativity", "pid_bits"});
    mmu.entry_count = static_cast<unsigned>(parse_int(doc, require_key(doc, *sec, "entry_count")));
    mmu.min_entry_size = parse_int(doc, require_key(doc, *sec, "min_entry_size"));
    mmu.max_entry_size = parse_int(doc, require_key(doc, *sec, "max_entry_size"));
    if (const auto* e = sec->find("pid_bits"))
      mmu.pid_bits = static_cast<unsigned>(parse_int(doc, *e));
    if (const auto* e = sec->find("associativity")) {
      if (e->value != "full") {
        // "ways:sets:index_hook"
        auto parts = split_list(e->value);
        std::string v = e->value;
        std::replace(v.begin(), v.end(), ':', ' ');
        parts = split_list(v);
        if (parts.size() != 3)
          throw SchemaError(doc.file, e->line,
                            "associativity: expected `full` or `<ways>:<sets>:<hook>`");
        SetAssociativity sa;
        sa.ways = static_cast<unsigned>(std::stoul(parts[0]));
        sa.sets = static_cast<unsigned>(std::stoul(parts[1]));
        sa.index_hook_id = parts[2];
        mmu.set_associative = sa;
      }
    }
    if (mmu.entry_count == 0)
      throw SemanticError(doc.file, sec->line, "entry_count must be > 0");
    if (!is_pow2(mmu.min_entry_size) || !is_pow2(mmu.max_entry_size))
      throw SemanticError(doc.file, sec->line, "entry sizes must be powers of two");
    if (mmu.min_entry_size > mmu.max_entry_size)
      throw SemanticError(doc.file, sec->line, "min_entry_size exceeds max_entry_size");
    if (mmu.pid_bits == 0)
      throw SemanticError(doc.file, sec->line, "pid_bits must be > 0");
  } else if (kind.value == "page_table") {
    mmu.kind = MmuModel::Kind::PageTable;
    reject_unknown_keys(doc, *sec,
                        {"kind", "page_size", "levels", "index_bits", "large_page_levels",
                         "tlb_capacity", "asid_bits", "has_global_bit"});
    PageTableGeometry g;
    g.page_size = parse_int(doc, require_key(doc, *sec, "page_size"));
    g.levels = static_cast<unsigned>(parse_int(doc, require_key(doc, *sec, "levels")));
    g.index_bits.clear();
    const auto& ib = require_key(doc, *sec, "index_bits");
    for (const auto& tok : split_list(ib.value)) {
      unsigned long v = std::stoul(tok);
      g.index_bits.push_back(static_cast<unsigned>(v));
    }
    if (const auto* e = sec->find("large_page_levels")) {
      for (const auto& tok : split_list(e->value))
        g.large_page_levels.push_back(static_cast<unsigned>(std::stoul(tok)));
    }
    mmu.geometry = g;
    mmu.tlb_capacity =
        static_cast<unsigned>(parse_int(doc, require_key(doc, *sec, "tlb_capacity")));
    if (const auto* e = sec->find("asid_bits"))
      mmu.asid_bits = static_cast<unsigned>(parse_int(doc, *e));
    if (const auto* e = sec->find("has_global_bit")) mmu.has_global_bit = parse_bool(doc, *e);

    if (!is_pow2(g.page_size) || g.page_size < kib(1))
      throw SemanticError(doc.file, sec->line, "page_size must be a power of two >= 1K");
    if (g.levels < 1 || g.levels > 5)
      throw SemanticError(doc.file, sec->line, "levels must be in 1..5");
    if (g.index_bits.size() != g.levels)
      throw SemanticError(doc.file, sec->line, "index_bits must list one value per level");
    for (unsigned b : g.index_bits)
      if (b < 1 || b > 16)
        throw SemanticError(doc.file, sec->line, "index_bits entries must be in 1..16");
    if (g.va_bits() > 64)
      throw SemanticError(doc.file, sec->line, "virtual address width exceeds 64 bits");
    for (unsigned l : g.large_page_levels)
      if (l < 1 || l >= g.levels)
        throw SemanticError(doc.file, sec->line,
                            "large_page_levels entries must name a non-leaf level");
    if (mmu.tlb_capacity == 0)
      throw SemanticError(doc.file, sec->line, "tlb_capacity must be > 0");
    if (mmu.asid_bits < 1 || mmu.asid_bits > 32)
      throw SemanticError(doc.file, sec->line, "asid_bits must be in 1..32");
  } else {
    throw SchemaError(doc.file, kind.line, "unknown mmu kind `" + kind.value + "`");
  }
  return mmu;
}

std::vector<MemoryBlockRequirement> parse_blocks(const Document& doc,
                                                 const SystemMemoryMap& map) {
  std::vector<MemoryBlockRequirement> blocks;
  for (const auto& sec : doc.sections) {
    if (sec.name != "block")
      throw SchemaError(doc.file, sec.line, "unknown section [" + sec.name + "] in requirements");
    reject_unknown_keys(doc, sec,
                        {"owner", "name", "virtual_address", "physical_address", "size",
                         "permissions", "cache_policy", "alignment", "physically_contiguous",
                         "shared_with"});
    MemoryBlockRequirement b;
    b.source_line = sec.line;
    b.owner = parse_owner(doc, require_key(doc, sec, "owner"));
    const auto& name = require_key(doc, sec, "name");
    if (!valid_name(name.value))
      throw SchemaError(doc.file, name.line, "bad block name `" + name.value + "`");
    b.logical_name = name.value;
    if (const auto* e = sec.find("virtual_address")) b.virtual_address = parse_int(doc, *e);
    if (const auto* e = sec.find("physical_address")) b.physical_address = parse_int(doc, *e);
    b.size = parse_int(doc, require_key(doc, sec, "size"));
    const auto& perms = require_key(doc, sec, "permissions");
    auto p = permissions_from_string(perms.value);
    if (!p) throw SchemaError(doc.file, perms.line, "bad permissions `" + perms.value + "`");
    b.permissions = *p;
    const auto& cp = require_key(doc, sec, "cache_policy");
    auto c = cache_policy_from_string(cp.value);
    if (!c) throw SchemaError(doc.file, cp.line, "unknown cache policy `" + cp.value + "`");
    b.cache_policy = *c;
    if (const auto* e = sec.find("alignment")) b.alignment = parse_int(doc, *e);
    if (const auto* e = sec.find("physically_contiguous"))
      b.physically_contiguous = parse_bool(doc, *e);
    if (const auto* e = sec.find("shared_with")) {
      for (const auto& tok : split_list(e->value)) {
        auto o = owner_from_string(tok);
        if (!o) throw SchemaError(doc.file, e->line, "bad shared_with owner `" + tok + "`");
        if (*o == b.owner)
          throw SemanticError(doc.file, e->line, "block cannot be shared with its own owner");
        if (std::find(b.shared_with.begin(), b.shared_with.end(), *o) != b.shared_with.end())
          throw SemanticError(doc.file, e->line, "duplicate shared_with owner `" + tok + "`");
        b.shared_with.push_back(*o);
      }
    }

    // Type invariants, enforced with file/line context.
    if (b.size == 0) throw SemanticError(doc.file, sec.line, "block size must be > 0");
    if (!b.permissions.any())
      throw SemanticError(doc.file, perms.line, "at least one permission bit must be set");
    if (!b.permissions.user_implies_kernel())
      throw SemanticError(doc.file, perms.line,
                          "user permissions require the matching kernel permissions");
    if (b.alignment && !is_pow2(*b.alignment))
      throw SemanticError(doc.file, sec.line, "alignment must be a power of two");
    Size unit = map.min_page_size;
    if (b.alignment) unit = std::max(unit, *b.alignment);
    if (b.virtual_address) {
      if (*b.virtual_address % map.min_page_size != 0 ||
          (b.alignment && *b.virtual_address % *b.alignment != 0))
        throw SemanticError(doc.file, sec.line,
                            "virtual_address " + hex(*b.virtual_address) +
                                " is not a multiple of " + format_size(unit));
      if (*b.virtual_address + b.size < *b.virtual_address)
        throw SemanticError(doc.file, sec.line, "virtual range wraps the address space");
    }
    if (b.physical_address) {
      if (*b.physical_address % map.min_page_size != 0 ||
          (b.alignment && *b.physical_address % *b.alignment != 0))
        throw SemanticError(doc.file, sec.line,
                            "physical_address " + hex(*b.physical_address) +
                                " is not a multiple of " + format_size(unit));
      if (*b.physical_address + b.size < *b.physical_address)
        throw SemanticError(doc.file, sec.line, "physical range wraps the address space");
    }
    for (const auto& prev : blocks) {
      if (prev.owner == b.owner && prev.logical_name == b.logical_name)
        throw SemanticError(doc.file, sec.line,
                            "duplicate block `" + b.logical_name + "` for " +
                                to_string(b.owner));
    }
    blocks.push_back(std::move(b));
  }
  return blocks;
}

}  // namespace

Project parse_project(const std::string& requirements_text, const std::string& memmap_text,
                      const std::string& mmu_text, const std::string& requirements_file,
                      const std::string& memmap_file, const std::string& mmu_file) {
  Project p;
  p.memmap = parse_memmap(parse_document(memmap_file, memmap_text));
  p.mmu = parse_mmu(parse_document(mmu_file, mmu_text));
  p.blocks = parse_blocks(parse_document(requirements_file, requirements_text), p.memmap);
  return p;
}

Project parse_project_files(const std::string& requirements_path, const std::string& memmap_path,
                            const std::string& mmu_path) {
  return parse_project(read_file(requirements_path), read_file(memmap_path),
                       read_file(mmu_path), requirements_path, memmap_path, mmu_path);
}

namespace {

struct VRange {
  Addr base;
  Size size;
  const MemoryBlockRequirement* block;
};

bool ranges_overlap(Addr a, Size as, Addr b, Size bs) {
  return a < b + bs && b < a + as;
}

// True when [base, base+size) is covered by the union of map regions.
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

void check_virtual_overlaps(const std::vector<const MemoryBlockRequirement*>& space,
                            const std::string& space_key, VerificationReport& report,
                            bool include_kernel_pairs) {
  for (std::size_t i = 0; i < space.size(); ++i) {
    for (std::size_t j = i + 1; j < space.size(); ++j) {
      const auto* a = space[i];
      const auto* b = space[j];
      if (a->owner.is_kernel() && b->owner.is_kernel() && !include_kernel_pairs)
        continue;  // reported once, in the kernel space pass
      if (!a->virtual_address || !b->virtual_address) continue;
      if (ranges_overlap(*a->virtual_address, a->size, *b->virtual_address, b->size)) {
        report.add(Severity::Error, "VIRTUAL_OVERLAP", space_key,
                   a->logical_name + "+" + b->logical_name,
                   to_string(a->owner) + "/" + a->logical_name + " at " +
                       hex(*a->virtual_address) + " overlaps " + to_string(b->owner) + "/" +
                       b->logical_name + " at " + hex(*b->virtual_address) + " in space " +
                       space_key);
      }
    }
  }
}

}  // namespace

VerificationReport validate_requirements(const std::vector<MemoryBlockRequirement>& reqs,
                                         const SystemMemoryMap& map, const MmuModel& mmu,
                                         const ValidateOptions& opts) {
  (void)mmu;
  VerificationReport report;
  std::set<std::string> known_owner_keys{"kernel"};
  for (const auto& b : reqs)
    if (!b.owner.is_kernel()) known_owner_keys.insert(b.owner.partition_name);

  for (const auto& b : reqs) {
    const std::string owner = b.owner.key();
    if (b.size == 0)
      report.add(Severity::Error, "ZERO_SIZE", owner, b.logical_name, "block has zero size");
    if (b.alignment && !is_pow2(*b.alignment))
      report.add(Severity::Error, "BAD_ALIGNMENT", owner, b.logical_name,
                 "alignment " + std::to_string(*b.alignment) + " is not a power of two");
    if (!b.permissions.any())
      report.add(Severity::Error, "PERM_EMPTY", owner, b.logical_name,
                 "no permission bits set");
    if (!b.permissions.user_implies_kernel())
      report.add(Severity::Error, "PERM_USER_NOT_KERNEL", owner, b.logical_name,
                 "user permission without the matching kernel permission");
    if (opts.strict_wx) {
      bool w = b.permissions.user_write || b.permissions.kernel_write;
      bool x = b.permissions.user_exec || b.permissions.kernel_exec;
      if (w && x)
        report.add(Severity::Error, "WX_VIOLATION", owner, b.logical_name,
                   "block is both writable and executable (strict W^X mode)");
    }
    Size align_unit = map.min_page_size;
    if (b.alignment && is_pow2(*b.alignment)) align_unit = std::max(align_unit, *b.alignment);
    if (b.virtual_address && *b.virtual_address % align_unit != 0)
      report.add(Severity::Error, "MISALIGNED_ADDRESS", owner, b.logical_name,
                 "virtual_address " + hex(*b.virtual_address) + " is not a multiple of " +
                     format_size(align_unit));
    if (b.physical_address && *b.physical_address % align_unit != 0)
      report.add(Severity::Error, "MISALIGNED_ADDRESS", owner, b.logical_name,
                 "physical_address " + hex(*b.physical_address) + " is not a multiple of " +
                     format_size(align_unit));
    if (b.physical_address && b.size > 0 && !covered_by_map(map, *b.physical_address, b.size))
      report.add(Severity::Error, "OUT_OF_MAP", owner, b.logical_name,
                 "physical range [" + hex(*b.physical_address) + ", " +
                     hex(*b.physical_address + b.size) + ") lies outside the memory map");
    for (const auto& o : b.shared_with) {
      if (!known_owner_keys.count(o.key()))
        report.add(Severity::Error, "UNKNOWN_OWNER", owner, b.logical_name,
                   "shared_with names unknown owner " + to_string(o));
    }
  }

  // Virtual overlaps among fixed-address blocks, per address space: the kernel
  // space holds all kernel blocks; each partition space holds its own blocks
  // plus every kernel block.
  std::vector<const MemoryBlockRequirement*> kernel_blocks;
  for (const auto& b : reqs)
    if (b.owner.is_kernel()) kernel_blocks.push_back(&b);
  check_virtual_overlaps(kernel_blocks, "kernel", report, true);
  for (const auto& part : partitions_of(reqs)) {
    std::vector<const MemoryBlockRequirement*> space = kernel_blocks;
    for (const auto& b : reqs)
      if (b.owner == part) space.push_back(&b);
    check_virtual_overlaps(space, part.key(), report, false);
  }

  report.sort();
  return report;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << contents;
  if (!out.flush()) throw Error(ErrorCode::Io, "failed writing " + path);
}

}  // namespace memlayout
