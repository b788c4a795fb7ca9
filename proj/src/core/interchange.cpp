#include "core/interchange.hpp"

#include "core/error.hpp"

namespace memlayout {

namespace {

constexpr int kLayoutVersion = 1;

[[noreturn]] void fail(const std::string& what) {
  throw FormatError("interchange: " + what);
}

const Json& field(const Json& j, const std::string& key) {
  auto it = j.find(key);
  if (it == j.end()) fail("missing field `" + key + "`");
  return *it;
}

std::uint64_t uint_field(const Json& j, const std::string& key) {
  const Json& v = field(j, key);
  if (!v.is_number_unsigned()) fail("field `" + key + "` must be an unsigned integer");
  return v.get<std::uint64_t>();
}

std::string str_field(const Json& j, const std::string& key) {
  const Json& v = field(j, key);
  if (!v.is_string()) fail("field `" + key + "` must be a string");
  return v.get<std::string>();
}

}  // namespace

Json addr_json(Addr v) { return hex(v); }

Addr addr_from_json(const Json& j, const std::string& what) {
  if (!j.is_string()) fail(what + ": expected a hex string");
  const std::string s = j.get<std::string>();
  if (s.size() < 3 || s[0] != '0' || (s[1] != 'x' && s[1] != 'X'))
    fail(what + ": expected 0x-prefixed hex, got `" + s + "`");
  Addr out = 0;
  for (std::size_t i = 2; i < s.size(); ++i) {
    char c = static_cast<char>(::tolower(s[i]));
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else
      fail(what + ": bad hex digit in `" + s + "`");
    if (out >> 60) fail(what + ": value exceeds 64 bits");
    out = (out << 4) | static_cast<Addr>(d);
  }
  return out;
}

Json to_json(const Permissions& p) { return to_string(p); }

Permissions permissions_from_json(const Json& j) {
  if (!j.is_string()) fail("permissions: expected a string");
  auto p = permissions_from_string(j.get<std::string>());
  if (!p) fail("permissions: bad value `" + j.get<std::string>() + "`");
  return *p;
}

Json to_json(const Owner& o) { return to_string(o); }

Owner owner_from_json(const Json& j) {
  if (!j.is_string()) fail("owner: expected a string");
  auto o = owner_from_string(j.get<std::string>());
  if (!o) fail("owner: bad value `" + j.get<std::string>() + "`");
  return *o;
}

Json to_json(const PhysicalRegion& r) {
  Json j;
  if (!r.name.empty()) j["name"] = r.name;
  j["base"] = addr_json(r.base);
  j["size"] = addr_json(r.size);
  j["class"] = to_string(r.region_class);
  j["access_cost"] = r.access_cost;
  return j;
}

PhysicalRegion region_from_json(const Json& j) {
  PhysicalRegion r;
  if (j.contains("name")) r.name = str_field(j, "name");
  r.base = addr_from_json(field(j, "base"), "region base");
  r.size = addr_from_json(field(j, "size"), "region size");
  auto c = region_class_from_string(str_field(j, "class"));
  if (!c) fail("region class `" + str_field(j, "class") + "`");
  r.region_class = *c;
  r.access_cost = static_cast<std::uint32_t>(uint_field(j, "access_cost"));
  return r;
}

Json to_json(const SystemMemoryMap& m) {
  Json j;
  j["min_page_size"] = addr_json(m.min_page_size);
  Json regions = Json::array();
  for (const auto& r : m.regions) regions.push_back(to_json(r));
  j["regions"] = std::move(regions);
  return j;
}

SystemMemoryMap memmap_from_json(const Json& j) {
  SystemMemoryMap m;
  m.min_page_size = addr_from_json(field(j, "min_page_size"), "min_page_size");
  m.regions.clear();
  for (const auto& r : field(j, "regions")) m.regions.push_back(region_from_json(r));
  return m;
}

Json to_json(const PageTableGeometry& g) {
  Json j;
  j["page_size"] = addr_json(g.page_size);
  j["levels"] = g.levels;
  j["index_bits"] = g.index_bits;
  j["large_page_levels"] = g.large_page_levels;
  return j;
}

PageTableGeometry geometry_from_json(const Json& j) {
  PageTableGeometry g;
  g.page_size = addr_from_json(field(j, "page_size"), "page_size");
  g.levels = static_cast<unsigned>(uint_field(j, "levels"));
  g.index_bits = field(j, "index_bits").get<std::vector<unsigned>>();
  g.large_page_levels = field(j, "large_page_levels").get<std::vector<unsigned>>();
  return g;
}

Json to_json(const MmuModel& m) {
  Json j;
  if (m.is_tlb()) {
    j["kind"] = "tlb_fixed";
    j["entry_count"] = m.entry_count;
    j["min_entry_size"] = addr_json(m.min_entry_size);
    j["max_entry_size"] = addr_json(m.max_entry_size);
    if (m.set_associative) {
      Json sa;
      sa["ways"] = m.set_associative->ways;
      sa["sets"] = m.set_associative->sets;
      sa["index_hook"] = m.set_associative->index_hook_id;
      j["associativity"] = std::move(sa);
    } else {
      j["associativity"] = "full";
    }
    j["pid_bits"] = m.pid_bits;
  } else {
    j["kind"] = "page_table";
    j["geometry"] = to_json(m.geometry);
    j["tlb_capacity"] = m.tlb_capacity;
    j["asid_bits"] = m.asid_bits;
    j["has_global_bit"] = m.has_global_bit;
  }
  return j;
}

MmuModel mmu_from_json(const Json& j) {
  MmuModel m;
  const std::string kind = str_field(j, "kind");
  if (kind == "tlb_fixed") {
    m.kind = MmuModel::Kind::TlbFixed;
    m.entry_count = static_cast<unsigned>(uint_field(j, "entry_count"));
    m.min_entry_size = addr_from_json(field(j, "min_entry_size"), "min_entry_size");
    m.max_entry_size = addr_from_json(field(j, "max_entry_size"), "max_entry_size");
    const Json& sa = field(j, "associativity");
    if (sa.is_object()) {
      SetAssociativity s;
      s.ways = static_cast<unsigned>(uint_field(sa, "ways"));
      s.sets = static_cast<unsigned>(uint_field(sa, "sets"));
      s.index_hook_id = str_field(sa, "index_hook");
      m.set_associative = s;
    }
    m.pid_bits = static_cast<unsigned>(uint_field(j, "pid_bits"));
  } else if (kind == "page_table") {
    m.kind = MmuModel::Kind::PageTable;
    m.geometry = geometry_from_json(field(j, "geometry"));
    m.tlb_capacity = static_cast<unsigned>(uint_field(j, "tlb_capacity"));
    m.asid_bits = static_cast<unsigned>(uint_field(j, "asid_bits"));
    m.has_global_bit = field(j, "has_global_bit").get<bool>();
  } else {
    fail("mmu kind `" + kind + "`");
  }
  return m;
}

Json to_json(const MemoryBlockRequirement& b) {
  Json j;
  j["owner"] = to_json(b.owner);
  j["name"] = b.logical_name;
  if (b.virtual_address) j["virtual_address"] = addr_json(*b.virtual_address);
  if (b.physical_address) j["physical_address"] = addr_json(*b.physical_address);
  j["size"] = addr_json(b.size);
  j["permissions"] = to_json(b.permissions);
  j["cache_policy"] = to_string(b.cache_policy);
  if (b.alignment) j["alignment"] = addr_json(*b.alignment);
  j["physically_contiguous"] = b.physically_contiguous;
  Json shared = Json::array();
  for (const auto& o : b.shared_with) shared.push_back(to_json(o));
  j["shared_with"] = std::move(shared);
  return j;
}

MemoryBlockRequirement requirement_from_json(const Json& j) {
  MemoryBlockRequirement b;
  b.owner = owner_from_json(field(j, "owner"));
  b.logical_name = str_field(j, "name");
  if (j.contains("virtual_address"))
    b.virtual_address = addr_from_json(j["virtual_address"], "virtual_address");
  if (j.contains("physical_address"))
    b.physical_address = addr_from_json(j["physical_address"], "physical_address");
  b.size = addr_from_json(field(j, "size"), "size");
  b.permissions = permissions_from_json(field(j, "permissions"));
  auto c = cache_policy_from_string(str_field(j, "cache_policy"));
  if (!c) fail("cache policy `" + str_field(j, "cache_policy") + "`");
  b.cache_policy = *c;
  if (j.contains("alignment")) b.alignment = addr_from_json(j["alignment"], "alignment");
  b.physically_contiguous = field(j, "physically_contiguous").get<bool>();
  for (const auto& o : field(j, "shared_with")) b.shared_with.push_back(owner_from_json(o));
  return b;
}

Json to_json(const ResolvedBlock& b) {
  Json j;
  j["owner"] = to_json(b.owner);
  j["name"] = b.logical_name;
  j["virtual_address"] = addr_json(b.virtual_address);
  j["physical_address"] = addr_json(b.physical_address);
  j["size"] = addr_json(b.size);
  j["permissions"] = to_json(b.permissions);
  j["cache_policy"] = to_string(b.cache_policy);
  j["alignment"] = addr_json(b.alignment);
  j["physically_contiguous"] = b.physically_contiguous;
  Json shared = Json::array();
  for (const auto& o : b.shared_with) shared.push_back(to_json(o));
  j["shared_with"] = std::move(shared);
  j["region_class"] = to_string(b.region_class);
  return j;
}

ResolvedBlock resolved_block_from_json(const Json& j) {
  ResolvedBlock b;
  b.owner = owner_from_json(field(j, "owner"));
  b.logical_name = str_field(j, "name");
  b.virtual_address = addr_from_json(field(j, "virtual_address"), "virtual_address");
  b.physical_address = addr_from_json(field(j, "physical_address"), "physical_address");
  b.size = addr_from_json(field(j, "size"), "size");
  b.permissions = permissions_from_json(field(j, "permissions"));
  auto c = cache_policy_from_string(str_field(j, "cache_policy"));
  if (!c) fail("cache policy `" + str_field(j, "cache_policy") + "`");
  b.cache_policy = *c;
  b.alignment = addr_from_json(field(j, "alignment"), "alignment");
  b.physically_contiguous = field(j, "physically_contiguous").get<bool>();
  for (const auto& o : field(j, "shared_with")) b.shared_with.push_back(owner_from_json(o));
  auto rc = region_class_from_string(str_field(j, "region_class"));
  if (!rc) fail("region class `" + str_field(j, "region_class") + "`");
  b.region_class = *rc;
  return b;
}

Json to_json(const MemoryLayout& l) {
  Json j;
  j["format"] = "memlayout/layout";
  j["version"] = kLayoutVersion;
  j["memory_map"] = to_json(l.memmap);
  j["mmu"] = to_json(l.mmu);
  Json blocks = Json::array();
  for (const auto& b : l.blocks) blocks.push_back(to_json(b));
  j["blocks"] = std::move(blocks);
  Json plans = Json::array();
  for (const auto& p : l.plans) {
    Json pj;
    pj["space"] = p.space.key() == "kernel" ? Json("kernel") : to_json(p.space);
    Json entries = Json::array();
    for (const auto& e : p.entries) {
      Json ej;
      ej["owner"] = to_json(l.blocks[e.block].owner);
      ej["name"] = l.blocks[e.block].logical_name;
      ej["virtual_address"] = addr_json(e.virtual_address);
      entries.push_back(std::move(ej));
    }
    pj["entries"] = std::move(entries);
    plans.push_back(std::move(pj));
  }
  j["plans"] = std::move(plans);
  return j;
}

MemoryLayout layout_from_json(const Json& j) {
  if (!j.is_object() || str_field(j, "format") != "memlayout/layout")
    fail("not a memory layout document");
  if (uint_field(j, "version") != kLayoutVersion)
    fail("unsupported layout version " + field(j, "version").dump());
  MemoryLayout l;
  l.memmap = memmap_from_json(field(j, "memory_map"));
  l.mmu = mmu_from_json(field(j, "mmu"));
  for (const auto& b : field(j, "blocks")) l.blocks.push_back(resolved_block_from_json(b));
  for (const auto& pj : field(j, "plans")) {
    AddressSpacePlan plan;
    const Json& space = field(pj, "space");
    plan.space = space.is_string() && space.get<std::string>() == "kernel"
                     ? Owner::kernel()
                     : owner_from_json(space);
    for (const auto& ej : field(pj, "entries")) {
      Owner owner = owner_from_json(field(ej, "owner"));
      std::string name = str_field(ej, "name");
      std::size_t idx = l.blocks.size();
      for (std::size_t i = 0; i < l.blocks.size(); ++i)
        if (l.blocks[i].owner == owner && l.blocks[i].logical_name == name) idx = i;
      if (idx == l.blocks.size()) fail("plan entry names unknown block " + name);
      plan.entries.push_back(
          PlanEntry{idx, addr_from_json(field(ej, "virtual_address"), "entry vaddr")});
    }
    l.plans.push_back(std::move(plan));
  }
  return l;
}

Json to_json(const VerificationReport& r) {
  Json j;
  j["format"] = "memlayout/report";
  j["version"] = 1;
  j["passed"] = r.passed();
  Json findings = Json::array();
  for (const auto& f : r.findings()) {
    Json fj;
    fj["severity"] = to_string(f.severity);
    fj["code"] = f.code;
    fj["owner"] = f.owner;
    fj["subject"] = f.subject;
    fj["message"] = f.message;
    findings.push_back(std::move(fj));
  }
  j["findings"] = std::move(findings);
  return j;
}

VerificationReport report_from_json(const Json& j) {
  if (!j.is_object() || str_field(j, "format") != "memlayout/report")
    fail("not a report document");
  VerificationReport r;
  for (const auto& fj : field(j, "findings")) {
    Severity sev = Severity::Error;
    const std::string s = str_field(fj, "severity");
    if (s == "WARN") sev = Severity::Warn;
    else if (s == "INFO") sev = Severity::Info;
    else if (s != "ERROR") fail("bad severity `" + s + "`");
    r.add(sev, str_field(fj, "code"), str_field(fj, "owner"), str_field(fj, "subject"),
          str_field(fj, "message"));
  }
  return r;
}

std::string layout_to_string(const MemoryLayout& l) { return to_json(l).dump(2) + "\n"; }

MemoryLayout layout_from_string(const std::string& text) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) fail("layout file is not valid JSON");
  return layout_from_json(j);
}

std::string report_to_string(const VerificationReport& r) { return to_json(r).dump(2) + "\n"; }

}  // namespace memlayout
