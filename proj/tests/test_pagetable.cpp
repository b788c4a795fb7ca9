#include <doctest.h>

#include <random>

#include "core/error.hpp"
#include "core/project.hpp"
#include "layout/layout.hpp"
#include "pagetable/pagetable.hpp"
#include "support/gen.hpp"
#include "support/oracles.hpp"
#include "support/samples.hpp"
#include "verify/static_verify.hpp"

using namespace memlayout;
using namespace memlayout::testing;

namespace {

Project pt_project() { return parse_project(kPtRequirements, kPtMemmap, kPtMmu); }

MemoryLayout pt_layout() {
  Project p = pt_project();
  return plan_layout(p.blocks, p.memmap, p.mmu);
}

MemoryLayout layout_for(const char* reqs) {
  Project p = parse_project(reqs, kPtMemmap, kPtMmu);
  return plan_layout(p.blocks, p.memmap, p.mmu);
}

}  // namespace

TEST_CASE("an aligned 2M block consolidates into one level-3 leaf") {
  const char* reqs = R"(
[block]
owner = kernel
name = big
size = 2M
alignment = 2M
permissions = kr+kw
cache_policy = normal
)";
  MemoryLayout l = layout_for(reqs);
  PageTableSet set = build_page_tables(l);
  REQUIRE(set.images.size() == 1);
  CHECK(set.images[0].page_count == 1);
  auto mappings = decode_page_tables(set.images[0], l.mmu.geometry);
  REQUIRE(mappings.size() == 1);
  CHECK(mappings[0].size == mib(2));
  CHECK(mappings[0].global);
  CHECK(min_leaf_cover(mappings[0].virtual_base, mappings[0].physical_base, mib(2),
                       l.mmu.geometry) == 1);
}

TEST_CASE("a single page needs one table per level") {
  const char* reqs = R"(
[block]
owner = kernel
name = one
size = 4K
permissions = kr
cache_policy = normal
)";
  MemoryLayout l = layout_for(reqs);
  PageTableSet set = build_page_tables(l);
  REQUIRE(set.images.size() == 1);
  CHECK(set.images[0].page_count == 1);
  // Four 4K tables on the path, nothing else.
  CHECK(set.images[0].bytes->size() == 4 * kib(4));
  auto mappings = decode_page_tables(set.images[0], l.mmu.geometry);
  REQUIRE(mappings.size() == 1);
  CHECK(mappings[0].size == kib(4));
}

TEST_CASE("three partitions get asids 1, 2, 3 and a global kernel") {
  const char* reqs = R"(
[block]
owner = kernel
name = text
size = 16K
permissions = kr+kx
cache_policy = normal

[block]
owner = partition:A
name = text
size = 8K
permissions = ur+ux+kr+kx
cache_policy = normal

[block]
owner = partition:B
name = text
size = 8K
permissions = ur+ux+kr+kx
cache_policy = normal

[block]
owner = partition:C
name = text
size = 8K
permissions = ur+ux+kr+kx
cache_policy = normal
)";
  MemoryLayout l = layout_for(reqs);
  PageTableSet set = build_page_tables(l);
  CHECK(set.asid_plan.kernel_global);
  REQUIRE(set.asid_plan.partition_asids.size() == 3);
  for (unsigned i = 0; i < 3; ++i) CHECK(set.asid_plan.partition_asids[i].second == i + 1);
  REQUIRE(set.images.size() == 4);
  CHECK(set.images[0].asid == 0);
}

TEST_CASE("tables land in internal RAM when it exists and fits") {
  MemoryLayout l = pt_layout();
  PageTableSet set = build_page_tables(l);
  const PhysicalRegion* sram = nullptr;
  for (const auto& r : l.memmap.regions)
    if (r.region_class == RegionClass::InternalRam) sram = &r;
  REQUIRE(sram);
  for (const auto& img : set.images) {
    CHECK(img.table_region == RegionClass::InternalRam);
    CHECK(img.image_base >= sram->base);
    CHECK(img.image_base + img.bytes->size() <= sram->end());
  }
}

TEST_CASE("page counts are minimal against the merge-up oracle") {
  std::mt19937_64 rng(base_seed() + 900);
  PageTableGeometry g;
  g.page_size = kib(4);
  g.levels = 4;
  g.index_bits = {9, 9, 9, 9};
  g.large_page_levels = {2, 3};
  for (int iter = 0; iter < 200; ++iter) {
    Size pages = std::uniform_int_distribution<Size>(1, 64)(rng);
    Addr v = kib(4) * std::uniform_int_distribution<Addr>(0, 4096)(rng);
    Addr p = kib(4) * std::uniform_int_distribution<Addr>(0, 4096)(rng);
    CHECK(leaf_count(v, p, pages * kib(4), g) == min_leaf_cover(v, p, pages * kib(4), g));
  }
}

TEST_CASE("build/decode round trip matches the plan for random projects") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    GenOptions opts;
    opts.tlb = false;
    Project p = random_project(base_seed() + 1000 + seed, opts);
    MemoryLayout l = plan_layout(p.blocks, p.memmap, p.mmu);
    PageTableSet set = build_page_tables(l);
    for (const auto& img : set.images) {
      const AddressSpacePlan* plan = l.find_plan(img.space);
      REQUIRE(plan);
      std::vector<MappingInterval> actual;
      for (const auto& m : decode_page_tables(img, l.mmu.geometry)) {
        MappingInterval mi;
        mi.v0 = m.virtual_base;
        mi.v1 = m.virtual_base + m.size;
        mi.attr.phys = m.physical_base;
        mi.attr.perms = m.permissions;
        mi.attr.cache = m.cache_policy;
        mi.attr.global = m.global;
        actual.push_back(mi);
      }
      auto expected = expected_intervals(l, *plan);
      for (auto& m : expected) m.attr.tag = 0;
      CompareFlags flags;
      flags.tag = false;
      CHECK(mappings_equal(expected, actual, flags));
    }
  }
}

TEST_CASE("kernel subtree is shared by reference across partition images") {
  MemoryLayout l = pt_layout();
  PageTableSet set = build_page_tables(l);
  // All images view the same arena; kernel mappings decode bit-identically.
  for (const auto& img : set.images) CHECK(img.bytes == set.images[0].bytes);
  auto kernel_mappings = decode_page_tables(set.images[0], l.mmu.geometry);
  for (std::size_t i = 1; i < set.images.size(); ++i) {
    auto part = decode_page_tables(set.images[i], l.mmu.geometry);
    for (const auto& km : kernel_mappings) {
      bool found = false;
      for (const auto& m : part) found = found || m == km;
      CHECK(found);
    }
  }
}

TEST_CASE("warm-up lists cover exactly the partition pages") {
  MemoryLayout l = pt_layout();
  PageTableSet set = build_page_tables(l);
  auto warmups = generate_warmup(l, set);
  REQUIRE(warmups.size() == set.images.size());
  // Kernel global: kernel list is empty.
  CHECK(warmups[0].space.is_kernel());
  CHECK(warmups[0].entries.empty());
  for (std::size_t i = 1; i < warmups.size(); ++i) {
    CHECK(warmups[i].entries.size() == set.images[i].page_count);
    for (const auto& e : warmups[i].entries) {
      CHECK(e.vaddr % l.mmu.geometry.page_size == 0);
      CHECK(e.readable);
    }
  }
  // The 2M block contributes a single warm-up address.
  const AddressSpacePlan* p2 = l.find_plan(Owner::partition("P2"));
  REQUIRE(p2);
  unsigned p2_idx = l.space_id(Owner::partition("P2"));
  std::size_t big_pages = 0;
  for (const auto& e : warmups[p2_idx].entries) {
    for (const auto& pe : p2->entries) {
      const ResolvedBlock& rb = l.block_of(pe);
      if (rb.logical_name == "big" && e.vaddr >= pe.virtual_address &&
          e.vaddr < pe.virtual_address + rb.size)
        ++big_pages;
    }
  }
  CHECK(big_pages == 1);
}

TEST_CASE("non-readable pages are flagged in warm-up lists") {
  const char* reqs = R"(
[block]
owner = partition:A
name = xonly
size = 8K
permissions = ur+ux+kr+kx
cache_policy = normal

[block]
owner = partition:A
name = wonly
size = 4K
permissions = kw
cache_policy = normal
)";
  MemoryLayout l = layout_for(reqs);
  PageTableSet set = build_page_tables(l);
  auto warmups = generate_warmup(l, set);
  const WarmupList* a = nullptr;
  for (const auto& w : warmups)
    if (!w.space.is_kernel()) a = &w;
  REQUIRE(a);
  std::size_t unreadable = 0;
  for (const auto& e : a->entries)
    if (!e.readable) ++unreadable;
  CHECK(unreadable == 1);  // the kw-only page
  CHECK(feasibility_check(l).has("WARMUP_UNREACHABLE"));
}

TEST_CASE("zero-miss budget passes at the exact boundary") {
  // kernel 40 pages + partition 472 pages = 512 == capacity.
  std::string reqs = R"(
[block]
owner = kernel
name = k
size = 160K
permissions = kr+kw
cache_policy = normal

[block]
owner = partition:A
name = big
size = 1888K
permissions = ur+uw+kr+kw
cache_policy = normal
)";
  MemoryLayout l = layout_for(reqs.c_str());
  CHECK(zero_miss_budget(l).passed());
  // One more page tips it over.
  std::string more = reqs;
  more.replace(more.find("1888K"), 5, "1892K");
  MemoryLayout over = layout_for(more.c_str());
  auto report = zero_miss_budget(over);
  CHECK_FALSE(report.passed());
  CHECK(report.has("ZERO_MISS_UNACHIEVABLE"));
}

TEST_CASE("decode rejects a descriptor pointing outside the image") {
  MemoryLayout l = pt_layout();
  PageTableSet set = build_page_tables(l);
  auto corrupt = std::make_shared<std::vector<std::uint8_t>>(*set.images[0].bytes);
  // Point the first valid root descriptor far outside the arena.
  for (std::size_t off = 0; off + 8 <= corrupt->size(); off += 8) {
    std::uint64_t d = 0;
    for (int b = 0; b < 8; ++b) d |= std::uint64_t((*corrupt)[off + b]) << (8 * b);
    if ((d & desc::kValid) && (d & desc::kTable)) {
      d = (d & ~desc::kAddrMask) | (Addr{0x40000000} & desc::kAddrMask);
      for (int b = 0; b < 8; ++b)
        (*corrupt)[off + b] = static_cast<std::uint8_t>((d >> (8 * b)) & 0xFF);
      break;
    }
  }
  PageTableImage img = set.images[0];
  img.bytes = corrupt;
  CHECK_THROWS_AS(decode_page_tables(img, l.mmu.geometry), MalformedImageError);
}

TEST_CASE("empty address space decodes to an empty mapping list") {
  const char* reqs = R"(
[block]
owner = partition:A
name = text
size = 8K
permissions = ur+ux+kr+kx
cache_policy = normal
)";
  MemoryLayout l = layout_for(reqs);
  PageTableSet set = build_page_tables(l);
  // The kernel owns nothing here.
  CHECK(decode_page_tables(set.images[0], l.mmu.geometry).empty());
  CHECK(set.images[0].page_count == 0);
}

TEST_CASE("MLPT artifact round trip and corruption handling") {
  MemoryLayout l = pt_layout();
  PageTableSet set = build_page_tables(l);
  auto warmups = generate_warmup(l, set);
  auto bytes = write_mlpt(set, warmups, l);
  MlptArtifact art = read_mlpt(bytes);
  CHECK(art.geometry == l.mmu.geometry);
  CHECK(art.kernel_global == set.asid_plan.kernel_global);
  REQUIRE(art.spaces.size() == set.images.size());
  for (std::size_t i = 0; i < art.spaces.size(); ++i) {
    CHECK(*art.spaces[i].bytes == *set.images[i].bytes);
    CHECK(art.spaces[i].image_base == set.images[i].image_base);
    CHECK(art.spaces[i].asid == set.images[i].asid);
  }

  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  CHECK_THROWS_AS(read_mlpt(truncated), FormatError);
  auto wrong_version = bytes;
  wrong_version[4] = 9;
  CHECK_THROWS_AS(read_mlpt(wrong_version), FormatError);
}

TEST_CASE("asid exhaustion is an infeasibility") {
  std::string reqs;
  for (int i = 0; i < 4; ++i) {
    reqs += "[block]\nowner = partition:P" + std::to_string(i) +
            "\nname = t\nsize = 4K\npermissions = ur+kr\ncache_policy = normal\n\n";
  }
  Project p = parse_project(reqs.c_str(), kPtMemmap, kPtMmu);
  p.mmu.asid_bits = 2;  // ids 1..3 only
  MemoryLayout l = plan_layout(p.blocks, p.memmap, p.mmu);
  CHECK_THROWS_AS(build_page_tables(l), InfeasibleError);
}
