#include <doctest.h>

#include "config/mmu_config.hpp"
#include "core/error.hpp"
#include "core/project.hpp"
#include "layout/layout.hpp"
#include "pagetable/leaves.hpp"
#include "sim/trace.hpp"
#include "support/gen.hpp"
#include "support/samples.hpp"
#include "tlb/decompose.hpp"

using namespace memlayout;
using namespace memlayout::testing;

namespace {

struct Pipeline {
  Project project;
  MemoryLayout layout;
  MmuConfig config;
};

Pipeline run_pipeline(const char* reqs, const char* map, const char* mmu) {
  Pipeline p;
  p.project = parse_project(reqs, map, mmu);
  p.layout = plan_layout(p.project.blocks, p.project.memmap, p.project.mmu);
  p.config = generate_config(p.layout).config;
  return p;
}

// 2 kernel blocks + 20 partition pages: a 22-entry sequence.
std::string sequence22_reqs() {
  std::string reqs = R"(
[block]
owner = kernel
name = text
size = 4K
permissions = kr+kx
cache_policy = normal

[block]
owner = kernel
name = data
size = 4K
permissions = kr+kw
cache_policy = normal
)";
  for (int i = 0; i < 20; ++i)
    reqs += "\n[block]\nowner = partition:P1\nname = pool" + std::to_string(i) +
            "\nsize = 4K\npermissions = ur+kr\ncache_policy = normal\n";
  return reqs;
}

const char* kMmu64 = R"(
[mmu]
kind = tlb_fixed
entry_count = 64
min_entry_size = 4K
max_entry_size = 256M
pid_bits = 14
)";

}  // namespace

TEST_CASE("switching writes the whole fixed sequence: 22 entries, 22 writes") {
  auto reqs = sequence22_reqs();
  Pipeline p = run_pipeline(reqs.c_str(), kP1010Memmap, kMmu64);
  REQUIRE(p.config.tlb_sequences.size() == 1);
  REQUIRE(p.config.tlb_sequences[0].entries.size() == 22);
  SimulatedMmu mmu(p.config, p.layout);
  CostBreakdown cost = mmu.switch_space(Owner::partition("P1"));
  CHECK(cost.tlb_writes == 22);
  CHECK(cost.walk_memory_accesses == 0);
  CHECK(cost.interrupts == 0);
  CHECK(mmu.tlb_occupancy() == 22);
}

TEST_CASE("a warm hit costs exactly one lookup") {
  Pipeline p = run_pipeline(kP1010Requirements, kP1010Memmap, kP1010Mmu);
  CostModel cm;
  SimulatedMmu mmu(p.config, p.layout, cm);
  mmu.switch_space(Owner::partition("P1"));
  const ResolvedBlock* text = nullptr;
  for (const auto& b : p.layout.blocks)
    if (!b.owner.is_kernel() && b.logical_name == "text") text = &b;
  REQUIRE(text);
  AccessOutcome out = mmu.access(AccessOp::Read, Privilege::Kernel, text->virtual_address, 4);
  CHECK(out.translated);
  CHECK(out.paddr == text->physical_address);
  CHECK(out.cost.tlb_lookups == 1);
  CHECK(out.cost.walk_memory_accesses == 0);
  CHECK(out.cost.total == cm.tlb_hit_cost);
}

TEST_CASE("fixed TLB: a miss in static mode is a NoMapping fault") {
  Pipeline p = run_pipeline(kP1010Requirements, kP1010Memmap, kP1010Mmu);
  SimulatedMmu mmu(p.config, p.layout);
  mmu.switch_space(Owner::partition("P1"));
  AccessOutcome out = mmu.access(AccessOp::Read, Privilege::Kernel, 0xDEAD0000, 4);
  CHECK_FALSE(out.translated);
  CHECK(out.fault == FaultKind::NoMapping);
  CHECK(out.cost.interrupts == 0);
}

TEST_CASE("fixed TLB: naive mode refills through an interrupt and retries") {
  Pipeline p = run_pipeline(kP1010Requirements, kP1010Memmap, kP1010Mmu);
  CostModel cm;
  SimulatedMmu mmu(p.config, p.layout, cm, SimMode::NaiveRefill);
  CostBreakdown sw = mmu.switch_space(Owner::partition("P1"));
  CHECK(sw.tlb_writes == 1);  // a single invalidation
  const ResolvedBlock& text = p.layout.blocks[0];
  AccessOutcome out = mmu.access(AccessOp::Read, Privilege::Kernel, text.virtual_address, 4);
  CHECK(out.translated);
  CHECK(out.cost.interrupts == 1);
  CHECK(out.cost.tlb_writes == 1);
  CHECK(out.cost.tlb_lookups == 2);  // miss, then the retry hit
  // Second touch is a plain hit.
  AccessOutcome again = mmu.access(AccessOp::Read, Privilege::Kernel, text.virtual_address, 4);
  CHECK(again.cost.interrupts == 0);
  CHECK(again.cost.total == cm.tlb_hit_cost);
}

TEST_CASE("page-table walk makes one access per level and is bounded by N") {
  Pipeline p = run_pipeline(kPtRequirements, kPtMemmap, kPtMmu);
  SimulatedMmu mmu(p.config, p.layout, {}, SimMode::NaiveRefill);  // no warm-up
  mmu.switch_space(Owner::partition("P1"));
  const ResolvedBlock* text = nullptr;
  for (const auto& b : p.layout.blocks)
    if (b.owner == Owner::partition("P1") && b.logical_name == "text") text = &b;
  REQUIRE(text);
  AccessOutcome cold = mmu.access(AccessOp::Read, Privilege::Kernel, text->virtual_address, 4);
  CHECK(cold.translated);
  CHECK(cold.cost.walk_memory_accesses == 4);  // four levels, 4K leaf
  AccessOutcome warm = mmu.access(AccessOp::Read, Privilege::Kernel, text->virtual_address, 4);
  CHECK(warm.cost.walk_memory_accesses == 0);
}

TEST_CASE("a large page resolves in fewer walk steps") {
  Pipeline p = run_pipeline(kPtRequirements, kPtMemmap, kPtMmu);
  SimulatedMmu mmu(p.config, p.layout, {}, SimMode::NaiveRefill);
  mmu.switch_space(Owner::partition("P2"));
  const AddressSpacePlan* plan = p.layout.find_plan(Owner::partition("P2"));
  Addr big = 0;
  for (const auto& e : plan->entries)
    if (p.layout.block_of(e).logical_name == "big") big = e.virtual_address;
  REQUIRE(big != 0);
  AccessOutcome out = mmu.access(AccessOp::Read, Privilege::Kernel, big, 4);
  CHECK(out.translated);
  CHECK(out.cost.walk_memory_accesses == 3);  // leaf at level 3
}

TEST_CASE("switch with warm-up leaves every partition page resident") {
  Pipeline p = run_pipeline(kPtRequirements, kPtMemmap, kPtMmu);
  CHECK(zero_miss_budget(p.layout).passed());
  SimulatedMmu mmu(p.config, p.layout);
  CostBreakdown sw = mmu.switch_space(Owner::partition("P1"));
  CHECK(sw.walk_memory_accesses > 0);
  const AddressSpacePlan* plan = p.layout.find_plan(Owner::partition("P1"));
  for (const auto& e : plan->entries) {
    const ResolvedBlock& rb = p.layout.block_of(e);
    if (rb.owner.is_kernel()) continue;
    for (const auto& leaf : decompose_leaves(e.virtual_address, rb.physical_address, rb.size,
                                             p.layout.mmu.geometry)) {
      AccessOutcome out =
          mmu.access(AccessOp::Read, Privilege::Kernel, leaf.virtual_base, 4);
      CHECK(out.cost.walk_memory_accesses == 0);
      CHECK(out.cost.interrupts == 0);
    }
  }
}

TEST_CASE("warm-up costs match a hand-computed two-page walk trace") {
  const char* reqs = R"(
[block]
owner = partition:A
name = two
size = 8K
permissions = ur+uw+kr+kw
cache_policy = normal
)";
  Pipeline p = run_pipeline(reqs, kPtMemmap, kPtMmu);
  SimulatedMmu mmu(p.config, p.layout);
  CostBreakdown sw = mmu.switch_space(Owner::partition("A"));
  // Two pages, four levels each, no caching between the walks in this model.
  CHECK(sw.walk_memory_accesses == 8);
  CHECK(sw.tlb_writes == 2);  // one fill per warmed page, no flush needed
}

TEST_CASE("kernel entries are global: they survive switches") {
  Pipeline p = run_pipeline(kPtRequirements, kPtMemmap, kPtMmu);
  CostModel cm;
  SimulatedMmu mmu(p.config, p.layout, cm);
  mmu.switch_space(Owner::partition("P1"));
  Addr kernel_text = p.layout.blocks[0].virtual_address;
  AccessOutcome first = mmu.access(AccessOp::Read, Privilege::Kernel, kernel_text, 4);
  CHECK(first.cost.walk_memory_accesses == 4);
  mmu.switch_space(Owner::partition("P2"));
  AccessOutcome second = mmu.access(AccessOp::Read, Privilege::Kernel, kernel_text, 4);
  CHECK(second.cost.walk_memory_accesses == 0);
  CHECK(second.cost.total == cm.tlb_hit_cost);
}

TEST_CASE("permission faults distinguish privilege from permission") {
  const char* reqs = R"(
[block]
owner = partition:A
name = ro
size = 4K
permissions = ur+kr
cache_policy = normal

[block]
owner = kernel
name = kdata
size = 4K
permissions = kr+kw
cache_policy = normal
)";
  Pipeline p = run_pipeline(reqs, kPtMemmap, kPtMmu);
  SimulatedMmu mmu(p.config, p.layout);
  mmu.switch_space(Owner::partition("A"));
  Addr ro = 0, kdata = 0;
  for (const auto& b : p.layout.blocks)
    (b.logical_name == "ro" ? ro : kdata) = b.virtual_address;
  // User write to a user-readable page: permission violation.
  AccessOutcome w = mmu.access(AccessOp::Write, Privilege::User, ro, 4);
  CHECK(w.fault == FaultKind::PermissionViolation);
  // User write to a kernel-only page: privilege violation.
  AccessOutcome k = mmu.access(AccessOp::Write, Privilege::User, kdata, 4);
  CHECK(k.fault == FaultKind::PrivilegeViolation);
}

TEST_CASE("switching to the current space again is idempotent and fully priced") {
  Pipeline p = run_pipeline(kP1010Requirements, kP1010Memmap, kP1010Mmu);
  SimulatedMmu mmu(p.config, p.layout);
  CostBreakdown first = mmu.switch_space(Owner::partition("P1"));
  CostBreakdown second = mmu.switch_space(Owner::partition("P1"));
  CHECK(first.tlb_writes == second.tlb_writes);
  CHECK(mmu.tlb_occupancy() == 4);
}

TEST_CASE("unknown spaces and pre-switch accesses are errors") {
  Pipeline p = run_pipeline(kP1010Requirements, kP1010Memmap, kP1010Mmu);
  SimulatedMmu mmu(p.config, p.layout);
  CHECK_THROWS_AS(mmu.switch_space(Owner::partition("ghost")), UnknownSpaceError);
  CHECK_THROWS_AS(mmu.access(AccessOp::Read, Privilege::Kernel, 0x1000, 4), Error);
}

TEST_CASE("artifact loading re-checks structure") {
  Pipeline p = run_pipeline(kP1010Requirements, kP1010Memmap, kP1010Mmu);
  auto truncated = p.config.bytes;
  truncated.resize(truncated.size() - 5);
  CHECK_THROWS_AS(MmuConfig::from_bytes(truncated), FormatError);
  auto versioned = p.config.bytes;
  versioned[4] = 2;
  CHECK_THROWS_AS(MmuConfig::from_bytes(versioned), FormatError);
}

TEST_CASE("trace replay: switches, accesses and stats") {
  Pipeline p = run_pipeline(kP1010Requirements, kP1010Memmap, kP1010Mmu);
  const ResolvedBlock* text = nullptr;
  for (const auto& b : p.layout.blocks)
    if (!b.owner.is_kernel() && b.logical_name == "text") text = &b;
  std::string trace_text = "SWITCH P1\nP1 R U " + hex(text->virtual_address) + " 4\n" +
                           "P1 X U " + hex(text->virtual_address) + " 4\n";
  auto trace = parse_trace(trace_text);
  SimStats stats = run_trace(p.config, p.layout, trace, {}, SimMode::Static);
  CHECK(stats.switches == 1);
  CHECK(stats.accesses == 2);
  CHECK(stats.translated == 2);
  CHECK(stats.cost.tlb_writes == 4);
  SimStats empty = run_trace(p.config, p.layout, {}, {}, SimMode::Static);
  CHECK(empty.accesses == 0);
  CHECK(empty.cost.total == 0);
}

TEST_CASE("trace parse errors carry line numbers") {
  try {
    parse_trace("SWITCH P1\nP1 R U nonsense 4\n");
    FAIL("expected TraceError");
  } catch (const TraceError& e) {
    CHECK(e.line == 2);
  }
  CHECK_THROWS_AS(parse_trace("P1 R U 0x1000 3\n"), TraceError);
}

TEST_CASE("static beats naive on full-coverage traces") {
  auto reqs = sequence22_reqs();
  Pipeline p = run_pipeline(reqs.c_str(), kP1010Memmap, kMmu64);
  // Touch every entry of the sequence once.
  std::string trace_text = "SWITCH P1\n";
  for (const auto& e : p.config.tlb_sequences[0].entries) {
    TlbEntry entry = decode_entry(e);
    trace_text += "P1 R K " + hex(entry.virtual_base) + " 4\n";
  }
  auto trace = parse_trace(trace_text);
  CostModel cm;
  ComparedTotals totals = compare_static_vs_naive(p.config, p.layout, trace, cm);
  CHECK(totals.static_total < totals.naive_total);
  // Closed forms: static = L*w + A*h; naive = w + A*h + L*(h + i + w).
  const std::uint64_t L = 22, A = 22;
  CHECK(totals.static_total == L * cm.tlb_write_cost + A * cm.tlb_hit_cost);
  CHECK(totals.naive_total == cm.tlb_write_cost + A * cm.tlb_hit_cost +
                                  L * (cm.tlb_hit_cost + cm.interrupt_overhead +
                                       cm.tlb_write_cost));
}

TEST_CASE("an empty trace costs nothing in either mode") {
  Pipeline p = run_pipeline(kP1010Requirements, kP1010Memmap, kP1010Mmu);
  ComparedTotals totals = compare_static_vs_naive(p.config, p.layout, {}, {});
  CHECK(totals.static_total == 0);
  CHECK(totals.naive_total == 0);
}

TEST_CASE("touching one entry of a long sequence can favour lazy refill") {
  // Boundary behaviour, reported rather than asserted as an inequality: the
  // batch write pays for the whole sequence, lazy refill for one miss.
  auto reqs = sequence22_reqs();
  Pipeline p = run_pipeline(reqs.c_str(), kP1010Memmap, kMmu64);
  TlbEntry first = decode_entry(p.config.tlb_sequences[0].entries[0]);
  std::string text = "SWITCH P1\nP1 R K " + hex(first.virtual_base) + " 4\n";
  CostModel cm;
  cm.interrupt_overhead = 1;  // cheap interrupts flip the trade-off
  ComparedTotals totals = compare_static_vs_naive(p.config, p.layout, parse_trace(text), cm);
  CHECK(totals.static_total == 22 * cm.tlb_write_cost + cm.tlb_hit_cost);
  CHECK(totals.naive_total ==
        cm.tlb_write_cost + 2 * cm.tlb_hit_cost + cm.interrupt_overhead + cm.tlb_write_cost);
  CHECK(totals.naive_total < totals.static_total);
}

TEST_CASE("trace replay is deterministic") {
  Pipeline p = run_pipeline(kP1010Requirements, kP1010Memmap, kP1010Mmu);
  const ResolvedBlock* text = nullptr;
  for (const auto& b : p.layout.blocks)
    if (!b.owner.is_kernel() && b.logical_name == "text") text = &b;
  std::string t = "SWITCH P1\nP1 R U " + hex(text->virtual_address) + " 4\n";
  auto trace = parse_trace(t);
  SimStats a = run_trace(p.config, p.layout, trace, {}, SimMode::Static);
  SimStats b = run_trace(p.config, p.layout, trace, {}, SimMode::Static);
  CHECK(a.cost == b.cost);
  CHECK(a.translated == b.translated);
}

TEST_CASE("true LRU: the least recently used slot is evicted at capacity") {
  const char* reqs = R"(
[block]
owner = partition:A
name = three
size = 12K
permissions = ur+uw+kr+kw
cache_policy = normal
)";
  const char* mmu = R"(
[mmu]
kind = page_table
page_size = 4K
levels = 4
index_bits = 9 9 9 9
large_page_levels = 2 3
tlb_capacity = 2
asid_bits = 16
has_global_bit = true
)";
  Pipeline p = run_pipeline(reqs, kPtMemmap, mmu);
  SimulatedMmu sim(p.config, p.layout, {}, SimMode::NaiveRefill);
  sim.switch_space(Owner::partition("A"));
  Addr base = p.layout.blocks[0].virtual_address;
  // Fill: p0, p1 resident.
  CHECK(sim.access(AccessOp::Read, Privilege::Kernel, base, 4).cost.walk_memory_accesses == 4);
  CHECK(sim.access(AccessOp::Read, Privilege::Kernel, base + kib(4), 4)
            .cost.walk_memory_accesses == 4);
  // Refresh p0, insert p2: p1 is the LRU victim.
  CHECK(sim.access(AccessOp::Read, Privilege::Kernel, base, 4).cost.walk_memory_accesses == 0);
  CHECK(sim.access(AccessOp::Read, Privilege::Kernel, base + kib(8), 4)
            .cost.walk_memory_accesses == 4);
  CHECK(sim.access(AccessOp::Read, Privilege::Kernel, base, 4).cost.walk_memory_accesses == 0);
  CHECK(sim.access(AccessOp::Read, Privilege::Kernel, base + kib(4), 4)
            .cost.walk_memory_accesses == 4);
}

TEST_CASE("cost model json parsing") {
  CostModel cm = CostModel::from_json_text(
      R"({"tlb_hit_cost": 2, "interrupt_overhead": 500})");
  CHECK(cm.tlb_hit_cost == 2);
  CHECK(cm.interrupt_overhead == 500);
  CHECK(cm.tlb_write_cost == 3);  // default
  CHECK_THROWS_AS(CostModel::from_json_text(R"({"tlb_hit_cost": 0})"), FormatError);
  CHECK_THROWS_AS(CostModel::from_json_text("nonsense"), FormatError);
}
