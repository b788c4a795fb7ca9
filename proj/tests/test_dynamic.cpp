#include <doctest.h>

#include "config/mmu_config.hpp"
#include "core/error.hpp"
#include "core/project.hpp"
#include "dynamic/dynamic.hpp"
#include "layout/layout.hpp"
#include "pagetable/pagetable.hpp"
#include "support/gen.hpp"
#include "support/samples.hpp"

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

}  // namespace

TEST_CASE("matrix cases for a single-unit read-only block follow the 3 + 15 rule") {
  const char* reqs = R"(
[block]
owner = partition:A
name = ro
size = 4K
permissions = kr
cache_policy = normal
)";
  Pipeline p = run_pipeline(reqs, kP1010Memmap, kP1010Mmu);
  AccessMatrix matrix = build_matrix(p.layout);
  std::size_t positives = 0, negatives = 0;
  for (const auto& c : matrix.cases) {
    if (c.provenance != "A/ro") continue;
    (c.must_succeed ? positives : negatives)++;
    if (c.must_succeed) {
      CHECK(c.request.op == AccessOp::Read);
      CHECK(c.request.privilege == Privilege::Kernel);
    }
  }
  CHECK(positives == 3);        // kernel read at base, middle, end
  CHECK(negatives == (2 + 3) * 3);  // kw/kx plus all three user ops
}

TEST_CASE("every block contributes cases in every space that maps it") {
  Pipeline p = run_pipeline(kPtRequirements, kPtMemmap, kPtMmu);
  AccessMatrix matrix = build_matrix(p.layout);
  // Kernel text must be probed in the kernel space and in both partitions.
  std::size_t spaces_probing_kernel_text = 0;
  for (const auto& plan : p.layout.plans) {
    bool found = false;
    for (const auto& c : matrix.cases)
      if (c.provenance == "kernel/text" && c.request.space == plan.space) found = true;
    if (found) ++spaces_probing_kernel_text;
  }
  CHECK(spaces_probing_kernel_text == p.layout.plans.size());
}

TEST_CASE("matrix coverage: a case per granted and per denied permission of every entry") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    GenOptions opts;
    opts.tlb = seed % 2 == 0;
    Project proj = random_project(base_seed() + 1400 + seed, opts);
    MemoryLayout layout = plan_layout(proj.blocks, proj.memmap, proj.mmu);
    AccessMatrix matrix = build_matrix(layout);
    for (const auto& plan : layout.plans) {
      if (layout.mmu.is_tlb() && plan.space.is_kernel()) continue;
      for (const auto& e : plan.entries) {
        const ResolvedBlock& rb = layout.block_of(e);
        const unsigned bits = rb.permissions.bits();
        for (unsigned bit = 0; bit < 6; ++bit) {
          AccessOp op = static_cast<AccessOp>(bit % 3);
          Privilege priv = bit < 3 ? Privilege::User : Privilege::Kernel;
          bool granted = (bits >> bit) & 1;
          bool found = false;
          for (const auto& c : matrix.cases) {
            if (c.request.space == plan.space && c.provenance == rb.id() &&
                c.request.op == op && c.request.privilege == priv &&
                c.must_succeed == granted)
              found = true;
          }
          CHECK(found);
        }
      }
    }
  }
}

TEST_CASE("the matrix holds against the simulator agent for generated projects") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    GenOptions opts;
    opts.tlb = seed % 2 == 0;
    Project proj = random_project(base_seed() + 1300 + seed, opts);
    MemoryLayout layout = plan_layout(proj.blocks, proj.memmap, proj.mmu);
    MmuConfig config = generate_config(layout).config;
    SimAgent agent(config, layout);
    DynamicReport report = run_matrix(build_matrix(layout), agent);
    CHECK(report.complete);
    CHECK(report.mismatches.empty());
    CHECK(report.passed());
  }
}

TEST_CASE("widening one page to user-writable flips exactly its negative cases") {
  Pipeline p = run_pipeline(kPtRequirements, kPtMemmap, kPtMmu);
  // Set the UW bit on some kernel data leaf.
  auto bytes = p.config.bytes;
  const MlptSpace& kernel_space = p.config.pagetable->spaces[0];
  {
    bool done = false;
    for (std::size_t off = 0; off + 8 <= kernel_space.bytes->size() && !done; off += 8) {
      std::uint64_t d = 0;
      for (int b = 0; b < 8; ++b) d |= std::uint64_t((*kernel_space.bytes)[off + b]) << (8 * b);
      if ((d & desc::kValid) && !(d & desc::kTable) && (d & desc::kPermMask)) {
        unsigned perms = unsigned((d >> desc::kPermShift) & 0x3F);
        if (perms == 0b011000) {  // kr+kw data page
          d |= std::uint64_t(0b000010) << desc::kPermShift;  // add uw
          for (int b = 0; b < 8; ++b)
            bytes[kernel_space.file_offset + off + b] =
                static_cast<std::uint8_t>((d >> (8 * b)) & 0xFF);
          done = true;
        }
      }
    }
    REQUIRE(done);
  }
  MmuConfig mutated = MmuConfig::from_bytes(bytes);
  SimAgent agent(mutated, p.layout);
  DynamicReport report = run_matrix(build_matrix(p.layout), agent);
  CHECK_FALSE(report.passed());
  for (const auto& m : report.mismatches) {
    CHECK(m.matrix_case.request.op == AccessOp::Write);
    CHECK(m.matrix_case.request.privilege == Privilege::User);
    CHECK_FALSE(m.matrix_case.must_succeed);
  }
}

TEST_CASE("an agent that never faults trips every negative case") {
  struct YesAgent : ToolAgent {
    void switch_space(const std::string&) override {}
    Result access(AccessOp, Privilege, Addr vaddr, unsigned, std::optional<std::uint64_t>)
        override {
      return Result{true, vaddr, FaultKind::NoMapping};
    }
    unsigned snapshot() override { return 1; }
    void restore(unsigned) override {}
  };
  Pipeline p = run_pipeline(kP1010Requirements, kP1010Memmap, kP1010Mmu);
  AccessMatrix matrix = build_matrix(p.layout);
  std::size_t negatives = 0;
  for (const auto& c : matrix.cases)
    if (!c.must_succeed) ++negatives;
  YesAgent agent;
  DynamicReport report = run_matrix(matrix, agent);
  CHECK(report.mismatches.size() >= negatives);
}

TEST_CASE("write cases restore memory: the agent store is unchanged afterwards") {
  Pipeline p = run_pipeline(kPtRequirements, kPtMemmap, kPtMmu);
  SimAgent agent(p.config, p.layout);
  auto before = agent.memory();
  DynamicReport report = run_matrix(build_matrix(p.layout), agent);
  CHECK(report.passed());
  CHECK(agent.memory() == before);
}

TEST_CASE("the wire protocol round-trips the whole matrix") {
  Pipeline p = run_pipeline(kP1010Requirements, kP1010Memmap, kP1010Mmu);
  SimAgent backend(p.config, p.layout);
  AgentServer server(backend);
  RemoteAgent remote([&](const std::string& line) { return server.handle_line(line); });
  DynamicReport report = run_matrix(build_matrix(p.layout), remote);
  CHECK(report.complete);
  CHECK(report.passed());
}

TEST_CASE("protocol violations surface as agent errors and an incomplete report") {
  Pipeline p = run_pipeline(kP1010Requirements, kP1010Memmap, kP1010Mmu);
  int calls = 0;
  RemoteAgent flaky([&](const std::string& line) -> std::string {
    if (++calls > 3) return "garbage response";
    SimAgent backend(p.config, p.layout);  // enough for the first calls
    AgentServer server(backend);
    return server.handle_line(line);
  });
  DynamicReport report = run_matrix(build_matrix(p.layout), flaky);
  CHECK_FALSE(report.complete);
  CHECK_FALSE(report.passed());
}

TEST_CASE("agents may declare execute probes unsupported; cases are skipped") {
  Pipeline p = run_pipeline(kP1010Requirements, kP1010Memmap, kP1010Mmu);
  SimAgent backend(p.config, p.layout);
  AgentServer server(backend);
  RemoteAgent remote([&](const std::string& line) -> std::string {
    if (line.rfind("ACCESS X", 0) == 0) return "UNSUPPORTED";
    return server.handle_line(line);
  });
  DynamicReport report = run_matrix(build_matrix(p.layout), remote);
  CHECK(report.complete);
  CHECK(report.passed());
  CHECK(report.cases_skipped > 0);
}

TEST_CASE("agent protocol: single exchanges") {
  Pipeline p = run_pipeline(kP1010Requirements, kP1010Memmap, kP1010Mmu);
  SimAgent backend(p.config, p.layout);
  AgentServer server(backend);
  CHECK(server.handle_line("SWITCH P1") == "OK");
  const ResolvedBlock* text = nullptr;
  for (const auto& b : p.layout.blocks)
    if (!b.owner.is_kernel() && b.logical_name == "text") text = &b;
  std::string ok = server.handle_line("ACCESS R U " + hex(text->virtual_address) + " 4");
  CHECK(ok == "OK " + hex(text->physical_address));
  std::string fault = server.handle_line("ACCESS W U " + hex(text->virtual_address) + " 4");
  CHECK(fault.rfind("FAULT PERMISSION", 0) == 0);
  CHECK(server.handle_line("SNAPSHOT") == "OK 1");
  CHECK(server.handle_line("RESTORE 1") == "OK");
  CHECK(server.handle_line("SWITCH nowhere").rfind("ERR", 0) == 0);
  CHECK(server.handle_line("NONSENSE").rfind("ERR", 0) == 0);
}
