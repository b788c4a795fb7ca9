#include "dynamic/dynamic.hpp"

#include <algorithm>
#include <sstream>

#include "core/error.hpp"
#include "pagetable/leaves.hpp"
#include "tlb/decompose.hpp"
#include "verify/static_verify.hpp"

namespace memlayout {

namespace {

constexpr unsigned kProbeSize = 4;

struct SpaceMappings {
  const AddressSpacePlan* plan;
  std::vector<MappingInterval> intervals;
};

bool range_free(const std::vector<MappingInterval>& set, Addr base, Size size) {
  for (const auto& m : set)
    if (base < m.v1 && m.v0 < base + size) return false;
  return true;
}

void permission_cases(const MemoryLayout& layout, const AddressSpacePlan& plan,
                      const PlanEntry& pe, AccessMatrix& matrix) {
  const ResolvedBlock& rb = layout.block_of(pe);
  std::vector<Addr> offsets{0};
  if (rb.size >= 2 * kProbeSize) offsets.push_back(align_down(rb.size / 2, kProbeSize));
  if (rb.size >= kProbeSize) offsets.push_back(rb.size - kProbeSize);
  // Probe every mapping unit the backend will emit for this block, so that
  // corrupting any single TLB entry or page descriptor flips at least one
  // case.
  if (layout.mmu.is_tlb()) {
    for (const auto& c : decompose_range(pe.virtual_address, rb.physical_address, rb.size,
                                         layout.mmu.min_entry_size, layout.mmu.max_entry_size)) {
      Addr off = c.virtual_base - pe.virtual_address;
      offsets.push_back(off);
      offsets.push_back(off + (Size{1} << c.log2_size) - kProbeSize);
    }
  } else {
    for (const auto& l : decompose_leaves(pe.virtual_address, rb.physical_address, rb.size,
                                          layout.mmu.geometry)) {
      Addr off = l.virtual_base - pe.virtual_address;
      offsets.push_back(off);
      offsets.push_back(off + l.size - kProbeSize);
    }
  }
  std::sort(offsets.begin(), offsets.end());
  offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());

  struct Bit {
    AccessOp op;
    Privilege priv;
    bool granted;
  };
  const Permissions& p = rb.permissions;
  const Bit bits[6] = {
      {AccessOp::Read, Privilege::User, p.user_read},
      {AccessOp::Write, Privilege::User, p.user_write},
      {AccessOp::Execute, Privilege::User, p.user_exec},
      {AccessOp::Read, Privilege::Kernel, p.kernel_read},
      {AccessOp::Write, Privilege::Kernel, p.kernel_write},
      {AccessOp::Execute, Privilege::Kernel, p.kernel_exec},
  };
  for (const auto& b : bits) {
    for (Addr off : offsets) {
      MatrixCase c;
      c.request.space = plan.space;
      c.request.op = b.op;
      c.request.privilege = b.priv;
      c.request.vaddr = pe.virtual_address + off;
      c.request.size = kProbeSize;
      c.must_succeed = b.granted;
      if (b.granted) c.expected_paddr = rb.physical_address + off;
      c.restore_required = b.granted && b.op == AccessOp::Write;
      c.provenance = rb.id();
      matrix.cases.push_back(std::move(c));
    }
  }
}

void outside_probe(const AddressSpacePlan& plan, const std::vector<MappingInterval>& mapped,
                   Addr vaddr, const std::string& provenance, AccessMatrix& matrix) {
  if (!range_free(mapped, vaddr, kProbeSize)) return;
  if (vaddr + kProbeSize < vaddr) return;
  for (Privilege priv : {Privilege::Kernel, Privilege::User}) {
    MatrixCase c;
    c.request.space = plan.space;
    c.request.op = AccessOp::Read;
    c.request.privilege = priv;
    c.request.vaddr = vaddr;
    c.request.size = kProbeSize;
    c.must_succeed = false;
    c.provenance = provenance;
    matrix.cases.push_back(std::move(c));
  }
}

}  // namespace

AccessMatrix build_matrix(const MemoryLayout& layout) {
  AccessMatrix matrix;
  std::vector<SpaceMappings> spaces;
  for (const auto& plan : layout.plans) {
    // The fixed-TLB backend has no kernel-only switch target; kernel blocks
    // are exercised inside every partition space instead.
    if (layout.mmu.is_tlb() && plan.space.is_kernel()) continue;
    spaces.push_back(SpaceMappings{&plan, expected_intervals(layout, plan)});
  }

  for (const auto& sm : spaces) {
    for (const auto& pe : sm.plan->entries) permission_cases(layout, *sm.plan, pe, matrix);

    // Boundary probes one unit outside each block.
    for (const auto& pe : sm.plan->entries) {
      const ResolvedBlock& rb = layout.block_of(pe);
      if (pe.virtual_address >= kProbeSize)
        outside_probe(*sm.plan, sm.intervals, pe.virtual_address - kProbeSize, "outside",
                      matrix);
      outside_probe(*sm.plan, sm.intervals, pe.virtual_address + rb.size, "outside", matrix);
    }

    // Isolation probes: addresses the other spaces map but this one must not.
    for (const auto& other : spaces) {
      if (other.plan == sm.plan) continue;
      for (const auto& m : other.intervals)
        outside_probe(*sm.plan, sm.intervals, m.v0, "outside", matrix);
    }

    // At least one probe into unmapped space.
    Addr candidate = layout.memmap.min_page_size;
    for (int guard = 0; guard < 4096 && !range_free(sm.intervals, candidate, kProbeSize);
         ++guard) {
      Addr next = candidate;
      for (const auto& m : sm.intervals)
        if (m.v0 <= candidate && candidate < m.v1) next = m.v1;
      candidate = align_up(std::max(next, candidate + 1), layout.memmap.min_page_size);
    }
    outside_probe(*sm.plan, sm.intervals, candidate, "outside", matrix);
  }
  return matrix;
}

SimAgent::SimAgent(const MmuConfig& config, const MemoryLayout& layout, CostModel cm,
                   SimMode mode)
    : mmu_(config, layout, cm, mode) {
  spaces_ = mmu_.spaces();
}

void SimAgent::switch_space(const std::string& space) {
  for (const auto& o : spaces_) {
    if (o.key() == space) {
      // Each space is verified from a cold TLB; resident entries walked in a
      // previous window must not stand in for this space's own descriptors.
      mmu_.invalidate_all();
      mmu_.switch_space(o);
      return;
    }
  }
  throw UnknownSpaceError(space);
}

ToolAgent::Result SimAgent::access(AccessOp op, Privilege priv, Addr vaddr, unsigned size,
                                   std::optional<std::uint64_t> data) {
  AccessOutcome out = mmu_.access(op, priv, vaddr, size);
  Result r;
  r.ok = out.translated;
  r.paddr = out.paddr;
  r.fault = out.fault;
  if (out.translated && op == AccessOp::Write) {
    std::uint64_t value = data.value_or(0);
    for (unsigned i = 0; i < size; ++i)
      memory_[out.paddr + i] = static_cast<std::uint8_t>((value >> (8 * i)) & 0xFF);
  }
  return r;
}

unsigned SimAgent::snapshot() {
  snapshots_.push_back(memory_);
  return static_cast<unsigned>(snapshots_.size());
}

void SimAgent::restore(unsigned id) {
  if (id == 0 || id > snapshots_.size())
    throw AgentError("restore: unknown snapshot " + std::to_string(id));
  memory_ = snapshots_[id - 1];
}

VerificationReport DynamicReport::to_report() const {
  VerificationReport r;
  for (const auto& m : mismatches) {
    const MatrixCase& c = m.matrix_case;
    r.add(Severity::Error, c.must_succeed ? "POSITIVE_FAILED" : "NEGATIVE_SUCCEEDED",
          c.request.space.key(), c.provenance,
          to_string(c.request.op) + (c.request.privilege == Privilege::User ? "/U" : "/K") +
              " at " + hex(c.request.vaddr) + ": expected " +
              (c.must_succeed ? "success" : "fault") + ", observed " + m.observed);
  }
  if (!complete)
    r.add(Severity::Error, "AGENT_INCOMPLETE", "-", "",
          "agent channel failed; report covers " + std::to_string(cases_run) + " cases");
  return r;
}

DynamicReport run_matrix(const AccessMatrix& matrix, ToolAgent& agent,
                         bool stop_at_first_mismatch) {
  DynamicReport report;
  // One switch per space; cases keep their original order within a group.
  std::vector<std::string> order;
  for (const auto& c : matrix.cases) {
    const std::string key = c.request.space.key();
    if (std::find(order.begin(), order.end(), key) == order.end()) order.push_back(key);
  }
  try {
    for (const auto& space : order) {
      if (stop_at_first_mismatch && !report.mismatches.empty()) break;
      agent.switch_space(space);
      for (const auto& c : matrix.cases) {
        if (c.request.space.key() != space) continue;
        if (stop_at_first_mismatch && !report.mismatches.empty()) break;
        unsigned snap = 0;
        if (c.restore_required) snap = agent.snapshot();
        ToolAgent::Result r =
            agent.access(c.request.op, c.request.privilege, c.request.vaddr, c.request.size,
                         c.restore_required ? std::optional<std::uint64_t>(0xA5A55A5ADEADBEEFull)
                                            : std::nullopt);
        if (c.restore_required) agent.restore(snap);
        if (!r.supported) {
          ++report.cases_skipped;
          continue;
        }
        ++report.cases_run;
        if (c.must_succeed) {
          if (!r.ok)
            report.mismatches.push_back({c, "fault " + to_string(r.fault)});
          else if (c.expected_paddr && r.paddr != *c.expected_paddr)
            report.mismatches.push_back(
                {c, "translated to " + hex(r.paddr) + ", layout says " +
                        hex(*c.expected_paddr)});
        } else {
          if (r.ok)
            report.mismatches.push_back({c, "succeeded with paddr " + hex(r.paddr)});
        }
      }
    }
  } catch (const Error& e) {
    report.complete = false;
    report.mismatches.push_back(
        {MatrixCase{}, std::string("agent error: ") + e.what()});
  }
  return report;
}

namespace {

std::string fault_name(FaultKind k) { return to_string(k); }

std::optional<FaultKind> fault_from_name(const std::string& s) {
  if (s == "NOMAPPING") return FaultKind::NoMapping;
  if (s == "PERMISSION") return FaultKind::PermissionViolation;
  if (s == "PRIVILEGE") return FaultKind::PrivilegeViolation;
  return std::nullopt;
}

}  // namespace

std::string AgentServer::handle_line(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> tok;
  std::string t;
  while (in >> t) tok.push_back(t);
  try {
    if (tok.empty()) return "ERR empty request";
    if (tok[0] == "SWITCH" && tok.size() == 2) {
      agent_.switch_space(tok[1]);
      return "OK";
    }
    if (tok[0] == "ACCESS" && (tok.size() == 5 || tok.size() == 6)) {
      AccessOp op;
      if (tok[1] == "R") op = AccessOp::Read;
      else if (tok[1] == "W") op = AccessOp::Write;
      else if (tok[1] == "X") op = AccessOp::Execute;
      else
        return "ERR bad op";
      Privilege priv;
      if (tok[2] == "U") priv = Privilege::User;
      else if (tok[2] == "K") priv = Privilege::Kernel;
      else
        return "ERR bad privilege";
      Addr vaddr = std::stoull(tok[3], nullptr, 16);
      unsigned size = static_cast<unsigned>(std::stoul(tok[4]));
      std::optional<std::uint64_t> data;
      if (tok.size() == 6) data = std::stoull(tok[5], nullptr, 16);
      ToolAgent::Result r = agent_.access(op, priv, vaddr, size, data);
      if (r.ok) return "OK " + hex(r.paddr);
      return "FAULT " + fault_name(r.fault) + " " + hex(vaddr);
    }
    if (tok[0] == "SNAPSHOT" && tok.size() == 1)
      return "OK " + std::to_string(agent_.snapshot());
    if (tok[0] == "RESTORE" && tok.size() == 2) {
      agent_.restore(static_cast<unsigned>(std::stoul(tok[1])));
      return "OK";
    }
    return "ERR unknown request";
  } catch (const std::exception& e) {
    return std::string("ERR ") + e.what();
  }
}

std::string RemoteAgent::roundtrip(const std::string& line) {
  std::string response;
  try {
    response = transport_(line);
  } catch (const std::exception& e) {
    throw AgentError(std::string("channel lost: ") + e.what());
  }
  if (response.rfind("ERR", 0) == 0) throw AgentError("agent rejected `" + line + "`: " + response);
  return response;
}

void RemoteAgent::switch_space(const std::string& space) {
  if (roundtrip("SWITCH " + space) != "OK") throw AgentError("bad SWITCH response");
}

ToolAgent::Result RemoteAgent::access(AccessOp op, Privilege priv, Addr vaddr, unsigned size,
                                      std::optional<std::uint64_t> data) {
  std::ostringstream os;
  os << "ACCESS " << to_string(op) << " " << (priv == Privilege::User ? "U" : "K") << " "
     << hex(vaddr) << " " << size;
  if (data) os << " " << hex(*data);
  std::string resp = roundtrip(os.str());
  std::istringstream in(resp);
  std::vector<std::string> tok;
  std::string t;
  while (in >> t) tok.push_back(t);
  Result r;
  if (tok.size() == 1 && tok[0] == "UNSUPPORTED") {
    r.supported = false;
    return r;
  }
  if (tok.size() == 2 && tok[0] == "OK") {
    r.ok = true;
    r.paddr = std::stoull(tok[1], nullptr, 16);
    return r;
  }
  if (tok.size() == 3 && tok[0] == "FAULT") {
    auto kind = fault_from_name(tok[1]);
    if (!kind) throw AgentError("unknown fault kind in `" + resp + "`");
    r.ok = false;
    r.fault = *kind;
    return r;
  }
  throw AgentError("protocol violation: `" + resp + "`");
}

unsigned RemoteAgent::snapshot() {
  std::string resp = roundtrip("SNAPSHOT");
  if (resp.rfind("OK ", 0) != 0) throw AgentError("bad SNAPSHOT response");
  return static_cast<unsigned>(std::stoul(resp.substr(3)));
}

void RemoteAgent::restore(unsigned id) {
  if (roundtrip("RESTORE " + std::to_string(id)) != "OK")
    throw AgentError("bad RESTORE response");
}

}  // namespace memlayout
