#ifndef MEMLAYOUT_DYNAMIC_DYNAMIC_HPP
#define MEMLAYOUT_DYNAMIC_DYNAMIC_HPP

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/report.hpp"
#include "sim/sim.hpp"

namespace memlayout {

struct MatrixCase {
  AccessRequest request;
  bool must_succeed = false;
  std::optional<Addr> expected_paddr;  // positive cases compare the translation
  bool restore_required = false;       // positive write: snapshot/restore around it
  std::string provenance;              // block id or "outside"
};

struct AccessMatrix {
  std::vector<MatrixCase> cases;
};

// Positive cases for every granted permission at block base, middle and end;
// negative cases for every denied permission, boundary probes just outside
// each block, per-space unmapped probes, and isolation probes at the other
// spaces' addresses.
AccessMatrix build_matrix(const MemoryLayout& layout);

// In-target agent duties: perform requested accesses, report faults,
// recover, restore after writes.
class ToolAgent {
 public:
  struct Result {
    bool ok = false;
    Addr paddr = 0;
    FaultKind fault = FaultKind::NoMapping;
    // Execute probes are optional per agent capability; an unsupported
    // probe is skipped, not failed.
    bool supported = true;
  };
  virtual ~ToolAgent() = default;
  virtual void switch_space(const std::string& space) = 0;
  virtual Result access(AccessOp op, Privilege priv, Addr vaddr, unsigned size,
                        std::optional<std::uint64_t> data) = 0;
  virtual unsigned snapshot() = 0;
  virtual void restore(unsigned id) = 0;
};

// Agent backed by the deterministic simulator plus a sparse physical store,
// so writes are real and restorable.
class SimAgent : public ToolAgent {
 public:
  SimAgent(const MmuConfig& config, const MemoryLayout& layout, CostModel cm = {},
           SimMode mode = SimMode::Static);
  void switch_space(const std::string& space) override;
  Result access(AccessOp op, Privilege priv, Addr vaddr, unsigned size,
                std::optional<std::uint64_t> data) override;
  unsigned snapshot() override;
  void restore(unsigned id) override;

  const std::map<Addr, std::uint8_t>& memory() const { return memory_; }
  SimulatedMmu& mmu() { return mmu_; }

 private:
  std::vector<Owner> spaces_;
  SimulatedMmu mmu_;
  std::map<Addr, std::uint8_t> memory_;  // sparse physical bytes, zero elsewhere
  std::vector<std::map<Addr, std::uint8_t>> snapshots_;
};

struct DynamicMismatch {
  MatrixCase matrix_case;
  std::string observed;
};

struct DynamicReport {
  std::vector<DynamicMismatch> mismatches;
  std::size_t cases_run = 0;
  std::size_t cases_skipped = 0;  // probes the agent declared unsupported
  bool complete = true;           // false when the agent channel failed mid-run
  bool passed() const { return complete && mismatches.empty(); }
  VerificationReport to_report() const;
};

// stop_at_first_mismatch trades the full report for speed; the fault
// injection harness only needs to know that some case flipped.
DynamicReport run_matrix(const AccessMatrix& matrix, ToolAgent& agent,
                         bool stop_at_first_mismatch = false);

// Line protocol between the verification tool and a remote agent:
//   SWITCH <space>                          -> OK | ERR <msg>
//   ACCESS <R|W|X> <U|K> <hexaddr> <size> [<hexdata>]
//                                           -> OK <hexpaddr>
//                                            | FAULT <kind> <hexaddr>
//                                            | UNSUPPORTED
//                                            | ERR <msg>
//   SNAPSHOT                                -> OK <id>
//   RESTORE <id>                            -> OK | ERR <msg>
// UNSUPPORTED is reserved for agents that cannot issue a probe class safely
// (typically execute probes on real targets).
class AgentServer {
 public:
  explicit AgentServer(ToolAgent& agent) : agent_(agent) {}
  std::string handle_line(const std::string& line);

 private:
  ToolAgent& agent_;
};

// Client side: drives any transport that maps a request line to a response
// line.  Protocol violations raise AgentError.
class RemoteAgent : public ToolAgent {
 public:
  using Transport = std::function<std::string(const std::string&)>;
  explicit RemoteAgent(Transport t) : transport_(std::move(t)) {}
  void switch_space(const std::string& space) override;
  Result access(AccessOp op, Privilege priv, Addr vaddr, unsigned size,
                std::optional<std::uint64_t> data) override;
  unsigned snapshot() override;
  void restore(unsigned id) override;

 private:
  std::string roundtrip(const std::string& line);
  Transport transport_;
};

}  // namespace memlayout

#endif
