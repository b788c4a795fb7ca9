#ifndef MEMLAYOUT_SIM_TRACE_HPP
#define MEMLAYOUT_SIM_TRACE_HPP

#include <string>
#include <vector>

#include "sim/sim.hpp"

namespace memlayout {

// Line-oriented trace format:
//   SWITCH <space>
//   <space> <R|W|X> <U|K> <hex vaddr> <size>
// `#` starts a comment; blank lines are skipped.

struct TraceOp {
  int line = 0;
  bool is_switch = false;
  std::string space;
  AccessOp op = AccessOp::Read;
  Privilege privilege = Privilege::Kernel;
  Addr vaddr = 0;
  unsigned size = 4;
};

std::vector<TraceOp> parse_trace(const std::string& text);  // throws TraceError

struct SimStats {
  std::string mode;
  std::uint64_t switches = 0;
  std::uint64_t accesses = 0;
  std::uint64_t translated = 0;
  std::uint64_t faults = 0;
  CostBreakdown cost;
};

SimStats run_trace(const MmuConfig& config, const MemoryLayout& layout,
                   const std::vector<TraceOp>& trace, const CostModel& cm, SimMode mode);

struct ComparedTotals {
  std::uint64_t static_total = 0;
  std::uint64_t naive_total = 0;
};

// Replays the trace in both modes; in Static mode the switch writes the
// whole configuration up front, in NaiveRefill it is deferred to misses.
ComparedTotals compare_static_vs_naive(const MmuConfig& config, const MemoryLayout& layout,
                                       const std::vector<TraceOp>& trace, const CostModel& cm);

Json stats_to_json(const SimStats& s);
std::string stats_to_text(const SimStats& s);

}  // namespace memlayout

#endif
