#include "sim/trace.hpp"

#include <sstream>

#include "core/error.hpp"

namespace memlayout {

namespace {

Addr parse_hex(const std::string& tok, int line) {
  if (tok.size() < 3 || tok[0] != '0' || (tok[1] != 'x' && tok[1] != 'X'))
    throw TraceError(line, "expected a 0x-prefixed address, got `" + tok + "`");
  Addr out = 0;
  for (std::size_t i = 2; i < tok.size(); ++i) {
    char c = static_cast<char>(::tolower(tok[i]));
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else
      throw TraceError(line, "bad hex digit in `" + tok + "`");
    if (out >> 60) throw TraceError(line, "address exceeds 64 bits");
    out = (out << 4) | static_cast<Addr>(d);
  }
  return out;
}

}  // namespace

std::vector<TraceOp> parse_trace(const std::string& text) {
  std::vector<TraceOp> out;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (auto pos = raw.find('#'); pos != std::string::npos) raw.erase(pos);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    std::string t;
    while (ls >> t) tok.push_back(t);
    if (tok.empty()) continue;
    TraceOp op;
    op.line = lineno;
    if (tok[0] == "SWITCH") {
      if (tok.size() != 2) throw TraceError(lineno, "SWITCH takes one space name");
      op.is_switch = true;
      op.space = tok[1];
    } else {
      if (tok.size() != 5)
        throw TraceError(lineno, "expected `<space> <R|W|X> <U|K> <hex vaddr> <size>`");
      op.space = tok[0];
      if (tok[1] == "R") op.op = AccessOp::Read;
      else if (tok[1] == "W") op.op = AccessOp::Write;
      else if (tok[1] == "X") op.op = AccessOp::Execute;
      else
        throw TraceError(lineno, "bad op `" + tok[1] + "`");
      if (tok[2] == "U") op.privilege = Privilege::User;
      else if (tok[2] == "K") op.privilege = Privilege::Kernel;
      else
        throw TraceError(lineno, "bad privilege `" + tok[2] + "`");
      op.vaddr = parse_hex(tok[3], lineno);
      try {
        op.size = static_cast<unsigned>(std::stoul(tok[4]));
      } catch (...) {
        throw TraceError(lineno, "bad size `" + tok[4] + "`");
      }
      if (op.size != 1 && op.size != 2 && op.size != 4 && op.size != 8)
        throw TraceError(lineno, "size must be 1, 2, 4 or 8");
    }
    out.push_back(std::move(op));
  }
  return out;
}

SimStats run_trace(const MmuConfig& config, const MemoryLayout& layout,
                   const std::vector<TraceOp>& trace, const CostModel& cm, SimMode mode) {
  SimulatedMmu mmu(config, layout, cm, mode);
  SimStats stats;
  stats.mode = mode == SimMode::Static ? "static" : "naive";
  for (const auto& op : trace) {
    if (op.is_switch) {
      auto owner = op.space == "kernel" ? Owner::kernel() : Owner::partition(op.space);
      stats.cost += mmu.switch_space(owner);
      stats.switches += 1;
      continue;
    }
    if (!mmu.has_current_space())
      throw TraceError(op.line, "access before the first SWITCH");
    if (mmu.current_space().key() != op.space)
      throw TraceError(op.line, "access names space `" + op.space + "` but `" +
                                    mmu.current_space().key() + "` is current");
    AccessOutcome out = mmu.access(op.op, op.privilege, op.vaddr, op.size);
    stats.accesses += 1;
    if (out.translated) stats.translated += 1;
    else stats.faults += 1;
    stats.cost += out.cost;
  }
  return stats;
}

ComparedTotals compare_static_vs_naive(const MmuConfig& config, const MemoryLayout& layout,
                                       const std::vector<TraceOp>& trace,
                                       const CostModel& cm) {
  ComparedTotals out;
  out.static_total = run_trace(config, layout, trace, cm, SimMode::Static).cost.total;
  out.naive_total = run_trace(config, layout, trace, cm, SimMode::NaiveRefill).cost.total;
  return out;
}

Json stats_to_json(const SimStats& s) {
  Json j;
  j["format"] = "memlayout/stats";
  j["version"] = 1;
  j["mode"] = s.mode;
  j["switches"] = s.switches;
  j["accesses"] = s.accesses;
  j["translated"] = s.translated;
  j["faults"] = s.faults;
  Json c;
  c["tlb_lookups"] = s.cost.tlb_lookups;
  c["tlb_writes"] = s.cost.tlb_writes;
  c["walk_memory_accesses"] = s.cost.walk_memory_accesses;
  c["interrupts"] = s.cost.interrupts;
  c["total"] = s.cost.total;
  j["cost"] = std::move(c);
  return j;
}

std::string stats_to_text(const SimStats& s) {
  std::ostringstream os;
  os << "mode                 " << s.mode << "\n"
     << "switches             " << s.switches << "\n"
     << "accesses             " << s.accesses << " (" << s.translated << " translated, "
     << s.faults << " faulted)\n"
     << "tlb_lookups          " << s.cost.tlb_lookups << "\n"
     << "tlb_writes           " << s.cost.tlb_writes << "\n"
     << "walk_memory_accesses " << s.cost.walk_memory_accesses << "\n"
     << "interrupts           " << s.cost.interrupts << "\n"
     << "total_cost           " << s.cost.total << "\n";
  return os.str();
}

}  // namespace memlayout
