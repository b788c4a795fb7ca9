#include "memlayout.h"

#include <cstring>
#include <iostream>
#include <string>

#include "config/mmu_config.hpp"
#include "core/error.hpp"
#include "core/interchange.hpp"
#include "core/project.hpp"
#include "dynamic/dynamic.hpp"
#include "layout/layout.hpp"
#include "sim/trace.hpp"
#include "verify/mutate.hpp"
#include "verify/static_verify.hpp"

#define ML_EXPORT __attribute__((visibility("default")))

using namespace memlayout;

struct ml_project {
  Project project;
};
struct ml_layout {
  MemoryLayout layout;
};
struct ml_config {
  MmuConfig config;
  std::string manifest;  // present when generated, empty when loaded
};
struct ml_report {
  VerificationReport report;
};
struct ml_sim {
  SimulatedMmu mmu;
  std::vector<Owner> spaces;
};

namespace {

thread_local std::string g_last_error;

ml_status status_of(const Error& e) {
  switch (e.code()) {
    case ErrorCode::Io: return ML_ERR_IO;
    case ErrorCode::Schema: return ML_ERR_SCHEMA;
    case ErrorCode::Semantic: return ML_ERR_SEMANTIC;
    case ErrorCode::Infeasible: return ML_ERR_INFEASIBLE;
    case ErrorCode::Budget: return ML_ERR_BUDGET;
    case ErrorCode::Range: return ML_ERR_RANGE;
    case ErrorCode::Alignment: return ML_ERR_ALIGNMENT;
    case ErrorCode::Format: return ML_ERR_FORMAT;
    case ErrorCode::MalformedImage: return ML_ERR_MALFORMED_IMAGE;
    case ErrorCode::Decode: return ML_ERR_DECODE;
    case ErrorCode::UnknownSpace: return ML_ERR_UNKNOWN_SPACE;
    case ErrorCode::Agent: return ML_ERR_AGENT;
    case ErrorCode::Trace: return ML_ERR_TRACE;
    case ErrorCode::BackendMismatch: return ML_ERR_BACKEND_MISMATCH;
    case ErrorCode::InvalidArgument: return ML_ERR_INVALID_ARG;
  }
  return ML_ERR_INTERNAL;
}

template <typename Fn>
ml_status guarded(Fn&& fn) {
  try {
    fn();
    return ML_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return ML_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

ml_status require(bool cond, const char* what) {
  if (cond) return ML_OK;
  g_last_error = what;
  return ML_ERR_INVALID_ARG;
}

}  // namespace

extern "C" {

ML_EXPORT const char* ml_status_name(ml_status status) {
  switch (status) {
    case ML_OK: return "OK";
    case ML_ERR_IO: return "IO";
    case ML_ERR_SCHEMA: return "SCHEMA";
    case ML_ERR_SEMANTIC: return "SEMANTIC";
    case ML_ERR_INFEASIBLE: return "INFEASIBLE";
    case ML_ERR_BUDGET: return "BUDGET";
    case ML_ERR_RANGE: return "RANGE";
    case ML_ERR_ALIGNMENT: return "ALIGNMENT";
    case ML_ERR_FORMAT: return "FORMAT";
    case ML_ERR_MALFORMED_IMAGE: return "MALFORMED_IMAGE";
    case ML_ERR_DECODE: return "DECODE";
    case ML_ERR_UNKNOWN_SPACE: return "UNKNOWN_SPACE";
    case ML_ERR_AGENT: return "AGENT";
    case ML_ERR_TRACE: return "TRACE";
    case ML_ERR_BACKEND_MISMATCH: return "BACKEND_MISMATCH";
    case ML_ERR_INVALID_ARG: return "INVALID_ARG";
    case ML_ERR_INTERNAL: return "INTERNAL";
  }
  return "UNKNOWN";
}

ML_EXPORT const char* ml_last_error(void) { return g_last_error.c_str(); }

ML_EXPORT void ml_string_free(char* s) { ::free(s); }

ML_EXPORT ml_status ml_project_open(const char* requirements_path, const char* memmap_path,
                                    const char* mmu_path, ml_project** out) {
  if (auto s = require(requirements_path && memmap_path && mmu_path && out, "null argument"))
    return s;
  return guarded([&] {
    auto* p = new ml_project{parse_project_files(requirements_path, memmap_path, mmu_path)};
    *out = p;
  });
}

ML_EXPORT ml_status ml_project_from_strings(const char* requirements_text,
                                            const char* memmap_text, const char* mmu_text,
                                            ml_project** out) {
  if (auto s = require(requirements_text && memmap_text && mmu_text && out, "null argument"))
    return s;
  return guarded([&] {
    auto* p = new ml_project{parse_project(requirements_text, memmap_text, mmu_text)};
    *out = p;
  });
}

ML_EXPORT void ml_project_close(ml_project* project) { delete project; }

ML_EXPORT ml_backend ml_project_backend(const ml_project* project) {
  return project->project.mmu.is_tlb() ? ML_BACKEND_TLB : ML_BACKEND_PAGETABLE;
}

ML_EXPORT ml_status ml_project_validate(const ml_project* project, int strict_wx,
                                        ml_report** out) {
  if (auto s = require(project && out, "null argument")) return s;
  return guarded([&] {
    ValidateOptions opts;
    opts.strict_wx = strict_wx != 0;
    *out = new ml_report{validate_requirements(project->project.blocks, project->project.memmap,
                                               project->project.mmu, opts)};
  });
}

ML_EXPORT ml_status ml_layout_plan(const ml_project* project, ml_layout** out) {
  if (auto s = require(project && out, "null argument")) return s;
  return guarded([&] {
    *out = new ml_layout{plan_layout(project->project.blocks, project->project.memmap,
                                     project->project.mmu)};
  });
}

ML_EXPORT ml_status ml_layout_save(const ml_layout* layout, const char* path) {
  if (auto s = require(layout && path, "null argument")) return s;
  return guarded([&] { write_file(path, layout_to_string(layout->layout)); });
}

ML_EXPORT ml_status ml_layout_load(const char* path, ml_layout** out) {
  if (auto s = require(path && out, "null argument")) return s;
  return guarded([&] { *out = new ml_layout{layout_from_string(read_file(path))}; });
}

ML_EXPORT void ml_layout_close(ml_layout* layout) { delete layout; }

ML_EXPORT ml_backend ml_layout_backend(const ml_layout* layout) {
  return layout->layout.mmu.is_tlb() ? ML_BACKEND_TLB : ML_BACKEND_PAGETABLE;
}

ML_EXPORT ml_status ml_layout_feasibility(const ml_layout* layout, int zero_miss,
                                          ml_report** out) {
  if (auto s = require(layout && out, "null argument")) return s;
  return guarded(
      [&] { *out = new ml_report{feasibility_check(layout->layout, zero_miss != 0)}; });
}

ML_EXPORT ml_status ml_layout_summary(const ml_layout* layout, char** out_text) {
  if (auto s = require(layout && out_text, "null argument")) return s;
  return guarded([&] {
    const MemoryLayout& l = layout->layout;
    std::ostringstream os;
    os << "blocks: " << l.blocks.size() << ", spaces: " << l.plans.size() << "\n";
    for (const auto& plan : l.plans) {
      unsigned demand = plan_budget_demand(l, plan);
      os << "  " << plan.space.key() << ": " << plan.entries.size() << " blocks, ";
      if (l.mmu.is_tlb())
        os << demand << "/" << l.mmu.entry_count << " TLB entries\n";
      else
        os << demand << " pages (TLB capacity " << l.mmu.tlb_capacity << ")\n";
    }
    for (const auto& b : l.blocks) {
      os << "  " << b.id() << ": v=" << hex(b.virtual_address) << " p="
         << hex(b.physical_address) << " size=" << format_size(b.size) << " perms="
         << to_string(b.permissions) << " cache=" << to_string(b.cache_policy) << "\n";
    }
    *out_text = dup_string(os.str());
  });
}

ML_EXPORT ml_status ml_config_generate(const ml_layout* layout, ml_config** out) {
  if (auto s = require(layout && out, "null argument")) return s;
  return guarded([&] {
    GeneratedConfig g = generate_config(layout->layout);
    *out = new ml_config{std::move(g.config), std::move(g.manifest)};
  });
}

ML_EXPORT ml_status ml_config_manifest(const ml_layout* layout, char** out_text) {
  if (auto s = require(layout && out_text, "null argument")) return s;
  return guarded([&] { *out_text = dup_string(generate_config(layout->layout).manifest); });
}

ML_EXPORT ml_status ml_config_save(const ml_config* config, const char* path) {
  if (auto s = require(config && path, "null argument")) return s;
  return guarded([&] { config->config.save(path); });
}

ML_EXPORT ml_status ml_config_load(const char* path, ml_config** out) {
  if (auto s = require(path && out, "null argument")) return s;
  return guarded([&] { *out = new ml_config{MmuConfig::load(path), ""}; });
}

ML_EXPORT void ml_config_close(ml_config* config) { delete config; }

ML_EXPORT ml_backend ml_config_backend(const ml_config* config) {
  return config->config.is_tlb() ? ML_BACKEND_TLB : ML_BACKEND_PAGETABLE;
}

ML_EXPORT ml_status ml_verify_layout(const ml_layout* layout, const ml_project* project,
                                     ml_report** out) {
  if (auto s = require(layout && project && out, "null argument")) return s;
  return guarded([&] {
    *out = new ml_report{verify_layout(layout->layout, project->project.blocks)};
  });
}

ML_EXPORT ml_status ml_verify_config(const ml_config* config, const ml_layout* layout,
                                     ml_report** out) {
  if (auto s = require(config && layout && out, "null argument")) return s;
  return guarded(
      [&] { *out = new ml_report{verify_mmu_config(config->config, layout->layout)}; });
}

ML_EXPORT ml_status ml_dynamic_verify(const ml_config* config, const ml_layout* layout,
                                      ml_report** out) {
  if (auto s = require(config && layout && out, "null argument")) return s;
  return guarded([&] {
    SimAgent agent(config->config, layout->layout);
    DynamicReport result = run_matrix(build_matrix(layout->layout), agent);
    *out = new ml_report{result.to_report()};
  });
}

ML_EXPORT ml_status ml_mutation_campaign(const ml_config* config, const ml_layout* layout,
                                         uint32_t mutations, uint64_t seed,
                                         uint32_t* out_escaped, ml_report** out) {
  if (auto s = require(config && layout && out, "null argument")) return s;
  return guarded([&] {
    MutationCampaign campaign =
        run_mutation_campaign(config->config, layout->layout, mutations, seed);
    VerificationReport report;
    for (const auto& f : campaign.failures) {
      std::string missed = !f.static_detected ? "static verification" : "dynamic matrix";
      report.add(Severity::Error, "MUTATION_ESCAPED", "-", f.site.what,
                 "bit " + std::to_string(f.site.bit) + " flip escaped " + missed);
    }
    report.add(Severity::Info, "MUTATION_STATS", "-", "",
               std::to_string(campaign.tested) + " of " + std::to_string(campaign.sites_total) +
                   " sites tested, " + std::to_string(campaign.escaped) + " escaped");
    if (out_escaped) *out_escaped = static_cast<uint32_t>(campaign.escaped);
    *out = new ml_report{std::move(report)};
  });
}

ML_EXPORT int ml_report_passed(const ml_report* report) {
  return report->report.passed() ? 1 : 0;
}

ML_EXPORT size_t ml_report_finding_count(const ml_report* report) {
  return report->report.findings().size();
}

ML_EXPORT size_t ml_report_error_count(const ml_report* report) {
  return report->report.error_count();
}

ML_EXPORT ml_status ml_report_render(const ml_report* report, int machine, char** out_text) {
  if (auto s = require(report && out_text, "null argument")) return s;
  return guarded([&] {
    *out_text = dup_string(machine ? report_to_string(report->report)
                                   : report->report.render_text());
  });
}

ML_EXPORT void ml_report_close(ml_report* report) { delete report; }

ML_EXPORT ml_status ml_sim_create(const ml_config* config, const ml_layout* layout,
                                  const char* cost_model_json, ml_sim_mode mode,
                                  ml_sim** out) {
  if (auto s = require(config && layout && out, "null argument")) return s;
  return guarded([&] {
    CostModel cm;
    if (cost_model_json) cm = CostModel::from_json_text(cost_model_json);
    auto* sim = new ml_sim{SimulatedMmu(config->config, layout->layout, cm,
                                        mode == ML_SIM_NAIVE ? SimMode::NaiveRefill
                                                             : SimMode::Static),
                           {}};
    sim->spaces = sim->mmu.spaces();
    *out = sim;
  });
}

ML_EXPORT void ml_sim_close(ml_sim* sim) { delete sim; }

ML_EXPORT ml_status ml_sim_switch(ml_sim* sim, const char* space) {
  if (auto s = require(sim && space, "null argument")) return s;
  return guarded([&] {
    for (const auto& o : sim->spaces) {
      if (o.key() == space) {
        sim->mmu.switch_space(o);
        return;
      }
    }
    throw UnknownSpaceError(space);
  });
}

ML_EXPORT ml_status ml_sim_access(ml_sim* sim, char op, char priv, uint64_t vaddr,
                                  uint32_t size, ml_fault* out_fault, uint64_t* out_paddr) {
  if (auto s = require(sim && out_fault && out_paddr, "null argument")) return s;
  return guarded([&] {
    AccessOp aop;
    if (op == 'R') aop = AccessOp::Read;
    else if (op == 'W') aop = AccessOp::Write;
    else if (op == 'X') aop = AccessOp::Execute;
    else
      throw Error(ErrorCode::InvalidArgument, "op must be R, W or X");
    Privilege p;
    if (priv == 'U') p = Privilege::User;
    else if (priv == 'K') p = Privilege::Kernel;
    else
      throw Error(ErrorCode::InvalidArgument, "privilege must be U or K");
    AccessOutcome outcome = sim->mmu.access(aop, p, vaddr, size);
    if (outcome.translated) {
      *out_fault = ML_FAULT_NONE;
      *out_paddr = outcome.paddr;
    } else {
      *out_paddr = 0;
      switch (outcome.fault) {
        case FaultKind::NoMapping: *out_fault = ML_FAULT_NO_MAPPING; break;
        case FaultKind::PermissionViolation: *out_fault = ML_FAULT_PERMISSION; break;
        case FaultKind::PrivilegeViolation: *out_fault = ML_FAULT_PRIVILEGE; break;
      }
    }
  });
}

ML_EXPORT ml_status ml_sim_run_trace(const ml_config* config, const ml_layout* layout,
                                     const char* trace_path, const char* cost_model_json,
                                     int mode, char** out_json, char** out_text) {
  if (auto s = require(config && layout && trace_path && out_json && out_text,
                       "null argument"))
    return s;
  return guarded([&] {
    CostModel cm;
    if (cost_model_json) cm = CostModel::from_json_text(cost_model_json);
    auto trace = parse_trace(read_file(trace_path));
    if (mode == 2) {
      SimStats st = run_trace(config->config, layout->layout, trace, cm, SimMode::Static);
      SimStats nv = run_trace(config->config, layout->layout, trace, cm, SimMode::NaiveRefill);
      Json j;
      j["format"] = "memlayout/compare";
      j["version"] = 1;
      j["static"] = stats_to_json(st);
      j["naive"] = stats_to_json(nv);
      j["static_total"] = st.cost.total;
      j["naive_total"] = nv.cost.total;
      *out_json = dup_string(j.dump(2) + "\n");
      std::ostringstream os;
      os << "== static ==\n" << stats_to_text(st) << "== naive ==\n" << stats_to_text(nv)
         << "static_total " << st.cost.total << (st.cost.total <= nv.cost.total ? " <= " : " > ")
         << "naive_total " << nv.cost.total << "\n";
      *out_text = dup_string(os.str());
      return;
    }
    SimMode m = mode == 1 ? SimMode::NaiveRefill : SimMode::Static;
    SimStats stats = run_trace(config->config, layout->layout, trace, cm, m);
    *out_json = dup_string(stats_to_json(stats).dump(2) + "\n");
    *out_text = dup_string(stats_to_text(stats));
  });
}

ML_EXPORT ml_status ml_agent_serve_stdio(const ml_config* config, const ml_layout* layout) {
  if (auto s = require(config && layout, "null argument")) return s;
  return guarded([&] {
    SimAgent agent(config->config, layout->layout);
    AgentServer server(agent);
    std::string line;
    while (std::getline(std::cin, line)) {
      if (line == "QUIT") break;
      std::cout << server.handle_line(line) << "\n" << std::flush;
    }
  });
}

}  // extern "C"
