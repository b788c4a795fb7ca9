// Command-line front end for the memlayout pipeline:
//   layout -> generate -> verify (static/dynamic) -> simulate.
// Exit codes follow the CI contract: 0 verified/ok, 1 findings or an
// infeasible project, 2 tool failure (unreadable inputs, bad invocation).

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "memlayout.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFindings = 1;
constexpr int kExitFailure = 2;

int exit_for(ml_status status) {
  switch (status) {
    case ML_OK:
      return kExitOk;
    case ML_ERR_INFEASIBLE:
    case ML_ERR_BUDGET:
      return kExitFindings;
    default:
      return kExitFailure;
  }
}

int fail(ml_status status, const std::string& when) {
  std::cerr << "error (" << ml_status_name(status) << ") " << when << ": "
            << ml_last_error() << "\n";
  return exit_for(status);
}

struct StringOut {
  char* value = nullptr;
  ~StringOut() { ml_string_free(value); }
};

// Prints a report in the selected format, returns the exit code it implies.
int emit_report(ml_report* report, const std::string& format, const std::string& heading) {
  StringOut text;
  if (ml_report_render(report, format == "machine" ? 1 : 0, &text.value) != ML_OK) {
    std::cerr << "error rendering report: " << ml_last_error() << "\n";
    return kExitFailure;
  }
  if (!heading.empty() && format != "machine") std::cout << "== " << heading << " ==\n";
  std::cout << text.value;
  return ml_report_passed(report) ? kExitOk : kExitFindings;
}

bool write_text_file(const std::string& path, const char* text) {
  FILE* f = ::fopen(path.c_str(), "wb");
  if (!f) return false;
  ::fwrite(text, 1, ::strlen(text), f);
  ::fclose(f);
  return true;
}

bool backend_matches(const std::string& requested, ml_backend actual) {
  if (requested.empty()) return true;
  return (requested == "tlb") == (actual == ML_BACKEND_TLB);
}

std::uint64_t seed_from_env() {
  const char* s = std::getenv("MEMLAYOUT_SEED");
  if (!s) return 0x6d656d6c61796f75ull;
  return std::strtoull(s, nullptr, 0);
}

std::string read_optional_file(const std::string& path, bool& ok) {
  ok = true;
  if (path.empty()) return {};
  FILE* f = ::fopen(path.c_str(), "rb");
  if (!f) {
    ok = false;
    return {};
  }
  std::string out;
  char buf[4096];
  size_t n;
  while ((n = ::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
  ::fclose(f);
  return out;
}

struct ProjectArgs {
  std::string requirements;
  std::string memmap;
  std::string mmu;
};

void add_project_options(CLI::App* cmd, ProjectArgs& args) {
  cmd->add_option("-r,--requirements", args.requirements, "memory block requirements document")
      ->required();
  cmd->add_option("-m,--memmap", args.memmap, "system memory map document")->required();
  cmd->add_option("-u,--mmu", args.mmu, "MMU model document")->required();
}

int cmd_layout(const ProjectArgs& proj, const std::string& out_dir,
               const std::string& backend, bool strict_wx, const std::string& format) {
  ml_project* project = nullptr;
  if (auto s = ml_project_open(proj.requirements.c_str(), proj.memmap.c_str(),
                               proj.mmu.c_str(), &project))
    return fail(s, "parsing project documents");

  if (!backend_matches(backend, ml_project_backend(project))) {
    std::cerr << "[ERROR] BACKEND_MISMATCH -: --backend " << backend
              << " contradicts the MMU model document\n";
    ml_project_close(project);
    return kExitFindings;
  }

  ml_report* validation = nullptr;
  if (auto s = ml_project_validate(project, strict_wx ? 1 : 0, &validation)) {
    ml_project_close(project);
    return fail(s, "validating requirements");
  }
  int rc = kExitOk;
  if (ml_report_finding_count(validation) > 0 || format == "machine")
    rc = emit_report(validation, format, "requirement validation");
  bool valid = ml_report_passed(validation) != 0;
  if (!out_dir.empty()) {
    StringOut rendered;
    ml_report_render(validation, 1, &rendered.value);
    write_text_file(out_dir + "/validate-report.json", rendered.value);
  }
  ml_report_close(validation);
  if (!valid) {
    ml_project_close(project);
    return kExitFindings;
  }

  ml_layout* layout = nullptr;
  if (auto s = ml_layout_plan(project, &layout)) {
    ml_project_close(project);
    return fail(s, "planning the memory layout");
  }
  if (!out_dir.empty()) {
    if (auto s = ml_layout_save(layout, (out_dir + "/layout.json").c_str())) {
      ml_layout_close(layout);
      ml_project_close(project);
      return fail(s, "writing layout.json");
    }
  }
  StringOut summary;
  if (ml_layout_summary(layout, &summary.value) == ML_OK && format != "machine")
    std::cout << summary.value;
  if (!out_dir.empty() && format != "machine")
    std::cout << "layout written to " << out_dir << "/layout.json\n";
  ml_layout_close(layout);
  ml_project_close(project);
  return rc;
}

int cmd_generate(const std::string& layout_path, const std::string& out_dir,
                 const std::string& backend, const std::string& format) {
  ml_layout* layout = nullptr;
  if (auto s = ml_layout_load(layout_path.c_str(), &layout))
    return fail(s, "loading the layout");
  if (!backend_matches(backend, ml_layout_backend(layout))) {
    std::cerr << "[ERROR] BACKEND_MISMATCH -: --backend " << backend
              << " contradicts the layout's MMU model\n";
    ml_layout_close(layout);
    return kExitFindings;
  }
  ml_config* config = nullptr;
  if (auto s = ml_config_generate(layout, &config)) {
    ml_layout_close(layout);
    return fail(s, "generating the MMU configuration");
  }
  std::string name = ml_config_backend(config) == ML_BACKEND_TLB ? "config.mltc" : "config.mlpt";
  std::string path = out_dir + "/" + name;
  if (auto s = ml_config_save(config, path.c_str())) {
    ml_config_close(config);
    ml_layout_close(layout);
    return fail(s, "writing " + path);
  }
  StringOut manifest;
  if (ml_config_manifest(layout, &manifest.value) == ML_OK)
    write_text_file(out_dir + "/" + name + ".manifest.json", manifest.value);
  if (format != "machine") std::cout << "configuration written to " << path << "\n";
  ml_config_close(config);
  ml_layout_close(layout);
  return kExitOk;
}

int cmd_verify(const ProjectArgs& proj, const std::string& layout_path,
               const std::string& config_path, bool run_static, bool run_dynamic,
               unsigned mutate, bool strict_wx, const std::string& format) {
  ml_project* project = nullptr;
  if (auto s = ml_project_open(proj.requirements.c_str(), proj.memmap.c_str(),
                               proj.mmu.c_str(), &project))
    return fail(s, "parsing project documents");
  ml_layout* layout = nullptr;
  if (auto s = ml_layout_load(layout_path.c_str(), &layout)) {
    ml_project_close(project);
    return fail(s, "loading the layout");
  }
  ml_config* config = nullptr;
  if (auto s = ml_config_load(config_path.c_str(), &config)) {
    ml_layout_close(layout);
    ml_project_close(project);
    return fail(s, "loading the MMU configuration");
  }

  int rc = kExitOk;
  auto step = [&](const char* name, ml_status s, ml_report** report) {
    if (s != ML_OK) {
      rc = std::max(rc, fail(s, name));
      return;
    }
    rc = std::max(rc, emit_report(*report, format, name));
    ml_report_close(*report);
    *report = nullptr;
  };

  ml_report* r = nullptr;
  if (run_static) {
    step("requirement validation", ml_project_validate(project, strict_wx ? 1 : 0, &r), &r);
    step("layout vs requirements", ml_verify_layout(layout, project, &r), &r);
    step("configuration vs layout", ml_verify_config(config, layout, &r), &r);
  }
  if (run_dynamic) {
    step("dynamic access matrix", ml_dynamic_verify(config, layout, &r), &r);
  }
  if (mutate > 0) {
    uint32_t escaped = 0;
    ml_status s = ml_mutation_campaign(config, layout, mutate, seed_from_env(), &escaped, &r);
    step("mutation campaign", s, &r);
    if (s == ML_OK && escaped > 0) rc = std::max(rc, kExitFindings);
  }

  ml_config_close(config);
  ml_layout_close(layout);
  ml_project_close(project);
  return rc;
}

int cmd_simulate(const std::string& config_path, const std::string& layout_path,
                 const std::string& trace_path, const std::string& cost_model_path,
                 const std::string& mode, const std::string& format) {
  ml_layout* layout = nullptr;
  if (auto s = ml_layout_load(layout_path.c_str(), &layout))
    return fail(s, "loading the layout");
  ml_config* config = nullptr;
  if (auto s = ml_config_load(config_path.c_str(), &config)) {
    ml_layout_close(layout);
    return fail(s, "loading the MMU configuration");
  }
  bool cm_ok = true;
  std::string cm_text = read_optional_file(cost_model_path, cm_ok);
  if (!cm_ok) {
    std::cerr << "error: cannot read cost model " << cost_model_path << "\n";
    ml_config_close(config);
    ml_layout_close(layout);
    return kExitFailure;
  }
  int mode_num = mode == "naive" ? 1 : mode == "compare" ? 2 : 0;
  StringOut json, text;
  ml_status s =
      ml_sim_run_trace(config, layout, trace_path.c_str(),
                       cm_text.empty() ? nullptr : cm_text.c_str(), mode_num, &json.value,
                       &text.value);
  int rc;
  if (s != ML_OK) {
    rc = fail(s, "replaying the trace");
  } else {
    std::cout << (format == "machine" ? json.value : text.value);
    rc = kExitOk;
  }
  ml_config_close(config);
  ml_layout_close(layout);
  return rc;
}

int cmd_agent(const std::string& config_path, const std::string& layout_path) {
  ml_layout* layout = nullptr;
  if (auto s = ml_layout_load(layout_path.c_str(), &layout))
    return fail(s, "loading the layout");
  ml_config* config = nullptr;
  if (auto s = ml_config_load(config_path.c_str(), &config)) {
    ml_layout_close(layout);
    return fail(s, "loading the MMU configuration");
  }
  ml_status s = ml_agent_serve_stdio(config, layout);
  ml_config_close(config);
  ml_layout_close(layout);
  return s == ML_OK ? kExitOk : fail(s, "serving the agent protocol");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"static memory layout and MMU configuration toolchain"};
  app.require_subcommand(1);

  std::string format = "text";
  auto add_format = [&format](CLI::App* cmd) {
    cmd->add_option("--format", format, "report rendering on stdout")
        ->check(CLI::IsMember({"text", "machine"}));
  };

  ProjectArgs proj;
  std::string out_dir = ".";
  std::string backend;
  bool strict_wx = true;
  std::string layout_path, config_path, trace_path, cost_model, mode = "static";
  unsigned mutate = 0;

  auto* layout_cmd = app.add_subcommand("layout", "resolve a memory layout from requirements");
  add_project_options(layout_cmd, proj);
  layout_cmd->add_option("-o,--out", out_dir, "output directory");
  layout_cmd->add_option("--backend", backend, "assert the MMU backend")
      ->check(CLI::IsMember({"tlb", "pagetable"}));
  layout_cmd->add_flag("--strict-wx,!--no-strict-wx", strict_wx,
                       "flag write+exec blocks (default on)");
  add_format(layout_cmd);

  auto* gen_cmd = app.add_subcommand("generate", "emit the MMU configuration artifact");
  gen_cmd->add_option("-l,--layout", layout_path, "layout file")->required();
  gen_cmd->add_option("-o,--out", out_dir, "output directory");
  gen_cmd->add_option("--backend", backend, "assert the MMU backend")
      ->check(CLI::IsMember({"tlb", "pagetable"}));
  add_format(gen_cmd);

  auto* verify_cmd = app.add_subcommand("verify", "static and dynamic verification");
  add_project_options(verify_cmd, proj);
  verify_cmd->add_option("-l,--layout", layout_path, "layout file")->required();
  verify_cmd->add_option("-c,--config", config_path, "MMU configuration artifact")->required();
  bool run_static = false, run_dynamic = false;
  verify_cmd->add_flag("--static", run_static, "run static verification");
  verify_cmd->add_flag("--dynamic", run_dynamic, "run the dynamic access matrix");
  verify_cmd->add_option("--mutate", mutate,
                         "also run N random single-bit mutations (0 = skip)");
  verify_cmd->add_flag("--strict-wx,!--no-strict-wx", strict_wx,
                       "flag write+exec blocks (default on)");
  add_format(verify_cmd);

  auto* sim_cmd = app.add_subcommand("simulate", "replay an access trace");
  sim_cmd->add_option("-c,--config", config_path, "MMU configuration artifact")->required();
  sim_cmd->add_option("-l,--layout", layout_path, "layout file")->required();
  sim_cmd->add_option("-t,--trace", trace_path, "trace file")->required();
  sim_cmd->add_option("--cost-model", cost_model, "cost model JSON file");
  sim_cmd->add_option("--mode", mode, "static, naive or compare")
      ->check(CLI::IsMember({"static", "naive", "compare"}));
  add_format(sim_cmd);

  auto* agent_cmd = app.add_subcommand("agent", "serve the tool-agent protocol on stdio");
  agent_cmd->add_option("-c,--config", config_path, "MMU configuration artifact")->required();
  agent_cmd->add_option("-l,--layout", layout_path, "layout file")->required();

  CLI11_PARSE(app, argc, argv);

  if (layout_cmd->parsed()) return cmd_layout(proj, out_dir, backend, strict_wx, format);
  if (gen_cmd->parsed()) return cmd_generate(layout_path, out_dir, backend, format);
  if (verify_cmd->parsed()) {
    if (!run_static && !run_dynamic && mutate == 0) {
      run_static = true;
      run_dynamic = true;
    }
    return cmd_verify(proj, layout_path, config_path, run_static, run_dynamic, mutate,
                      strict_wx, format);
  }
  if (sim_cmd->parsed())
    return cmd_simulate(config_path, layout_path, trace_path, cost_model, mode, format);
  if (agent_cmd->parsed()) return cmd_agent(config_path, layout_path);
  return kExitFailure;
}
