// Exercises the shared-library C API end to end: parse, validate, plan,
// persist, generate, verify (static/dynamic/mutation), simulate.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "memlayout.h"

namespace {

const char* kReqs = R"(
[block]
owner = kernel
name = text
size = 64K
permissions = kr+kx
cache_policy = normal

[block]
owner = kernel
name = data
size = 64K
permissions = kr+kw
cache_policy = normal

[block]
owner = partition:P1
name = text
size = 16K
permissions = ur+ux+kr+kx
cache_policy = normal

[block]
owner = partition:P1
name = data
size = 16K
permissions = ur+uw+kr+kw
cache_policy = normal
)";

const char* kMap = R"(
[memory_map]
min_page_size = 4K
[region]
name = ddr
base = 0x10000000
size = 32M
class = external_ram
access_cost = 10
)";

const char* kMmu = R"(
[mmu]
kind = tlb_fixed
entry_count = 16
min_entry_size = 4K
max_entry_size = 256M
pid_bits = 14
)";

std::string temp_path(const std::string& name) {
  return std::string("capi_test_") + name;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

struct Cleanup {
  std::vector<std::string> paths;
  ~Cleanup() {
    for (const auto& p : paths) std::remove(p.c_str());
  }
};

}  // namespace

TEST_CASE("C API pipeline") {
  Cleanup cleanup;

  ml_project* project = nullptr;
  REQUIRE(ml_project_from_strings(kReqs, kMap, kMmu, &project) == ML_OK);
  CHECK(ml_project_backend(project) == ML_BACKEND_TLB);

  ml_report* validation = nullptr;
  REQUIRE(ml_project_validate(project, 1, &validation) == ML_OK);
  CHECK(ml_report_passed(validation) == 1);
  CHECK(ml_report_finding_count(validation) == 0);
  ml_report_close(validation);

  ml_layout* layout = nullptr;
  REQUIRE(ml_layout_plan(project, &layout) == ML_OK);
  CHECK(ml_layout_backend(layout) == ML_BACKEND_TLB);

  char* summary = nullptr;
  REQUIRE(ml_layout_summary(layout, &summary) == ML_OK);
  CHECK(std::string(summary).find("P1") != std::string::npos);
  ml_string_free(summary);

  const std::string layout_path = temp_path("layout.json");
  cleanup.paths.push_back(layout_path);
  REQUIRE(ml_layout_save(layout, layout_path.c_str()) == ML_OK);
  ml_layout* loaded = nullptr;
  REQUIRE(ml_layout_load(layout_path.c_str(), &loaded) == ML_OK);

  ml_config* config = nullptr;
  REQUIRE(ml_config_generate(loaded, &config) == ML_OK);
  CHECK(ml_config_backend(config) == ML_BACKEND_TLB);
  const std::string config_path = temp_path("config.mltc");
  cleanup.paths.push_back(config_path);
  REQUIRE(ml_config_save(config, config_path.c_str()) == ML_OK);
  ml_config* config2 = nullptr;
  REQUIRE(ml_config_load(config_path.c_str(), &config2) == ML_OK);

  ml_report* rl = nullptr;
  REQUIRE(ml_verify_layout(loaded, project, &rl) == ML_OK);
  CHECK(ml_report_passed(rl) == 1);
  ml_report_close(rl);

  ml_report* rc = nullptr;
  REQUIRE(ml_verify_config(config2, loaded, &rc) == ML_OK);
  CHECK(ml_report_passed(rc) == 1);
  char* rendered = nullptr;
  REQUIRE(ml_report_render(rc, 1, &rendered) == ML_OK);
  CHECK(std::string(rendered).find("memlayout/report") != std::string::npos);
  ml_string_free(rendered);
  ml_report_close(rc);

  ml_report* rd = nullptr;
  REQUIRE(ml_dynamic_verify(config2, loaded, &rd) == ML_OK);
  CHECK(ml_report_passed(rd) == 1);
  ml_report_close(rd);

  uint32_t escaped = 99;
  ml_report* rm = nullptr;
  REQUIRE(ml_mutation_campaign(config2, loaded, 64, 7, &escaped, &rm) == ML_OK);
  CHECK(escaped == 0);
  ml_report_close(rm);

  // Simulation over the C API.
  ml_sim* sim = nullptr;
  REQUIRE(ml_sim_create(config2, loaded, nullptr, ML_SIM_STATIC, &sim) == ML_OK);
  REQUIRE(ml_sim_switch(sim, "P1") == ML_OK);
  CHECK(ml_sim_switch(sim, "nowhere") == ML_ERR_UNKNOWN_SPACE);
  ml_fault fault;
  uint64_t paddr = 0;
  // The layout is identity-mapped here; the partition text sits somewhere in
  // RAM, so probe the first mapped kernel page instead via a report-free
  // check: an unmapped address faults.
  REQUIRE(ml_sim_access(sim, 'R', 'K', 0xDEAD0000ull, 4, &fault, &paddr) == ML_OK);
  CHECK(fault == ML_FAULT_NO_MAPPING);
  ml_sim_close(sim);

  // Trace replay.
  const std::string trace_path = temp_path("trace.txt");
  cleanup.paths.push_back(trace_path);
  write_file(trace_path, "SWITCH P1\n");
  char* json = nullptr;
  char* text = nullptr;
  REQUIRE(ml_sim_run_trace(config2, loaded, trace_path.c_str(), nullptr, 2, &json, &text) ==
          ML_OK);
  CHECK(std::string(json).find("static_total") != std::string::npos);
  ml_string_free(json);
  ml_string_free(text);

  ml_config_close(config2);
  ml_config_close(config);
  ml_layout_close(loaded);
  ml_layout_close(layout);
  ml_project_close(project);
}

TEST_CASE("C API error paths") {
  ml_project* project = nullptr;
  CHECK(ml_project_open("does_not_exist_1", "does_not_exist_2", "does_not_exist_3",
                        &project) == ML_ERR_IO);
  CHECK(std::string(ml_last_error()).find("does_not_exist") != std::string::npos);

  CHECK(ml_project_from_strings("[block]\nbroken", kMap, kMmu, &project) == ML_ERR_SCHEMA);

  const char* bad_semantics = R"(
[block]
owner = kernel
name = x
size = 4K
permissions = ur
cache_policy = normal
)";
  CHECK(ml_project_from_strings(bad_semantics, kMap, kMmu, &project) == ML_ERR_SEMANTIC);

  // Infeasible: more blocks than TLB entries.
  std::string many;
  for (int i = 0; i < 20; ++i)
    many += "[block]\nowner = kernel\nname = b" + std::to_string(i) +
            "\nsize = 4K\npermissions = kr\ncache_policy = normal\n\n";
  ml_project* big = nullptr;
  REQUIRE(ml_project_from_strings(many.c_str(), kMap, kMmu, &big) == ML_OK);
  ml_layout* layout = nullptr;
  CHECK(ml_layout_plan(big, &layout) == ML_ERR_INFEASIBLE);
  ml_project_close(big);

  CHECK(ml_layout_load("missing.json", &layout) == ML_ERR_IO);
  ml_config* config = nullptr;
  CHECK(ml_config_load("missing.mltc", &config) == ML_ERR_IO);
  CHECK(ml_project_open(nullptr, nullptr, nullptr, nullptr) == ML_ERR_INVALID_ARG);
}
