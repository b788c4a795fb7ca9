/*
 * memlayout — static memory layout and MMU configuration toolchain.
 *
 * C API of the shared library.  All objects are opaque handles created and
 * destroyed by the library; every function returns an ml_status, with
 * ml_last_error() holding a human-readable message for the last failure on
 * the calling thread.  Returned strings are malloc'd by the library and must
 * be released with ml_string_free().
 */
#ifndef MEMLAYOUT_H
#define MEMLAYOUT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ml_status {
  ML_OK = 0,
  ML_ERR_IO = 1,
  ML_ERR_SCHEMA = 2,           /* document violates the published schema */
  ML_ERR_SEMANTIC = 3,         /* document violates a domain invariant */
  ML_ERR_INFEASIBLE = 4,       /* no layout satisfies the requirements */
  ML_ERR_BUDGET = 5,           /* TLB entry budget exceeded */
  ML_ERR_RANGE = 6,            /* value exceeds an encodable width */
  ML_ERR_ALIGNMENT = 7,
  ML_ERR_FORMAT = 8,           /* artifact or interchange file malformed */
  ML_ERR_MALFORMED_IMAGE = 9,  /* page-table image fails its walk */
  ML_ERR_DECODE = 10,
  ML_ERR_UNKNOWN_SPACE = 11,
  ML_ERR_AGENT = 12,           /* tool-agent channel failed */
  ML_ERR_TRACE = 13,           /* trace file rejected */
  ML_ERR_BACKEND_MISMATCH = 14,
  ML_ERR_INVALID_ARG = 15,
  ML_ERR_INTERNAL = 16
} ml_status;

typedef enum ml_backend { ML_BACKEND_TLB = 0, ML_BACKEND_PAGETABLE = 1 } ml_backend;

typedef struct ml_project ml_project; /* parsed requirements + memory map + MMU model */
typedef struct ml_layout ml_layout;   /* resolved memory layout */
typedef struct ml_config ml_config;   /* MMU configuration artifact (MLTC or MLPT) */
typedef struct ml_report ml_report;   /* verification findings */
typedef struct ml_sim ml_sim;         /* deterministic MMU simulator */

const char* ml_status_name(ml_status status);
const char* ml_last_error(void);
void ml_string_free(char* s);

/* ---- project documents ---- */

ml_status ml_project_open(const char* requirements_path, const char* memmap_path,
                          const char* mmu_path, ml_project** out);
ml_status ml_project_from_strings(const char* requirements_text, const char* memmap_text,
                                  const char* mmu_text, ml_project** out);
void ml_project_close(ml_project* project);
ml_backend ml_project_backend(const ml_project* project);

/* strict_wx != 0 flags blocks that are both writable and executable. */
ml_status ml_project_validate(const ml_project* project, int strict_wx, ml_report** out);

/* ---- layout ---- */

ml_status ml_layout_plan(const ml_project* project, ml_layout** out);
ml_status ml_layout_save(const ml_layout* layout, const char* path);
ml_status ml_layout_load(const char* path, ml_layout** out);
void ml_layout_close(ml_layout* layout);
ml_backend ml_layout_backend(const ml_layout* layout);
ml_status ml_layout_feasibility(const ml_layout* layout, int zero_miss, ml_report** out);
ml_status ml_layout_summary(const ml_layout* layout, char** out_text);

/* ---- MMU configuration ---- */

ml_status ml_config_generate(const ml_layout* layout, ml_config** out);
ml_status ml_config_manifest(const ml_layout* layout, char** out_text);
ml_status ml_config_save(const ml_config* config, const char* path);
ml_status ml_config_load(const char* path, ml_config** out);
void ml_config_close(ml_config* config);
ml_backend ml_config_backend(const ml_config* config);

/* ---- static verification ---- */

ml_status ml_verify_layout(const ml_layout* layout, const ml_project* project,
                           ml_report** out);
ml_status ml_verify_config(const ml_config* config, const ml_layout* layout, ml_report** out);

/* ---- dynamic verification (in-process simulator agent) ---- */

ml_status ml_dynamic_verify(const ml_config* config, const ml_layout* layout, ml_report** out);

/* Flips single bits of the artifact: every mutation must be caught by
 * static verification, every translation-visible one by the dynamic matrix.
 * mutations = 0 exercises every site.  *out_escaped reports the sites that
 * slipped through (0 on a fully detecting toolchain). */
ml_status ml_mutation_campaign(const ml_config* config, const ml_layout* layout,
                               uint32_t mutations, uint64_t seed, uint32_t* out_escaped,
                               ml_report** out);

/* ---- reports ---- */

int ml_report_passed(const ml_report* report);
size_t ml_report_finding_count(const ml_report* report);
size_t ml_report_error_count(const ml_report* report);
/* machine != 0 renders the canonical interchange form (JSON). */
ml_status ml_report_render(const ml_report* report, int machine, char** out_text);
void ml_report_close(ml_report* report);

/* ---- simulation ---- */

typedef enum ml_sim_mode { ML_SIM_STATIC = 0, ML_SIM_NAIVE = 1 } ml_sim_mode;
typedef enum ml_fault {
  ML_FAULT_NONE = 0,
  ML_FAULT_NO_MAPPING = 1,
  ML_FAULT_PERMISSION = 2,
  ML_FAULT_PRIVILEGE = 3
} ml_fault;

/* cost_model_json may be NULL for the built-in unit costs. */
ml_status ml_sim_create(const ml_config* config, const ml_layout* layout,
                        const char* cost_model_json, ml_sim_mode mode, ml_sim** out);
void ml_sim_close(ml_sim* sim);
ml_status ml_sim_switch(ml_sim* sim, const char* space);
/* op: 'R', 'W' or 'X'; priv: 'U' or 'K'. */
ml_status ml_sim_access(ml_sim* sim, char op, char priv, uint64_t vaddr, uint32_t size,
                        ml_fault* out_fault, uint64_t* out_paddr);

/* Replays a trace file; returns the stats in both renderings.  mode 2 runs
 * the static-vs-naive comparison. */
ml_status ml_sim_run_trace(const ml_config* config, const ml_layout* layout,
                           const char* trace_path, const char* cost_model_json, int mode,
                           char** out_json, char** out_text);

/* Serves the line-oriented tool-agent protocol on stdin/stdout until EOF. */
ml_status ml_agent_serve_stdio(const ml_config* config, const ml_layout* layout);

#ifdef __cplusplus
}
#endif

#endif /* MEMLAYOUT_H */
