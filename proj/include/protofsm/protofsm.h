#ifndef PROTOFSM_PROTOFSM_H
#define PROTOFSM_PROTOFSM_H

#include <stddef.h>

#if defined(_WIN32)
#define PFSM_API __declspec(dllimport)
#elif defined(PFSM_BUILDING)
#define PFSM_API __attribute__((visibility("default")))
#else
#define PFSM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Also used as the CLI exit codes. */
typedef enum pfsm_status {
  PFSM_OK = 0,
  PFSM_E_INTERNAL = 1,
  PFSM_E_CONFIG = 2,
  PFSM_E_REPO = 3,
  PFSM_E_INFERENCE = 4,
  PFSM_E_BACKEND = 5,
  PFSM_E_INPUT = 6
} pfsm_status;

typedef struct pfsm_fsm pfsm_fsm;
typedef struct pfsm_ground_truth pfsm_ground_truth;
typedef struct pfsm_config pfsm_config;

PFSM_API const char* pfsm_version(void);

/* Message of the last failed call on this thread, "" if none. Valid until the
   next call on the same thread. */
PFSM_API const char* pfsm_last_error(void);

/* 0 debug, 1 info, 2 warnings (default), 3 errors only. Diagnostics go to
   stderr. */
PFSM_API void pfsm_set_log_level(int level);

/* Every char** output is heap memory owned by the caller. */
PFSM_API void pfsm_string_free(char* s);

PFSM_API pfsm_status pfsm_canonicalize_name(const char* raw, char** out);

/* FSM documents. */
PFSM_API pfsm_status pfsm_fsm_parse(const char* json, pfsm_fsm** out);
PFSM_API pfsm_status pfsm_fsm_load(const char* path, pfsm_fsm** out);
PFSM_API void pfsm_fsm_free(pfsm_fsm* fsm);
PFSM_API pfsm_status pfsm_fsm_serialize(const pfsm_fsm* fsm, char** out);
PFSM_API pfsm_status pfsm_fsm_save(const pfsm_fsm* fsm, const char* path);
PFSM_API pfsm_status pfsm_fsm_counts(const pfsm_fsm* fsm, size_t* states, size_t* transitions);

/* JSON array of {"severity", "message"}; *valid is 1 when no error-severity
   entry is present. */
PFSM_API pfsm_status pfsm_fsm_validate(const pfsm_fsm* fsm, int strict, int* valid, char** violations_json);

PFSM_API pfsm_status pfsm_fsm_determinize(const pfsm_fsm* fsm, pfsm_fsm** out);

/* Diff document; table_out may be NULL. */
PFSM_API pfsm_status pfsm_fsm_diff(const pfsm_fsm* a, const pfsm_fsm* b, char** json_out, char** table_out);

/* Ground truth: an FSM document with an optional "aliases" object. */
PFSM_API pfsm_status pfsm_ground_truth_load(const char* path, pfsm_ground_truth** out);
PFSM_API void pfsm_ground_truth_free(pfsm_ground_truth* gt);

/* Report document and S/T/C/PC/I/NF/P/R table; table_out may be NULL. */
PFSM_API pfsm_status pfsm_evaluate(const pfsm_fsm* inferred, const pfsm_ground_truth* gt, const char* label,
                                   char** report_json, char** table_out);

/* Fractions in [0, 1]; the *_undefined flags mark zero denominators. */
PFSM_API pfsm_status pfsm_metrics(size_t c, size_t pc, size_t ic, size_t nf, double* precision, double* recall,
                                  int* precision_undefined, int* recall_undefined);

/* Transition-cover sequences as a JSON document. When templates and out_dir
   are both non-NULL the seed files and manifest are written too and listed
   under "files". templates is a JSON map file or a directory of .raw files. */
PFSM_API pfsm_status pfsm_seeds_generate(const pfsm_fsm* fsm, const char* templates, const char* out_dir,
                                         char** json_out);

/* Run configuration. Relative paths resolve against the config file's
   directory (pfsm_config_load) or base_dir (pfsm_config_parse). */
PFSM_API pfsm_status pfsm_config_load(const char* path, pfsm_config** out);
PFSM_API pfsm_status pfsm_config_parse(const char* json, const char* base_dir, pfsm_config** out);
/* Dotted key override, e.g. ("consensus.iterations", "1"). value is read as
   JSON when it parses, otherwise as a string. Revalidates the config. */
PFSM_API pfsm_status pfsm_config_set(pfsm_config* cfg, const char* key, const char* value);
/* Effective config with absolute paths. Never contains credential values. */
PFSM_API pfsm_status pfsm_config_dump(const pfsm_config* cfg, char** json_out);
PFSM_API void pfsm_config_free(pfsm_config* cfg);

/* Builds and writes the index. Summary document plus the per-directory match
   rate table; table_out may be NULL. */
PFSM_API pfsm_status pfsm_index_build(const pfsm_config* cfg, char** summary_json, char** table_out);

/* Runs inference and writes fsm.json and report.json to the output
   directory. On failure the partial report is still written. */
PFSM_API pfsm_status pfsm_infer(const pfsm_config* cfg, int build_index, char** summary_json);

#ifdef __cplusplus
}
#endif

#endif
