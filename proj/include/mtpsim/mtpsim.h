#ifndef MTPSIM_H
#define MTPSIM_H

/* C interface to the symbolic MTProto simulator. All handles are opaque.
 * Functions returning mtp_status write their result through the last
 * argument only on success (MTP_OK or MTP_VIOLATED). Strings returned
 * through char** are owned by the caller and released with
 * mtp_string_free. mtp_last_error describes the most recent failure on the
 * calling thread. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MTPSIM_API __declspec(dllexport)
#else
#define MTPSIM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct mtp_scenario mtp_scenario;
typedef struct mtp_trace mtp_trace;
typedef struct mtp_verdict mtp_verdict;

typedef enum {
  MTP_OK = 0,
  MTP_VIOLATED = 1,   /* query checked and violated */
  MTP_ERR_INPUT = 2,  /* malformed scenario, trace, query or argument */
  MTP_ERR_BOUNDS = 3, /* a search or run bound was exceeded */
  MTP_ERR_SCRIPT = 4, /* an attacker script step is not executable */
  MTP_ERR_UNKNOWN = 5,/* unknown preset or query name */
  MTP_ERR_INTERNAL = 6
} mtp_status;

typedef struct {
  int32_t max_actions;     /* < 0: scenario bound */
  int32_t jobs;            /* worker threads, >= 1 */
  int32_t synthesis_depth; /* < 0: scenario bound */
  int32_t sessions;        /* < 0: scenario setting */
} mtp_explore_options;

MTPSIM_API const char* mtp_version(void);
MTPSIM_API const char* mtp_last_error(void);
MTPSIM_API void mtp_string_free(char* s);
MTPSIM_API void mtp_explore_options_init(mtp_explore_options* opts);

MTPSIM_API mtp_status mtp_scenario_load_file(const char* path, mtp_scenario** out);
MTPSIM_API mtp_status mtp_scenario_load_json(const char* json, mtp_scenario** out);
MTPSIM_API mtp_status mtp_scenario_preset(const char* name, mtp_scenario** out);
MTPSIM_API mtp_status mtp_scenario_to_json(const mtp_scenario* sc, char** out);
MTPSIM_API mtp_status mtp_scenario_set_seed(mtp_scenario* sc, uint64_t seed);
MTPSIM_API void mtp_scenario_free(mtp_scenario* sc);

/* Runs a Passive or Scripted scenario. */
MTPSIM_API mtp_status mtp_run(const mtp_scenario* sc, mtp_trace** out);

MTPSIM_API mtp_status mtp_trace_load_file(const char* path, mtp_trace** out);
MTPSIM_API mtp_status mtp_trace_write_file(const mtp_trace* t, const char* path);
MTPSIM_API mtp_status mtp_trace_to_jsonl(const mtp_trace* t, char** out);
MTPSIM_API mtp_status mtp_trace_summary(const mtp_trace* t, char** out);
/* MTP_OK if every delivered term was derivable when delivered, otherwise
 * MTP_VIOLATED with the offending entry in mtp_last_error. */
MTPSIM_API mtp_status mtp_trace_check_soundness(const mtp_trace* t, int32_t depth);
MTPSIM_API void mtp_trace_free(mtp_trace* t);

/* `query` is a built-in name (optionally "name~label") or a path to a query
 * JSON file. Returns MTP_OK if the query holds, MTP_VIOLATED otherwise. */
MTPSIM_API mtp_status mtp_check(const mtp_trace* t, const char* query, mtp_verdict** out);
/* Bounded exploration. On MTP_VIOLATED, *counterexample (if non-null)
 * receives the replayed counterexample trace. */
MTPSIM_API mtp_status mtp_explore(const mtp_scenario* sc, const char* query,
                                  const mtp_explore_options* opts, mtp_verdict** out,
                                  mtp_trace** counterexample);

MTPSIM_API int mtp_verdict_holds(const mtp_verdict* v);
MTPSIM_API mtp_status mtp_verdict_report(const mtp_verdict* v, char** out);
MTPSIM_API mtp_status mtp_verdict_json(const mtp_verdict* v, char** out);
MTPSIM_API void mtp_verdict_free(mtp_verdict* v);

/* Newline-separated "name<TAB>description" lines. */
MTPSIM_API mtp_status mtp_list_queries(char** out);
MTPSIM_API mtp_status mtp_list_presets(char** out);
/* The query paired with a preset. */
MTPSIM_API mtp_status mtp_preset_query(const char* preset, char** out);

#ifdef __cplusplus
}
#endif

#endif
