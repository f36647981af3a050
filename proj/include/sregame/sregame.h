#ifndef SREGAME_H
#define SREGAME_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define SG_API __attribute__((visibility("default")))
#else
#define SG_API
#endif

/* Return codes. Values are stable and double as CLI exit statuses. */
typedef enum sg_status {
  SG_OK = 0,
  SG_INTERNAL = 1,
  SG_ASSUMPTION_VIOLATED = 2,
  SG_CONFIG_ERROR = 3,
  SG_DIMENSION_MISMATCH = 4,
  SG_NON_POSITIVE_SCALE = 5,
  SG_SINGULAR_BLOCK = 6,
  SG_MINIMAX_GAP_EXCEEDED = 7,
  SG_CONE_UNSUPPORTED = 8,
  SG_BOUND_VIOLATION = 9,
  SG_STEP_REJECTED = 10,
  SG_GRID_MISMATCH = 11,
  SG_REGRESSION_ILL_CONDITIONED = 12,
  SG_NON_FINITE = 13,
  SG_SADDLE_VIOLATION = 14,
  SG_MISSING_SOLUTION = 15,
  SG_SIGN_VIOLATION = 16,
  SG_CONDITION_REQUIRED = 17,
  SG_CHECK_FAILED = 18,
  SG_INVALID_ARGUMENT = 19
} sg_status;

typedef struct sg_scenario sg_scenario;
typedef struct sg_solution sg_solution;

/* Scenarios. */
SG_API int sg_scenario_load(const char* path, sg_scenario** out);
SG_API int sg_scenario_parse(const char* yaml_text, sg_scenario** out);
SG_API void sg_scenario_free(sg_scenario* s);
SG_API int sg_scenario_set_seed(sg_scenario* s, uint64_t seed);
SG_API int sg_scenario_set_paths(sg_scenario* s, int64_t paths);
SG_API int sg_scenario_set_steps(sg_scenario* s, int steps);
SG_API int sg_scenario_set_workers(sg_scenario* s, int workers);
SG_API int sg_scenario_set_output(sg_scenario* s, const char* dir);
SG_API const char* sg_scenario_output(const sg_scenario* s);
/* Writes the scenario back as YAML; free the string with sg_string_free. */
SG_API int sg_scenario_dump(const sg_scenario* s, char** yaml_out);

/* Runs a named command. Files land in out_dir (NULL uses the scenario's
   output directory). The textual report is returned through report when
   non-NULL and must be released with sg_string_free. A failing check yields
   its error code while the report is still produced. */
SG_API int sg_command(const sg_scenario* s, const char* command, const char* out_dir,
                      char** report);
SG_API int sg_command_count(void);
SG_API const char* sg_command_name(int index);

/* Solving a game scenario: Riccati equation(s) plus the value. */
SG_API int sg_solve(const sg_scenario* s, sg_solution** out);
SG_API void sg_solution_free(sg_solution* sol);
SG_API int sg_solution_nodes(const sg_solution* sol);
SG_API int sg_solution_regimes(const sg_solution* sol);
SG_API int sg_solution_constrained(const sg_solution* sol);
SG_API double sg_solution_time(const sg_solution* sol, int node);
/* which = 0 reads P (or P1 for constrained games), which = 1 reads P2. */
SG_API int sg_solution_P(const sg_solution* sol, int which, int node, int regime, double* out);
SG_API int sg_solution_phi(const sg_solution* sol, int node, int regime, double* out);
SG_API int sg_solution_value(const sg_solution* sol, double* out);

/* Errors. The message belongs to the calling thread and stays valid until
   its next failing call. */
SG_API const char* sg_last_error(void);
SG_API const char* sg_error_name(int code);
SG_API void sg_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
