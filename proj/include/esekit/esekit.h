/* esekit C interface. Every call returns a status; on failure the context
 * keeps a message retrievable with esekit_last_error. Strings returned
 * through char** are owned by the caller and released with
 * esekit_string_free. A context must not be used from two threads at once. */
#ifndef ESEKIT_H
#define ESEKIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(ESEKIT_BUILDING)
#define ESEKIT_API __attribute__((visibility("default")))
#else
#define ESEKIT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct esekit_context esekit_context;

/* Values double as CLI exit codes (internal errors excepted). */
typedef enum {
  ESEKIT_OK = 0,
  ESEKIT_DOMAIN = 1,      /* invalid input, failed invariant, no solution */
  ESEKIT_USAGE = 2,       /* bad arguments or options */
  ESEKIT_ENVIRONMENT = 3, /* filesystem, sandbox or endpoint failure */
  ESEKIT_INTERNAL = 4
} esekit_status;

ESEKIT_API const char* esekit_version(void);

ESEKIT_API esekit_status esekit_context_new(esekit_context** out);
ESEKIT_API void esekit_context_free(esekit_context* ctx);
/* Message of the last failed call on ctx; "" when none. */
ESEKIT_API const char* esekit_last_error(const esekit_context* ctx);
ESEKIT_API void esekit_string_free(char* s);

ESEKIT_API esekit_status esekit_set_jobs(esekit_context* ctx, unsigned jobs);
/* Overrides config seeds for every later workflow call. */
ESEKIT_API esekit_status esekit_set_seed(esekit_context* ctx, uint64_t seed);
/* {"profiles":[...]} merged over the built-in language profiles. */
ESEKIT_API esekit_status esekit_load_profiles(esekit_context* ctx, const char* path);

/* ---- numeric primitives (natural log) ---- */

ESEKIT_API esekit_status esekit_entropy(esekit_context* ctx, const double* p, size_t n,
                                        double* out);
/* probs is models x clusters, row-major; each row a distribution. */
ESEKIT_API esekit_status esekit_ensemble_entropy(esekit_context* ctx, const double* probs,
                                                 size_t models, size_t clusters,
                                                 double* entropy, double* mean_within,
                                                 double* jsd);
ESEKIT_API esekit_status esekit_normalized_uncertainty(esekit_context* ctx, double h,
                                                       size_t clusters, double* out);
ESEKIT_API esekit_status esekit_cascade_score(esekit_context* ctx, double lambda,
                                              double u_hat, double alpha, double* out);
ESEKIT_API esekit_status esekit_pearson(esekit_context* ctx, const double* x,
                                        const double* y, size_t n, double* r,
                                        double* p_value);

/* ---- workflows: JSON request in, JSON (or CSV) result out ---- */

/* {"bundles","samples","out","mode":"blackbox|graybox","rule","invalid_cluster"}
 * -> summary.
 * Problems that fail are listed under "failed"; the call still succeeds. */
ESEKIT_API esekit_status esekit_score(esekit_context* ctx, const char* request_json,
                                      char** result_json);
/* {"scored","fpr":[0.05,0.1]} -> calibration report. */
ESEKIT_API esekit_status esekit_calibrate(esekit_context* ctx, const char* request_json,
                                          char** result_json);
/* {"scored","problem"?,"method","tau","rule"} ->
 * {"accepted","u","sample_id"?,"source"?,"reason"?}. Abstention is OK. */
ESEKIT_API esekit_status esekit_select(esekit_context* ctx, const char* request_json,
                                       char** result_json);
/* {"bundles","config","out","resume"} -> summary. */
ESEKIT_API esekit_status esekit_cascade(esekit_context* ctx, const char* request_json,
                                        char** result_json);
/* {"bundles","config","sweep":"tau=...;alpha=...","log_prefix"?} -> CSV. */
ESEKIT_API esekit_status esekit_sweep(esekit_context* ctx, const char* request_json,
                                      char** result_csv);
/* {"bundles","samples","k","min_incorrect"} -> histogram report. */
ESEKIT_API esekit_status esekit_analyze_clusters(esekit_context* ctx,
                                                 const char* request_json,
                                                 char** result_json);

#ifdef __cplusplus
}
#endif

#endif
