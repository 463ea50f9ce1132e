/* C API for the texteffect shared library.
 *
 * All functions return tfx_status; on failure tfx_last_error() holds a
 * thread-local message. Strings returned through char** out-parameters are
 * heap-allocated and must be released with tfx_string_free(). Configs are
 * JSON strings; tfx_config_load() turns a .json/.toml file plus overrides
 * into the canonical validated form the run functions expect.
 */
#ifndef TEXTEFFECT_H
#define TEXTEFFECT_H

#ifdef __cplusplus
extern "C" {
#endif

#ifndef TFX_API
#define TFX_API __attribute__((visibility("default")))
#endif

typedef enum tfx_status {
    TFX_OK = 0,
    TFX_ERR_IO = 1,
    TFX_ERR_CONFIG = 2,
    TFX_ERR_MISSING_COLUMN = 3,
    TFX_ERR_DUPLICATE_ID = 4,
    TFX_ERR_DANGLING_REFERENCE = 5,
    TFX_ERR_INVARIANT = 6,
    TFX_ERR_NO_RATINGS = 7,
    TFX_ERR_MISSING_RATING = 8,
    TFX_ERR_EMPTY_ARM = 9,
    TFX_ERR_SINGULAR_DESIGN = 10,
    TFX_ERR_SINGLE_CLUSTER = 11,
    TFX_ERR_EMPTY_VOCABULARY = 12,
    TFX_ERR_DEGENERATE_FOLD = 13,
    TFX_ERR_EXTREME_PROPENSITY = 14,
    TFX_ERR_NON_COMPUTABLE = 15,
    TFX_ERR_ALL_TRIMMED = 16,
    TFX_ERR_MISSING_ESTIMATE = 17,
    TFX_ERR_EMPTY_INPUT = 18,
    TFX_ERR_INTERNAL = 19
} tfx_status;

/* Opaque handle over a validated corpus. */
typedef struct tfx_corpus tfx_corpus;

TFX_API const char* tfx_version(void);

/* Message for the most recent failing call on this thread. */
TFX_API const char* tfx_last_error(void);

TFX_API void tfx_string_free(char* s);

/* numeric_values = 0 enforces integer Likert values in [1,5]; 1 accepts any
 * finite value (synthetic or modified outcomes). */
TFX_API tfx_status tfx_corpus_open(const char* units_csv, const char* evaluations_csv,
                                   const char* ratings_csv, int numeric_values,
                                   tfx_corpus** out);
TFX_API void tfx_corpus_close(tfx_corpus* corpus);

/* {"n_texts", "n_pairs", "n_originals", "n_evaluations", "n_ratings"} */
TFX_API tfx_status tfx_corpus_stats(const tfx_corpus* corpus, char** summary_json_out);

/* Load + merge + validate a config. file_path and overrides_json may each be
 * NULL. schema is the subcommand name: ingest, audit, counts, dgp, simulate,
 * estimate, benchmark, report. */
TFX_API tfx_status tfx_config_load(const char* file_path, const char* overrides_json,
                                   const char* schema, char** canonical_json_out);

TFX_API tfx_status tfx_run_audit(const tfx_corpus* corpus, const char* config_json,
                                 const char* out_dir, char** summary_json_out);

TFX_API tfx_status tfx_run_counts(const tfx_corpus* corpus, const char* config_json,
                                  const char* out_dir, char** summary_json_out);

TFX_API tfx_status tfx_run_dgp(const char* config_json, const char* out_dir,
                               char** summary_json_out);

TFX_API tfx_status tfx_run_estimate(const tfx_corpus* corpus, const char* config_json,
                                    const char* out_dir, char** summary_json_out);

TFX_API tfx_status tfx_run_simulate(const tfx_corpus* corpus, const char* config_json,
                                    const char* out_dir, int jobs, int resume,
                                    char** summary_json_out);

/* corpus may be NULL when the config carries a "dgp" block. */
TFX_API tfx_status tfx_run_benchmark(const tfx_corpus* corpus, const char* config_json,
                                     const char* out_dir, int jobs, int resume,
                                     char** summary_json_out);

TFX_API tfx_status tfx_run_report(const char* benchmark_dir, char** summary_json_out);

#ifdef __cplusplus
}
#endif

#endif /* TEXTEFFECT_H */
