#ifndef RESLAB_H
#define RESLAB_H

#ifdef __cplusplus
extern "C" {
#endif

/* Return codes. Nonzero values map one-to-one onto the library's error kinds. */
enum reslab_status {
  RESLAB_OK = 0,
  RESLAB_E_PARSE,
  RESLAB_E_INVALID_POTENTIAL,
  RESLAB_E_OUTSIDE_ANALYTICITY_CONE,
  RESLAB_E_INSIDE_CORE,
  RESLAB_E_FIT_FAILED,
  RESLAB_E_HYPOTHESES_NOT_VERIFIED,
  RESLAB_E_NO_MINIMUM,
  RESLAB_E_TIE_AT_GLOBAL_MIN,
  RESLAB_E_OUT_OF_DOMAIN,
  RESLAB_E_TOO_LARGE,
  RESLAB_E_DEGENERATE_DEPTHS,
  RESLAB_E_QUADRATURE_FAILURE,
  RESLAB_E_GRID_TOO_COARSE,
  RESLAB_E_CONE_VIOLATION,
  RESLAB_E_TRUNCATION_TOO_TIGHT,
  RESLAB_E_CLUSTER_UNRESOLVED,
  RESLAB_E_SINGULAR_SHIFT,
  RESLAB_E_NO_CONVERGENCE,
  RESLAB_E_RESONANCE_NOT_FOUND,
  RESLAB_E_EMPTY_GRID,
  RESLAB_E_REGION_EMPTY,
  RESLAB_E_INSUFFICIENT_POINTS,
  RESLAB_E_NON_POSITIVE_EIGENVALUE,
  RESLAB_E_IO,
  RESLAB_E_INVALID_ARGUMENT,
  RESLAB_E_INTERNAL = 100
};

typedef struct reslab_experiment reslab_experiment;

const char* reslab_version(void);
const char* reslab_status_name(int code);
/* Message of the last failure on the calling thread; never NULL. */
const char* reslab_last_error(void);

/* Strings handed out by the library must be released with this. */
void reslab_free_string(char* s);

int reslab_experiment_load(const char* path, reslab_experiment** out);
int reslab_experiment_from_text(const char* text, reslab_experiment** out);
void reslab_experiment_free(reslab_experiment* e);
/* Override one config key (for example "eps", "beta", "mode", "check_truncation"). */
int reslab_experiment_set(reslab_experiment* e, const char* key, const char* value);
/* Canonical config text and its content hash. */
int reslab_experiment_config(const reslab_experiment* e, char** canonical, char** hash_hex);

int reslab_wells(const reslab_experiment* e, char** json_out);
int reslab_hypotheses(const reslab_experiment* e, char** json_out);

/* Stage runs return a run record as JSON; *run_status gets 0, 3 or 4. */
int reslab_interior_spectrum(const reslab_experiment* e, char** json_out, int* run_status);
int reslab_resonances(const reslab_experiment* e, char** json_out, int* run_status);
int reslab_symbol_check(const reslab_experiment* e, char** json_out, int* run_status);

/* Full sweep with the on-disk cache. cache_dir may be NULL (RESLAB_CACHE, then .reslab-cache). */
int reslab_sweep(const reslab_experiment* e, const char* cache_dir, int use_cache, char** json_out,
                 int* run_status);
long reslab_sweep_compute_count(void);

/* formats: comma separated subset of "csv,json,svg-data". */
int reslab_report(const char* record_json, const char* out_dir, const char* formats);

#ifdef __cplusplus
}
#endif

#endif
