/* C interface to the regimes library. */
#ifndef REGIMES_REGIMES_H
#define REGIMES_REGIMES_H

#include <stddef.h>

#if defined(REGIMES_BUILDING_LIBRARY)
#define REGIMES_API __attribute__((visibility("default")))
#else
#define REGIMES_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; equal to the command-line exit codes. */
typedef enum {
  REGIMES_OK = 0,
  REGIMES_ERR_USAGE = 1,
  REGIMES_ERR_DATA = 2,
  REGIMES_ERR_NUMERICAL = 3
} regimes_status;

/* Message of the last failing call on this thread ("" if none). */
REGIMES_API const char* regimes_last_error(void);
REGIMES_API const char* regimes_version(void);

typedef struct regimes_config regimes_config;

REGIMES_API regimes_config* regimes_config_create(void);
REGIMES_API void regimes_config_destroy(regimes_config* cfg);
REGIMES_API regimes_status regimes_config_set(regimes_config* cfg, const char* key, const char* value);
/* Copies the value, NUL-terminated, into buf. *needed receives the full
 * length including the terminator. */
REGIMES_API regimes_status regimes_config_get(const regimes_config* cfg, const char* key, char* buf,
                                              size_t buf_len, size_t* needed);
REGIMES_API regimes_status regimes_config_load(regimes_config* cfg, const char* path);
REGIMES_API size_t regimes_config_key_count(void);
REGIMES_API const char* regimes_config_key_name(size_t i);
REGIMES_API const char* regimes_config_key_help(size_t i);

typedef void (*regimes_log_fn)(const char* line, void* user);

REGIMES_API regimes_status regimes_cmd_ingest(const regimes_config* cfg, regimes_log_fn log, void* user);
REGIMES_API regimes_status regimes_cmd_analyze(const regimes_config* cfg, regimes_log_fn log, void* user);
REGIMES_API regimes_status regimes_cmd_report(const regimes_config* cfg, regimes_log_fn log, void* user);
REGIMES_API regimes_status regimes_cmd_simulate(const regimes_config* cfg, regimes_log_fn log, void* user);

/* n x n column-stochastic matrix in column-major order; pi receives n values. */
REGIMES_API regimes_status regimes_stationary_distribution(const double* transition, size_t n, double* pi);

/* Change-point detection. mode is "mean" or "mv". */
typedef struct regimes_segmentation regimes_segmentation;

REGIMES_API regimes_status regimes_detect(const double* series, size_t n, const char* mode, size_t k_max,
                                          regimes_segmentation** out);
REGIMES_API size_t regimes_segmentation_count(const regimes_segmentation* seg);
REGIMES_API size_t regimes_segmentation_tau(const regimes_segmentation* seg, size_t i);
REGIMES_API double regimes_segmentation_mean(const regimes_segmentation* seg, size_t segment);
REGIMES_API double regimes_segmentation_variance(const regimes_segmentation* seg, size_t segment);
REGIMES_API double regimes_segmentation_contrast(const regimes_segmentation* seg);
REGIMES_API void regimes_segmentation_destroy(regimes_segmentation* seg);

/* Two-regime switching autoregression with linear means on `lag` lags. */
typedef struct regimes_ms_fit regimes_ms_fit;

REGIMES_API regimes_status regimes_ms_fit_linear(const double* series, size_t n, size_t lag, size_t n_restarts,
                                                 unsigned long long seed, regimes_ms_fit** out);
REGIMES_API double regimes_ms_fit_loglik(const regimes_ms_fit* fit);
/* transition(i, j) = P(x_t = i | x_{t-1} = j), 0-based. */
REGIMES_API double regimes_ms_fit_transition(const regimes_ms_fit* fit, size_t i, size_t j);
/* Smoothed P(x_t = regime | data). */
REGIMES_API double regimes_ms_fit_smoothed(const regimes_ms_fit* fit, size_t t, size_t regime);
REGIMES_API void regimes_ms_fit_destroy(regimes_ms_fit* fit);

#ifdef __cplusplus
}
#endif

#endif
