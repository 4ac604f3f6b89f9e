#ifndef HEISEN_H
#define HEISEN_H

/* C interface to the heisen library.  Every call returns a status code;
   on failure heisen_last_error() describes the most recent error on the
   calling thread.  Strings returned through out-parameters stay valid until
   the owning handle is destroyed or the same accessor is called again. */

#include <stddef.h>
#include <stdint.h>

#if defined(HEISEN_BUILDING_LIBRARY)
#define HEISEN_API __attribute__((visibility("default")))
#else
#define HEISEN_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum heisen_status {
    HEISEN_OK = 0,
    HEISEN_INVALID_ARGUMENT = 1,
    HEISEN_DIMENSION_MISMATCH = 2,
    HEISEN_DOMAIN = 3,
    HEISEN_NUMERICAL = 4,
    HEISEN_IO = 5,
    HEISEN_CONFIG = 6,
    HEISEN_INTERNAL = 7
} heisen_status;

typedef struct heisen_config heisen_config;
typedef struct heisen_report heisen_report;
typedef struct heisen_form_field heisen_form_field;

HEISEN_API const char* heisen_last_error(void);
HEISEN_API const char* heisen_version(void);

/* Configuration (flat "key = value" text). */
HEISEN_API heisen_status heisen_config_create(heisen_config** out);
HEISEN_API heisen_status heisen_config_load(const char* path, heisen_config** out);
HEISEN_API heisen_status heisen_config_parse(const char* text, heisen_config** out);
HEISEN_API heisen_status heisen_config_set(heisen_config* config, const char* key, const char* value);
HEISEN_API void heisen_config_destroy(heisen_config* config);

/* kind: "scaling", "decompose", "linking" or "gromov". */
HEISEN_API heisen_status heisen_run(const heisen_config* config, const char* kind, heisen_report** out);
HEISEN_API heisen_status heisen_report_passed(const heisen_report* report, int* passed);
HEISEN_API heisen_status heisen_report_json(heisen_report* report, const char** json);
HEISEN_API heisen_status heisen_report_csv(heisen_report* report, const char** csv);
HEISEN_API heisen_status heisen_report_write(const heisen_report* report, const char* out_dir);
HEISEN_API void heisen_report_destroy(heisen_report* report);

/* Log-log SVG of a CSV's columns against its first column.  slopes (may be
   NULL) receives up to max_slopes fitted slopes; count gets the number of series. */
HEISEN_API heisen_status heisen_emit_plot(const char* csv_path, const char* svg_path, const char* title,
                                          double* slopes, size_t max_slopes, size_t* count);

/* Geometry.  Points of H^n are packed as (x1..xn, y1..yn, t), length 2n+1. */
HEISEN_API heisen_status heisen_critical_theta(int n, double gamma, double* theta);
HEISEN_API heisen_status heisen_group_mul(int n, const double* p, const double* q, double* out);
HEISEN_API heisen_status heisen_koranyi_dist(int n, const double* p, const double* q, double* dist);
HEISEN_API heisen_status heisen_phi(int n, const double* p, const double* q, double* value);

/* Splits an (n+1)-covector kappa at p into alpha ^ beta + d alpha ^ delta.
   Coefficients are ordered by increasing axis tuples in lexicographic
   order (for n = 1, 2-forms: dx^dy, dx^dt, dy^dt); beta has C(2n+1, n) entries
   and delta C(2n+1, n-1). */
HEISEN_API heisen_status heisen_decompose_point(int n, const double* kappa, const double* p, double* beta,
                                                double* delta, double* residual);

/* Form fields in the binary HEISENFF format. */
HEISEN_API heisen_status heisen_form_field_load(const char* path, heisen_form_field** out);
HEISEN_API heisen_status heisen_form_field_save(const heisen_form_field* field, const char* path);
HEISEN_API heisen_status heisen_form_field_info(const heisen_form_field* field, int* dim, int* degree,
                                               size_t* nodes, size_t* components);
HEISEN_API heisen_status heisen_form_field_data(const heisen_form_field* field, const double** data, size_t* count);
HEISEN_API heisen_status heisen_form_field_evaluate(const heisen_form_field* field, const double* p, double* out);
HEISEN_API void heisen_form_field_destroy(heisen_form_field* field);

#ifdef __cplusplus
}
#endif

#endif
