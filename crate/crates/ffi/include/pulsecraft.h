#ifndef PULSECRAFT_H
#define PULSECRAFT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PcStatus {
  PC_STATUS_OK = 0,
  PC_STATUS_NULL_POINTER = 1,
  PC_STATUS_VALIDATION = 2,
  PC_STATUS_NUMERICAL = 3,
  PC_STATUS_INFEASIBLE = 4,
  PC_STATUS_IO = 5,
  PC_STATUS_PANIC = 6,
} PcStatus;

typedef enum PcWindowTarget {
  PC_WINDOW_TARGET_EXCITATION = 0,
  PC_WINDOW_TARGET_RESPONSE = 1,
} PcWindowTarget;

/**
 * Transfer dataset handle.
 */
typedef struct PcDataset PcDataset;

/**
 * Optimization result handle.
 */
typedef struct PcSolution PcSolution;

typedef struct PcDipoleParams {
  double length_m;
  double width_m;
  double fmax_hz;
  size_t nfreq;
  /**
   * Zero selects the default for `fmax_hz`.
   */
  size_t segments;
} PcDipoleParams;

typedef struct PcWindow {
  double fraction;
  double center_s;
  double half_width_s;
  enum PcWindowTarget target;
} PcWindow;

/**
 * Optimization settings; `band_min_hz == band_max_hz == 0` selects the
 * dataset default band.
 */
typedef struct PcOptimizeParams {
  double w0_joule;
  double t0_s;
  size_t basis_size;
  double band_min_hz;
  double band_max_hz;
  const struct PcWindow *windows;
  size_t n_windows;
} PcOptimizeParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pc_version(void);

/**
 * Copies the last error message of this thread into `buf` (truncated, always
 * NUL-terminated when `len > 0`) and returns the length needed including the
 * terminator; 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t pc_last_error(char *buf, size_t len);

/**
 * Loads a dataset from a `.json` or `.csv` file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum PcStatus pc_dataset_load(const char *path, struct PcDataset **out);

/**
 * Writes a dataset to a `.json` or `.csv` file.
 *
 * # Safety
 * `dataset` must be a live handle and `path` a NUL-terminated string.
 */
enum PcStatus pc_dataset_save(const struct PcDataset *dataset, const char *path);

/**
 * Simulates a centre-fed strip dipole and returns its incident-wave to
 * broadside far-field dataset on `nfreq` points over `[0, fmax_hz]`.
 *
 * # Safety
 * `params` must point to a valid struct; `out` must be valid for writes.
 */
enum PcStatus pc_dataset_dipole(const struct PcDipoleParams *params, struct PcDataset **out);

/**
 * Built-in three-mode THz resonator dataset.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum PcStatus pc_dataset_thz_resonator(struct PcDataset **out);

/**
 * Reports the sample, output and port counts; any out-pointer may be null.
 *
 * # Safety
 * `dataset` must be a live handle; non-null out-pointers must be writable.
 */
enum PcStatus pc_dataset_shape(const struct PcDataset *dataset,
                               size_t *n_freq,
                               size_t *n_outputs,
                               size_t *n_ports);

/**
 * # Safety
 * `dataset` must be null or a handle not yet freed.
 */
void pc_dataset_free(struct PcDataset *dataset);

/**
 * Default settings: W₀ = 1e-10 J, t₀ = 0, 120 functions per family, dataset
 * band, no windows.
 */
struct PcOptimizeParams pc_optimize_params_default(void);

/**
 * Maximises the response peak at `t0` for `dataset` under `params`.
 *
 * # Safety
 * `dataset` must be a live handle, `params` valid (with `n_windows` readable
 * entries at `windows`), and `out` writable.
 */
enum PcStatus pc_optimize(const struct PcDataset *dataset,
                          const struct PcOptimizeParams *params,
                          struct PcSolution **out);

/**
 * Objective value `Σ_c |y_c(t₀)|²`.
 *
 * # Safety
 * `solution` must be a live handle and `value` writable.
 */
enum PcStatus pc_solution_value(const struct PcSolution *solution, double *value);

/**
 * Peak of `Σ|y|²/Z₀` on the reconstruction grid and its time.
 *
 * # Safety
 * `solution` must be a live handle; non-null out-pointers must be writable.
 */
enum PcStatus pc_solution_peak_intensity(const struct PcSolution *solution,
                                         double *peak,
                                         double *time_s);

/**
 * Copies up to `len` coefficients into `buf` and stores the full count in
 * `needed` (when non-null). Pass a null `buf` to query the size.
 *
 * # Safety
 * `solution` must be a live handle; `buf` null or valid for `len` doubles.
 */
enum PcStatus pc_solution_coefficients(const struct PcSolution *solution,
                                       double *buf,
                                       size_t len,
                                       size_t *needed);

/**
 * Measured energy fraction of window constraint `index`.
 *
 * # Safety
 * `solution` must be a live handle and `fraction` writable.
 */
enum PcStatus pc_solution_window_fraction(const struct PcSolution *solution,
                                          size_t index,
                                          double *fraction);

/**
 * # Safety
 * `solution` must be null or a handle not yet freed.
 */
void pc_solution_free(struct PcSolution *solution);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PULSECRAFT_H */
