#ifndef NLPA_H
#define NLPA_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NlpaStatus {
  NLPA_STATUS_OK = 0,
  NLPA_STATUS_NULL_POINTER = 1,
  NLPA_STATUS_INVALID_ARGUMENT = 2,
  NLPA_STATUS_NUMERICAL = 3,
  NLPA_STATUS_INFEASIBLE = 4,
  NLPA_STATUS_INTERNAL = 5,
  NLPA_STATUS_PANIC = 6,
} NlpaStatus;

/**
 * Opaque channel realization.
 */
typedef struct NlpaChannel NlpaChannel;

/**
 * Opaque PA model.
 */
typedef struct NlpaPa NlpaPa;

/**
 * Link budget with powers in dBm. A `consumed_power_cap_dbm` of `+inf`
 * means no cap.
 */
typedef struct NlpaBudget {
  double noise_dbm;
  double bandwidth_hz;
  double pa_max_output_dbm;
  double pa_max_efficiency;
  double consumed_power_cap_dbm;
} NlpaBudget;

typedef struct NlpaP2Solution {
  double p_star;
  double ee_star_bits_per_joule;
  double se_at_star;
  double pcons_at_star;
  bool on_constraint_boundary;
} NlpaP2Solution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *nlpa_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nlpa_version(void);

/**
 * The default link budget: -105 dBm noise, 1 GHz, 6 dBm saturation output,
 * 30% peak efficiency, no cap.
 */
struct NlpaBudget nlpa_budget_default(void);

/**
 * The default fifth-order PA, powers in milliwatts.
 *
 * # Safety
 * `out_pa` must be a valid pointer to writable storage for one handle.
 */
enum NlpaStatus nlpa_pa_reference(struct NlpaPa **out_pa);

/**
 * PA from `n` odd-order coefficients `beta_1, beta_3, ...`. `unit_watts`
 * selects watts instead of milliwatts for `|u|^2`.
 *
 * # Safety
 * `re` and `im` must point to `n` doubles each; `out_pa` must be writable.
 */
enum NlpaStatus nlpa_pa_new(const double *re,
                            const double *im,
                            size_t n,
                            bool unit_watts,
                            struct NlpaPa **out_pa);

/**
 * # Safety
 * `pa` must be null or a handle from this library not yet freed.
 */
void nlpa_pa_free(struct NlpaPa *pa);

/**
 * Average linear gain `gbar(p)` at per-branch input power `p`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum NlpaStatus nlpa_pa_avg_gain(const struct NlpaPa *pa, double p, double *out_re, double *out_im);

/**
 * Desired-signal gain `|gbar(p)|^2` and distortion gain at per-branch power `p`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum NlpaStatus nlpa_pa_gains(const struct NlpaPa *pa, double p, double *out_gs, double *out_gd);

/**
 * Distortion covariance of an `n x n` input covariance. `cu` and `out_cd`
 * hold `2 n^2` doubles.
 *
 * # Safety
 * `cu` must be readable and `out_cd` writable for `2 n^2` doubles.
 */
enum NlpaStatus nlpa_distortion_covariance(const struct NlpaPa *pa,
                                           const double *cu,
                                           size_t n,
                                           double *out_cd);

/**
 * Draws the default multipath channel for `n_t` transmit and `n_r` receive
 * antennas with `num_paths` paths.
 *
 * # Safety
 * `out_channel` must be writable.
 */
enum NlpaStatus nlpa_channel_generate(uint64_t seed,
                                      size_t n_t,
                                      size_t n_r,
                                      size_t num_paths,
                                      struct NlpaChannel **out_channel);

/**
 * # Safety
 * `channel` must be null or a handle from this library not yet freed.
 */
void nlpa_channel_free(struct NlpaChannel *channel);

/**
 * # Safety
 * All pointers must be valid.
 */
enum NlpaStatus nlpa_channel_dims(const struct NlpaChannel *channel,
                                  size_t *out_n_t,
                                  size_t *out_n_r,
                                  size_t *out_num_paths);

/**
 * Spectral efficiency of the single-RF-chain transmitter steered at the
 * dominant path, at total input power `p`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum NlpaStatus nlpa_se_single_rf(const struct NlpaChannel *channel,
                                  const struct NlpaPa *pa,
                                  double p,
                                  double noise_power,
                                  double *out_se);

/**
 * Energy-efficiency-optimal input power in `[lo_dbm, hi_dbm]`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum NlpaStatus nlpa_solve_p2(const struct NlpaChannel *channel,
                              const struct NlpaPa *pa,
                              const struct NlpaBudget *budget,
                              double lo_dbm,
                              double hi_dbm,
                              struct NlpaP2Solution *out_solution);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NLPA_H */
