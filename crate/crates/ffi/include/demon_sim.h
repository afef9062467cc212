/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef DEMON_SIM_H
#define DEMON_SIM_H



#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result of every fallible call.
typedef enum DsStatus {
  DS_STATUS_OK = 0,
  DS_STATUS_NULL_POINTER = 1,
  DS_STATUS_INVALID_ARGUMENT = 2,
  // Truncation, missing maximum, or nothing to excite.
  DS_STATUS_NUMERICAL_GUARD = 3,
  DS_STATUS_IO = 4,
  DS_STATUS_BUFFER_TOO_SMALL = 5,
  DS_STATUS_PANIC = 6,
} DsStatus;

// Opaque truncated Fock distribution.
typedef struct DsDistribution DsDistribution;

// Opaque result of running a schedule.
typedef struct DsTrajectory DsTrajectory;

typedef struct DsSearchOptions {
  size_t grid_points;
  double window_factor;
  double refine_tol;
  size_t scan_step_divisor;
} DsSearchOptions;

// Undefined statistics (`g2`, `fano` of the vacuum) are NaN.
typedef struct DsMoments {
  double mean;
  double variance;
  double g2;
  double fano;
  double mdr;
} DsMoments;

typedef struct DsOptimum {
  double theta_star;
  double p_success;
  double seed_theta;
} DsOptimum;

typedef struct DsRound {
  // 1-based.
  size_t index;
  // `'L'` or `'N'`.
  char kind;
  double theta;
  double p_success;
  double mean;
  double variance;
  double leak;
} DsRound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ds_version(void);

// Message of the last failed call on this thread; empty after a success.
// Valid until the next call into the library on this thread.
const char *ds_last_error_message(void);

struct DsSearchOptions ds_search_options_default(void);

// Thermal state with mean occupation `nbar` truncated at `n_max`.
//
// # Safety
// `out` must be valid for writes.
enum DsStatus ds_thermal(double nbar, size_t n_max, struct DsDistribution **out);

// # Safety
// `out` must be valid for writes.
enum DsStatus ds_poisson(double mean, size_t n_max, struct DsDistribution **out);

// # Safety
// `out` must be valid for writes.
enum DsStatus ds_fock(size_t n, size_t n_max, struct DsDistribution **out);

// Distribution over levels `0..len` with explicit leaked mass.
//
// # Safety
// `probs` must point to `len` readable doubles; `out` must be valid for writes.
enum DsStatus ds_distribution_from_probs(const double *probs,
                                         size_t len,
                                         double leak,
                                         struct DsDistribution **out);

// # Safety
// `dist` must be NULL or a handle from this library not yet freed.
void ds_distribution_free(struct DsDistribution *dist);

// Number of stored levels, `n_max + 1`; 0 for NULL.
//
// # Safety
// `dist` must be NULL or a live handle.
size_t ds_distribution_len(const struct DsDistribution *dist);

// # Safety
// `dist` must be NULL or a live handle.
double ds_distribution_leak(const struct DsDistribution *dist);

// Copies the probabilities into `buf`. `out_len` always receives the
// required length; when `cap` is smaller nothing is copied and
// `BufferTooSmall` is returned.
//
// # Safety
// `buf` must hold `cap` writable doubles; `out_len` must be valid for writes.
enum DsStatus ds_distribution_copy_probs(const struct DsDistribution *dist,
                                         double *buf,
                                         size_t cap,
                                         size_t *out_len);

// # Safety
// `dist` must be a live handle; `out` valid for writes.
enum DsStatus ds_moments(const struct DsDistribution *dist, struct DsMoments *out);

// Probability of exciting a ground-state qubit; `nonlinear` selects
// two-quantum coupling.
//
// # Safety
// `dist` must be a live handle; `out` valid for writes.
enum DsStatus ds_excitation_probability(const struct DsDistribution *dist,
                                        double theta,
                                        bool nonlinear,
                                        double *out);

// Global optimum of the linear excitation probability. `opts` may be NULL.
//
// # Safety
// `dist` must be a live handle; `opts` NULL or readable; `out` valid for writes.
enum DsStatus ds_optimal_theta_linear(const struct DsDistribution *dist,
                                      const struct DsSearchOptions *opts,
                                      struct DsOptimum *out);

// First local maximum of the two-quantum excitation probability below pi/2.
//
// # Safety
// As for [`ds_optimal_theta_linear`].
enum DsStatus ds_first_local_theta_nonlinear(const struct DsDistribution *dist,
                                             const struct DsSearchOptions *opts,
                                             struct DsOptimum *out);

// Best probability of charging a battery qubit from `dist`.
//
// # Safety
// As for [`ds_optimal_theta_linear`].
enum DsStatus ds_charge_performance(const struct DsDistribution *dist,
                                    const struct DsSearchOptions *opts,
                                    struct DsOptimum *out);

// `p^k`.
//
// # Safety
// `out` must be valid for writes.
enum DsStatus ds_mass_production(double p, uint32_t k, double *out);

double ds_dawson(double x);

// Runs `schedule` (a string of `L` and `N`) from `initial` under protocol
// 1 or 2. `opts` may be NULL.
//
// # Safety
// `initial` must be a live handle, `schedule` a NUL-terminated string,
// `opts` NULL or readable, `out` valid for writes.
enum DsStatus ds_run_schedule(const struct DsDistribution *initial,
                              const char *schedule,
                              uint32_t protocol,
                              bool allow_ripple,
                              const struct DsSearchOptions *opts,
                              struct DsTrajectory **out);

// # Safety
// `traj` must be NULL or a handle from this library not yet freed.
void ds_trajectory_free(struct DsTrajectory *traj);

// Number of rounds; 0 for NULL.
//
// # Safety
// `traj` must be NULL or a live handle.
size_t ds_trajectory_len(const struct DsTrajectory *traj);

// Record of round `index` (1-based).
//
// # Safety
// `traj` must be a live handle; `out` valid for writes.
enum DsStatus ds_trajectory_round(const struct DsTrajectory *traj,
                                  size_t index,
                                  struct DsRound *out);

// New handle holding the distribution after `index` rounds (0 = initial).
//
// # Safety
// `traj` must be a live handle; `out` valid for writes.
enum DsStatus ds_trajectory_distribution(const struct DsTrajectory *traj,
                                         size_t index,
                                         struct DsDistribution **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEMON_SIM_H */
