#ifndef MODALREG_H
#define MODALREG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MrStatus {
  MR_STATUS_OK = 0,
  MR_STATUS_NULL_POINTER = 1,
  MR_STATUS_INVALID_ARGUMENT = 2,
  // A transfer-function value at an exosystem frequency is below the floor.
  MR_STATUS_ASSUMPTION_FAILED = 3,
  // A resolvent was evaluated on the spectrum.
  MR_STATUS_SINGULAR = 4,
  // A caller-supplied buffer has the wrong length.
  MR_STATUS_LENGTH_MISMATCH = 5,
  // A panic was caught at the boundary.
  MR_STATUS_INTERNAL = 6,
} MrStatus;

// A plant, its coupling and the exosystem space.
typedef struct MrScenario MrScenario;

// Feedforward gain and Sylvester solution for one scenario.
typedef struct MrSolution MrSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *mr_last_error(void);

// Damped wave plant with `2 n_plant` modes and `2 n_exo + 1` exosystem harmonics.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum MrStatus mr_scenario_wave(double nu,
                               double period,
                               double gamma,
                               int64_t n_plant,
                               int64_t n_exo,
                               struct MrScenario **out);

// Diagonal example plant with `2 n_plant + 1` modes.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum MrStatus mr_scenario_diagonal(double period,
                                   double gamma,
                                   int64_t n_plant,
                                   int64_t n_exo,
                                   struct MrScenario **out);

// Small random scenario, deterministic in `seed`.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum MrStatus mr_scenario_random(uint64_t seed, struct MrScenario **out);

// # Safety
// `s` must come from an `mr_scenario_*` constructor and not be freed twice.
void mr_scenario_free(struct MrScenario *s);

// Number of retained plant modes and exosystem modes.
//
// # Safety
// `s` must be a live scenario handle; the out pointers must be writable.
enum MrStatus mr_scenario_sizes(const struct MrScenario *s, size_t *plant_modes, size_t *exo_modes);

// Mode indices in storage order. `plant` and `exo` must hold the counts
// reported by [`mr_scenario_sizes`].
//
// # Safety
// Buffers must be writable for `plant_len` and `exo_len` elements.
enum MrStatus mr_scenario_modes(const struct MrScenario *s,
                                int64_t *plant,
                                size_t plant_len,
                                int64_t *exo,
                                size_t exo_len);

// `H(lambda) = sum_n c_n b_n / (lambda - mu_n)`.
//
// # Safety
// `s` must be a live scenario handle; the out pointers must be writable.
enum MrStatus mr_transfer_function(const struct MrScenario *s,
                                   double re,
                                   double im,
                                   double *out_re,
                                   double *out_im);

// Smallest `|H(i omega_k)|` and whether both gain assumptions hold.
//
// # Safety
// `s` must be a live scenario handle; the out pointers must be writable.
enum MrStatus mr_check_assumptions(const struct MrScenario *s,
                                   double floor,
                                   double *min_magnitude,
                                   bool *assumption1,
                                   bool *assumption2);

// Builds the feedforward gain and solves for `Pi`. Fails with
// `AssumptionFailed` when some `|H(i omega_k)|` is below `floor`.
//
// # Safety
// `s` must be a live scenario handle and `out` writable.
enum MrStatus mr_solve(const struct MrScenario *s, double floor, struct MrSolution **out);

// # Safety
// `sol` must come from [`mr_solve`] and not be freed twice.
void mr_solution_free(struct MrSolution *sol);

// Residuals of `A Pi + B L + P = Pi S` and `C Pi = delta_0`.
//
// # Safety
// `sol` must be a live solution handle; the out pointers must be writable.
enum MrStatus mr_solution_residuals(const struct MrSolution *sol, double *first, double *second);

// Gain `l_k` for exosystem mode `k`.
//
// # Safety
// `sol` must be a live solution handle; the out pointers must be writable.
enum MrStatus mr_solution_gain(const struct MrSolution *sol,
                               int64_t k,
                               double *out_re,
                               double *out_im);

// Entry `pi_{n,k}` of the Sylvester solution.
//
// # Safety
// `sol` must be a live solution handle; the out pointers must be writable.
enum MrStatus mr_solution_pi(const struct MrSolution *sol,
                             int64_t n,
                             int64_t k,
                             double *out_re,
                             double *out_im);

// Tracking error `e(t) = y(t) - y_r(t)` of the closed loop at each time in
// `t`. `z0` has one entry per plant mode (both pointers may be null for a
// zero start), `w0` one per exosystem mode, in the order of
// [`mr_scenario_modes`].
//
// # Safety
// Input arrays must be readable and `e_re`, `e_im` writable for the stated lengths.
enum MrStatus mr_simulate_error(const struct MrSolution *sol,
                                const double *z0_re,
                                const double *z0_im,
                                size_t z0_len,
                                const double *w0_re,
                                const double *w0_im,
                                size_t w0_len,
                                const double *t,
                                size_t t_len,
                                double *e_re,
                                double *e_im);

// Static description of a status code.
const char *mr_status_name(enum MrStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MODALREG_H */
