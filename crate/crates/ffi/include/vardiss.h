#ifndef VARDISS_H
#define VARDISS_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  VD_MODEL_H1 = 1,
  VD_MODEL_H2 = 2,
  VD_MODEL_H3 = 3,
} VdModel;

typedef enum {
  VD_NOISE_KIND_NONE = 0,
  VD_NOISE_KIND_DEPOLARIZING = 1,
  VD_NOISE_KIND_BIT_FLIP = 2,
  VD_NOISE_KIND_AMPLITUDE_DAMPING = 3,
} VdNoiseKind;

/**
 * Result code of every exported function.
 */
typedef enum {
  VD_STATUS_OK = 0,
  VD_STATUS_NULL_POINTER = 1,
  VD_STATUS_INVALID_ARGUMENT = 2,
  VD_STATUS_DIMENSION_MISMATCH = 3,
  VD_STATUS_PARAMETER_COUNT = 4,
  VD_STATUS_PARSE = 5,
  VD_STATUS_CONFIG = 6,
  VD_STATUS_NUMERICAL = 7,
  VD_STATUS_IO = 8,
  /**
   * The run finished but at least one sub-run failed.
   */
  VD_STATUS_RUN_FAILED = 9,
  VD_STATUS_PANIC = 99,
} VdStatus;

typedef enum {
  VD_TARGET_W = 0,
  VD_TARGET_PLUS = 1,
  VD_TARGET_DRESSED_CLUSTER = 2,
} VdTarget;

/**
 * Opaque Pauli-sum Hamiltonian.
 */
typedef struct VdHamiltonian VdHamiltonian;

/**
 * Opaque training objective (ground-state search or recovery).
 */
typedef struct VdObjective VdObjective;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated).
 *
 * Returns the message length in bytes excluding the terminator. When `buf` is
 * null or `len` is too small, nothing is written; call again with a larger buffer.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t vd_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *vd_version(void);

/**
 * Parses the `coeff LABEL` per-line text format.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
VdStatus vd_hamiltonian_parse(const char *text, VdHamiltonian **out);

/**
 * One of the benchmark chains on `n` qubits.
 *
 * # Safety
 * `out` must be writable.
 */
VdStatus vd_hamiltonian_benchmark(VdModel model, size_t n, VdHamiltonian **out);

/**
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
VdStatus vd_hamiltonian_qubits(const VdHamiltonian *h, size_t *out);

/**
 * Exact ground energy by dense diagonalization (up to 12 qubits).
 *
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
VdStatus vd_hamiltonian_ground_energy(const VdHamiltonian *h, double *out);

/**
 * # Safety
 * `h` must be null or a handle not yet freed.
 */
void vd_hamiltonian_free(VdHamiltonian *h);

/**
 * Ground-state search objective on the system of `h`.
 *
 * `m = 0` requires `rounds = 0`. Noise is applied after every gate.
 *
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
VdStatus vd_objective_dvqe(const VdHamiltonian *h,
                           size_t m,
                           size_t rounds,
                           size_t vqe_layers,
                           VdNoiseKind noise,
                           double p,
                           VdObjective **out);

/**
 * Recovery objective for an `n`-qubit target whose input carries preparation
 * noise `(prep, p)` on every qubit.
 *
 * # Safety
 * `out` must be writable.
 */
VdStatus vd_objective_recovery(VdTarget target,
                               size_t n,
                               size_t m,
                               size_t rounds,
                               VdNoiseKind prep,
                               double p,
                               VdObjective **out);

/**
 * # Safety
 * `obj` must be a live handle; `out` must be writable.
 */
VdStatus vd_objective_param_count(const VdObjective *obj, size_t *out);

/**
 * Seeded initial parameters, uniform on `[-pi, pi)`.
 *
 * # Safety
 * `obj` must be a live handle; `theta` must hold `len` doubles.
 */
VdStatus vd_objective_init_params(const VdObjective *obj, uint64_t seed, double *theta, size_t len);

/**
 * Energy (ground-state search) or infidelity (recovery) at `theta`.
 *
 * # Safety
 * `obj` must be a live handle; `theta` must hold `len` doubles; `out` must be writable.
 */
VdStatus vd_objective_loss(const VdObjective *obj, const double *theta, size_t len, double *out);

/**
 * Loss and exact gradient at `theta`; `grad` receives `len` entries.
 *
 * # Safety
 * `theta` and `grad` must each hold `len` doubles; `loss` may be null.
 */
VdStatus vd_objective_gradient(const VdObjective *obj,
                               const double *theta,
                               size_t len,
                               double *grad,
                               double *loss);

/**
 * Plain gradient descent from `theta`, updated in place.
 *
 * `losses` may be null; otherwise it receives `iterations` per-step losses.
 * `final_loss` may be null.
 *
 * # Safety
 * `theta` must hold `len` doubles; `losses`, when non-null, `iterations` doubles.
 */
VdStatus vd_train(const VdObjective *obj,
                  double *theta,
                  size_t len,
                  double learning_rate,
                  size_t iterations,
                  double *losses,
                  double *final_loss);

/**
 * # Safety
 * `obj` must be null or a handle not yet freed.
 */
void vd_objective_free(VdObjective *obj);

/**
 * Runs a TOML experiment config, writing outputs like the command-line tool.
 *
 * # Safety
 * `config_path` must be a NUL-terminated path.
 */
VdStatus vd_run_config(const char *config_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VARDISS_H */
