#ifndef DHINF_H
#define DHINF_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define DHINF_API __declspec(dllexport)
#else
#define DHINF_API __attribute__((visibility("default")))
#endif

typedef enum dhinf_status {
  DHINF_OK = 0,
  DHINF_ERR_STRUCTURAL = 1,
  DHINF_ERR_PARSE = 2,
  DHINF_ERR_VALIDATION = 3,
  DHINF_ERR_SINGULAR = 4,
  DHINF_ERR_CONVERGENCE = 5,
  DHINF_ERR_DEGENERATE_ROOT = 6,
  DHINF_ERR_NORMALIZATION = 7,
  DHINF_ERR_UNSTABLE = 8,
  DHINF_ERR_UNBOUNDED_RADIUS = 9,
  DHINF_ERR_DERIVATIVE_UNDEFINED = 10,
  DHINF_ERR_ARGUMENT = 11,
  DHINF_ERR_ASSUMPTION = 12,
  DHINF_ERR_NO_STABILIZER = 13,
  DHINF_ERR_NULL = 14,
  DHINF_ERR_INTERNAL = 15
} dhinf_status;

typedef struct dhinf_system dhinf_system;
typedef struct dhinf_plant dhinf_plant;
typedef struct dhinf_controller dhinf_controller;
typedef struct dhinf_topology dhinf_topology;
typedef struct dhinf_trace dhinf_trace;

/* Message of the last failed call on this thread ("" after a success). */
DHINF_API const char* dhinf_last_error(void);
DHINF_API const char* dhinf_status_name(dhinf_status s);
DHINF_API const char* dhinf_version(void);

/* Strings returned through char** are owned by the caller. */
DHINF_API void dhinf_string_free(char* s);

/* Uncertain delay systems. */
DHINF_API dhinf_status dhinf_system_from_json(const char* json, dhinf_system** out);
DHINF_API dhinf_status dhinf_system_to_json(const dhinf_system* sys, char** out);
DHINF_API dhinf_status dhinf_system_fixed_lambda(const dhinf_system* sys, double lambda, dhinf_system** out);
DHINF_API dhinf_status dhinf_system_dims(const dhinf_system* sys, size_t* states, size_t* inputs, size_t* outputs);
DHINF_API void dhinf_system_free(dhinf_system* sys);

/* Analysis. `options` is a JSON object or NULL for the defaults; results are
   JSON documents. */
DHINF_API dhinf_status dhinf_roots(const dhinf_system* sys, double lambda, const char* options, char** out);
DHINF_API dhinf_status dhinf_pseudo_abscissa(const dhinf_system* sys, double eps, const char* options, char** out);
DHINF_API dhinf_status dhinf_radius(const dhinf_system* sys, const char* options, char** out);
DHINF_API dhinf_status dhinf_hinf_norm(const dhinf_system* sys, const char* options, char** out);
DHINF_API dhinf_status dhinf_hinf_norm_fixed(const dhinf_system* sys, double lambda, const char* options, char** out);
DHINF_API dhinf_status dhinf_gain_curve(const dhinf_system* sys, const double* omegas, size_t n, int n_lambda,
                                        int threads, char** out);
DHINF_API dhinf_status dhinf_grid_oracle(const dhinf_system* sys, double omega_max, int n_omega, int n_lambda,
                                         int threads, char** out);

/* Networks. */
DHINF_API dhinf_status dhinf_plant_from_json(const char* json, dhinf_plant** out);
DHINF_API dhinf_status dhinf_plant_to_json(const dhinf_plant* plant, char** out);
DHINF_API dhinf_status dhinf_cart_pendulum(double M, double m, double k, double l, double g, double tau_u,
                                           double tau_nc, dhinf_plant** out);
DHINF_API void dhinf_plant_free(dhinf_plant* plant);

DHINF_API dhinf_status dhinf_controller_from_json(const char* json, dhinf_controller** out);
DHINF_API dhinf_status dhinf_controller_zeros(const dhinf_plant* plant, int n_c, dhinf_controller** out);
DHINF_API dhinf_status dhinf_controller_to_json(const dhinf_controller* ctrl, char** out);
/* Replaces the mask by a JSON object of per-block 0/1 matrices as in the
   controller file. Nonzero entries are tunable; absent blocks are fully
   tunable. */
DHINF_API dhinf_status dhinf_controller_set_mask(dhinf_controller* ctrl, const char* mask_json);
DHINF_API dhinf_status dhinf_controller_params(const dhinf_controller* ctrl, double* p, size_t capacity,
                                               size_t* count);
DHINF_API void dhinf_controller_free(dhinf_controller* ctrl);

DHINF_API dhinf_status dhinf_topology_from_json(const char* json, dhinf_topology** out);
DHINF_API dhinf_status dhinf_topology_ring(int n, dhinf_topology** out);
DHINF_API dhinf_status dhinf_topology_line(int n, dhinf_topology** out);
DHINF_API dhinf_status dhinf_topology_to_json(const dhinf_topology* topo, char** out);
DHINF_API void dhinf_topology_free(dhinf_topology* topo);

DHINF_API dhinf_status dhinf_decoupled_subsystem(const dhinf_plant* plant, const dhinf_controller* ctrl,
                                                 dhinf_system** out);
DHINF_API dhinf_status dhinf_closed_loop_full(const dhinf_plant* plant, const dhinf_controller* ctrl,
                                              const dhinf_topology* topo, dhinf_system** out);
DHINF_API dhinf_status dhinf_decoupled_norms(const dhinf_plant* plant, const dhinf_controller* ctrl,
                                             const dhinf_topology* topo, const char* options, int threads,
                                             char** out);

/* Synthesis. */
typedef void (*dhinf_progress_fn)(int restart, const char* phase, int step, double value, void* user);

/* value receives +inf when the subsystem is unstable; grad (length n, may be
   NULL) is left untouched in that case. */
DHINF_API dhinf_status dhinf_objective(const dhinf_plant* plant, const dhinf_controller* ctrl, const double* p,
                                       size_t n, double* value, double* grad, int* smooth);
DHINF_API dhinf_status dhinf_stabilize(const dhinf_plant* plant, const dhinf_controller* ctrl, const double* p0,
                                       size_t n, const char* options, char** out);
DHINF_API dhinf_status dhinf_synthesize(const dhinf_plant* plant, const dhinf_controller* ctrl,
                                        const char* options, dhinf_progress_fn progress, void* user, char** out);

/* Simulation. Signals are row-major: one row per channel for the noise and
   the input, one row per grid point for the trace. */
DHINF_API dhinf_status dhinf_grid_size(double t_end, double dt, size_t* out);
DHINF_API dhinf_status dhinf_make_noise(double cutoff, double rms, uint64_t seed, int channels, double t_end,
                                        double dt, double* out, size_t len);
DHINF_API dhinf_status dhinf_simulate(const dhinf_system* sys, const double* w, size_t rows, size_t cols,
                                      double dt, dhinf_trace** out);
DHINF_API dhinf_status dhinf_trace_shape(const dhinf_trace* tr, size_t* rows, size_t* cols);
DHINF_API const char* dhinf_trace_name(const dhinf_trace* tr, size_t col);
DHINF_API const double* dhinf_trace_times(const dhinf_trace* tr);
DHINF_API const double* dhinf_trace_data(const dhinf_trace* tr);
DHINF_API void dhinf_trace_free(dhinf_trace* tr);
DHINF_API dhinf_status dhinf_rms(const double* v, size_t n, double* out);

#ifdef __cplusplus
}
#endif

#endif
