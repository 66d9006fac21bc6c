#ifndef CERAMOPT_H
#define CERAMOPT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Subcommands runnable through `ceramopt_run`.
 */
typedef enum {
  CERAMOPT_COMMAND_MESH = 0,
  CERAMOPT_COMMAND_SOLVE = 1,
  CERAMOPT_COMMAND_OBJECTIVE = 2,
  CERAMOPT_COMMAND_GRADCHECK = 3,
  CERAMOPT_COMMAND_FLOW = 4,
} CeramoptCommand;

/**
 * Status codes returned by every ceramopt entry point.
 */
typedef enum {
  CERAMOPT_STATUS_OK = 0,
  CERAMOPT_STATUS_NULL_POINTER = 1,
  CERAMOPT_STATUS_INVALID_ARGUMENT = 2,
  CERAMOPT_STATUS_INVALID_UTF8 = 3,
  CERAMOPT_STATUS_MESH_ERROR = 4,
  CERAMOPT_STATUS_SOLVE_ERROR = 5,
  CERAMOPT_STATUS_OBJECTIVE_ERROR = 6,
  CERAMOPT_STATUS_GRADIENT_ERROR = 7,
  CERAMOPT_STATUS_FLOW_ERROR = 8,
  CERAMOPT_STATUS_CONFIG_ERROR = 9,
  CERAMOPT_STATUS_IO_ERROR = 10,
  CERAMOPT_STATUS_BUFFER_TOO_SMALL = 11,
  CERAMOPT_STATUS_INTERNAL_PANIC = 12,
} CeramoptStatus;

/**
 * Opaque mesh handle.
 */
typedef struct CeramoptMesh CeramoptMesh;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread; borrowed.
 */
const char *ceramopt_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *ceramopt_version(void);

/**
 * Build a structured rod mesh; `amplitude = 0` gives the straight rod,
 * otherwise a cosine bump of the given center and width bends it.
 *
 * # Safety
 * `out_mesh` must be a valid pointer to a mesh-handle slot.
 */
CeramoptStatus ceramopt_mesh_rod(double length,
                                 double height,
                                 size_t nx,
                                 size_t ny,
                                 double amplitude,
                                 double center,
                                 double width,
                                 CeramoptMesh **out_mesh);

/**
 * Build the S-shaped joint connecting levels 0 and `offset`.
 *
 * # Safety
 * `out_mesh` must be a valid pointer to a mesh-handle slot.
 */
CeramoptStatus ceramopt_mesh_joint(double length,
                                   double height,
                                   size_t nx,
                                   size_t ny,
                                   double offset,
                                   CeramoptMesh **out_mesh);

/**
 * Read a mesh from the `mesh2d v1` text format.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `out_mesh` a valid slot.
 */
CeramoptStatus ceramopt_mesh_read(const char *path, CeramoptMesh **out_mesh);

/**
 * Write a mesh in the `mesh2d v1` text format.
 *
 * # Safety
 * `mesh` must be a live handle, `path` a NUL-terminated string.
 */
CeramoptStatus ceramopt_mesh_write(const CeramoptMesh *mesh, const char *path);

/**
 * Node and triangle counts.
 *
 * # Safety
 * All pointers must be valid.
 */
CeramoptStatus ceramopt_mesh_counts(const CeramoptMesh *mesh,
                                    size_t *out_nodes,
                                    size_t *out_triangles);

/**
 * Sum of signed triangle areas.
 *
 * # Safety
 * All pointers must be valid.
 */
CeramoptStatus ceramopt_mesh_volume(const CeramoptMesh *mesh, double *out_volume);

/**
 * Number of design parameters of a structured mesh.
 *
 * # Safety
 * All pointers must be valid.
 */
CeramoptStatus ceramopt_mesh_theta_len(const CeramoptMesh *mesh, size_t *out_len);

/**
 * Release a mesh handle; a null handle is a no-op.
 *
 * # Safety
 * `mesh` must have been produced by this library and not freed before.
 */
void ceramopt_mesh_free(CeramoptMesh *mesh);

/**
 * Solve the elasticity system under a tensile load of `traction_newtons`
 * and evaluate the failure intensity and Weibull scale.
 *
 * # Safety
 * All pointers must be valid.
 */
CeramoptStatus ceramopt_objective(const CeramoptMesh *mesh,
                                  double young_modulus,
                                  double poisson_ratio,
                                  double traction_newtons,
                                  double weibull_modulus,
                                  double sigma0,
                                  size_t n_angles,
                                  double *out_j,
                                  double *out_eta);

/**
 * Design-space shape gradient dJ/dtheta. `buffer_len` must be at least
 * the value reported by `ceramopt_mesh_theta_len`; the number of entries
 * written lands in `out_written`.
 *
 * # Safety
 * All pointers must be valid and `buffer` must hold `buffer_len` doubles.
 */
CeramoptStatus ceramopt_shape_gradient_theta(const CeramoptMesh *mesh,
                                             double young_modulus,
                                             double poisson_ratio,
                                             double traction_newtons,
                                             double weibull_modulus,
                                             double sigma0,
                                             size_t n_angles,
                                             double *buffer,
                                             size_t buffer_len,
                                             size_t *out_written);

/**
 * Run one subcommand against a configuration file, like the CLI binary.
 * `out_dir` may be null to keep the configured directory; `seed < 0`
 * keeps the configured seed.
 *
 * # Safety
 * `config_path` must be NUL-terminated; `out_dir` may be null.
 */
CeramoptStatus ceramopt_run(CeramoptCommand command,
                            const char *config_path,
                            const char *out_dir,
                            int64_t seed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CERAMOPT_H */
