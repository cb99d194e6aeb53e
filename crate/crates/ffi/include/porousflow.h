#ifndef POROUSFLOW_H
#define POROUSFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum PfStatus {
  PF_STATUS_OK = 0,
  PF_STATUS_NULL_POINTER = 1,
  PF_STATUS_INVALID_ARGUMENT = 2,
  PF_STATUS_NUMERICAL_FAILURE = 3,
  PF_STATUS_BUFFER_TOO_SMALL = 4,
  PF_STATUS_PANIC = 5,
} PfStatus;

// A solved Darcy problem on the unit square.
typedef struct PfDarcy PfDarcy;

// A periodic pack of equal spheres.
typedef struct PfPack PfPack;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` as a
// NUL-terminated string, truncating if needed. Returns the full message
// length in bytes, without the terminator. `buf` may be null when `len` is 0.
//
// # Safety
// `buf` must be valid for `len` bytes of writes.
size_t pf_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *pf_version(void);

// Largest mesh Péclet number at which odd degree `p` is oscillation free.
//
// # Safety
// `out` must be valid for writes.
enum PfStatus pf_max_stable_pe(size_t p, double *out);

// Stencil asymmetry `α_p` of the condensed degree-`p` element at `pe`.
//
// # Safety
// `out` must be valid for writes.
enum PfStatus pf_alpha_p(size_t p, double pe, double *out);

// Numerical diffusivity of degree `p` obtained by static condensation.
//
// # Safety
// `out` must be valid for writes.
enum PfStatus pf_numerical_diffusivity(size_t p, double pe, double gamma_eff, double *out);

// Smallest degree whose nodal solution is oscillation free at `pe`.
//
// # Safety
// `out` must be valid for writes.
enum PfStatus pf_min_degree_for_pe(double pe, size_t *out);

// Solves the stabilized Darcy problem on an `nx` by `ny` mesh of the unit
// square. The inverse permeability is piecewise constant on a `gx` by `gy`
// grid of subdomains, numbered row by row from the lower left;
// `entries` holds `2 * gx * gy` values `(a_0, b_0, a_1, b_1, ...)`. With
// `manufactured` nonzero the source of the built-in manufactured solution
// is used, otherwise the source is zero.
//
// # Safety
// `entries` must point to `2 * gx * gy` readable values and `out` must be
// valid for writes.
enum PfStatus pf_darcy_solve(size_t nx,
                             size_t ny,
                             size_t gx,
                             size_t gy,
                             const double *entries,
                             int32_t manufactured,
                             struct PfDarcy **out);

// Number of mesh vertices, which is the length of each state array.
//
// # Safety
// `handle` must come from [`pf_darcy_solve`]; `out` must be valid for writes.
enum PfStatus pf_darcy_num_vertices(const struct PfDarcy *handle, size_t *out);

// Copies the nodal `u_x`, `u_y` and `p` values (vertex `i + (nx + 1) j`)
// into three caller buffers of `len` entries each.
//
// # Safety
// `handle` must come from [`pf_darcy_solve`]; each buffer must be valid for
// `len` writes.
enum PfStatus pf_darcy_state(const struct PfDarcy *handle,
                             double *ux,
                             double *uy,
                             double *p,
                             size_t len);

// L² errors of velocity and pressure against the manufactured solution.
// Only available when the problem was solved with the manufactured source.
//
// # Safety
// `handle` must come from [`pf_darcy_solve`]; outputs must be valid for
// writes.
enum PfStatus pf_darcy_l2_errors(const struct PfDarcy *handle, double *velocity, double *pressure);

// Releases a Darcy handle. Null is ignored.
//
// # Safety
// `handle` must come from [`pf_darcy_solve`] and not be used afterwards.
void pf_darcy_free(struct PfDarcy *handle);

// Eight spheres of diameter `d` in two hexagonal layers.
//
// # Safety
// `out` must be valid for writes.
enum PfStatus pf_pack_hexagonal(double d, struct PfPack **out);

// Random pack in a box of edges `lx`, `ly`, `lz` (each at least `4 d`),
// reproducible from `seed`.
//
// # Safety
// `out` must be valid for writes.
enum PfStatus pf_pack_random(double lx,
                             double ly,
                             double lz,
                             double d,
                             uint64_t seed,
                             struct PfPack **out);

// Number of spheres in the pack.
//
// # Safety
// `handle` must be a live pack; `out` must be valid for writes.
enum PfStatus pf_pack_len(const struct PfPack *handle, size_t *out);

// Porosity of the ideal (not voxelized) pack.
//
// # Safety
// `handle` must be a live pack; `out` must be valid for writes.
enum PfStatus pf_pack_porosity(const struct PfPack *handle, double *out);

// Copies the sphere centres as `x0, y0, z0, x1, ...` into `buf`, which must
// hold at least `3 * len` values.
//
// # Safety
// `handle` must be a live pack; `buf` must be valid for `len` writes.
enum PfStatus pf_pack_centers(const struct PfPack *handle, double *buf, size_t len);

// Voxelizes the pack with `cells_per_diameter` cells across a sphere,
// solves Stokes flow driven by the pressure gradient `forcing` along x and
// reports the permeability and the voxel porosity.
//
// # Safety
// `handle` must be a live pack; outputs must be valid for writes.
enum PfStatus pf_pack_permeability(const struct PfPack *handle,
                                   size_t cells_per_diameter,
                                   double viscosity,
                                   double forcing,
                                   double *permeability,
                                   double *porosity);

// Releases a pack handle. Null is ignored.
//
// # Safety
// `handle` must come from a `pf_pack_*` constructor and not be used
// afterwards.
void pf_pack_free(struct PfPack *handle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POROUSFLOW_H */
