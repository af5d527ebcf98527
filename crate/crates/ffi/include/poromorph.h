#ifndef POROMORPH_H
#define POROMORPH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PmStatus {
  PmStatus_Ok = 0,
  PmStatus_NullPointer = 1,
  PmStatus_InvalidArgument = 2,
  PmStatus_Io = 3,
  PmStatus_Format = 4,
  PmStatus_DimMismatch = 5,
  PmStatus_EmptyPorePhase = 6,
  PmStatus_NoPercolatingPath = 7,
  PmStatus_SolverFailed = 8,
  PmStatus_Internal = 9,
} PmStatus;

/**
 * Extracted pore network.
 */
typedef struct PmNetwork PmNetwork;

/**
 * Binary voxel volume.
 */
typedef struct PmVolume PmVolume;

typedef struct PmMorphometry {
  double porosity;
  /**
   * 1/m
   */
  double specific_area;
  int64_t euler_chi;
} PmMorphometry;

typedef struct PmNetworkStats {
  /**
   * m
   */
  double mean_pore_diameter;
  /**
   * m; NaN when the network has no throats.
   */
  double mean_throat_diameter;
  size_t pore_count;
  size_t throat_count;
} PmNetworkStats;

typedef struct PmGrfConfig {
  size_t size;
  double correlation_length;
  double threshold;
  size_t mode_count;
  uint64_t seed_spectrum;
  double voxel_size_um;
} PmGrfConfig;

typedef struct PmConditionOutcome {
  double achieved;
  double final_error;
  size_t outer_iterations;
  size_t simulator_calls;
  /**
   * 1 when the target was met within tolerance.
   */
  int32_t converged;
} PmConditionOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. Valid until the next
 * failing call on the same thread.
 */
const char *pm_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pm_version(void);

/**
 * Loads a VVOL file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum PmStatus pm_volume_load(const char *path, struct PmVolume **out);

/**
 * Builds a binary volume from `nx*ny*nz` bytes (x fastest; 0 solid, nonzero pore).
 *
 * # Safety
 * `data` must point to `nx*ny*nz` readable bytes and `out` must be writable.
 */
enum PmStatus pm_volume_from_binary(const uint8_t *data,
                                    size_t nx,
                                    size_t ny,
                                    size_t nz,
                                    double voxel_size_um,
                                    struct PmVolume **out);

/**
 * # Safety
 * `vol` must be a live handle and `path` a NUL-terminated string.
 */
enum PmStatus pm_volume_save(const struct PmVolume *vol, const char *path);

/**
 * # Safety
 * `vol` must be null or a handle not yet freed.
 */
void pm_volume_free(struct PmVolume *vol);

/**
 * Writes `[nx, ny, nz]` to `out_dims`.
 *
 * # Safety
 * `vol` must be live and `out_dims` must point to three writable `size_t`.
 */
enum PmStatus pm_volume_dims(const struct PmVolume *vol, size_t *out_dims);

/**
 * # Safety
 * `vol` must be live and `out` writable.
 */
enum PmStatus pm_porosity(const struct PmVolume *vol, double *out);

/**
 * # Safety
 * `vol` must be live and `out` writable.
 */
enum PmStatus pm_minkowski(const struct PmVolume *vol, struct PmMorphometry *out);

/**
 * Extracts a pore network with default parameters; `axis` is 0, 1 or 2.
 *
 * # Safety
 * `vol` must be live and `out` writable.
 */
enum PmStatus pm_network_extract(const struct PmVolume *vol, uint32_t axis, struct PmNetwork **out);

/**
 * # Safety
 * `net` must be null or a handle not yet freed.
 */
void pm_network_free(struct PmNetwork *net);

/**
 * # Safety
 * `net` must be live and `out` writable.
 */
enum PmStatus pm_network_stats(const struct PmNetwork *net, struct PmNetworkStats *out);

/**
 * Permeability in mD of `net` along the axis it was extracted for; the
 * sample size comes from `vol`.
 *
 * # Safety
 * `net` and `vol` must be live and `out_k_md` writable.
 */
enum PmStatus pm_permeability(const struct PmNetwork *net,
                              const struct PmVolume *vol,
                              double viscosity,
                              double delta_p,
                              double *out_k_md);

/**
 * Default GRF generator settings.
 */
struct PmGrfConfig pm_grf_config_default(void);

/**
 * Generates a GRF volume from `dim` latent values.
 *
 * # Safety
 * `config` must be readable, `z` must point to `dim` doubles, `out` writable.
 */
enum PmStatus pm_grf_generate(const struct PmGrfConfig *config,
                              const double *z,
                              size_t dim,
                              struct PmVolume **out);

/**
 * Conditions a GRF generator on one property.
 *
 * `kind`: 0 porosity, 1 permeability (mD), 2 mean pore size (m), 3 mean
 * throat size (m). A `tolerance` of 0 selects the default for the kind.
 * The final latent is written to `out_z` (length `mode_count`) and the
 * final volume to `out_volume` when that pointer is non-null.
 *
 * # Safety
 * `config` and `out` must be valid; `out_z` must hold `mode_count` doubles.
 */
enum PmStatus pm_condition_grf(const struct PmGrfConfig *config,
                               uint32_t kind,
                               double value,
                               double tolerance,
                               size_t max_outer_iters,
                               uint64_t seed,
                               double *out_z,
                               struct PmVolume **out_volume,
                               struct PmConditionOutcome *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POROMORPH_H */
