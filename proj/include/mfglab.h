/* Stable C surface of the mean field games laboratory.
 *
 * All entry points are exception-free: failures come back as mfg_status and
 * a human-readable message retained on the context until the next call.
 * Handles are opaque; every create has a matching destroy/free.
 */
#ifndef MFGLAB_H
#define MFGLAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MFGLAB_API __declspec(dllexport)
#else
#define MFGLAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mfg_status {
  MFG_OK = 0,
  MFG_ERR_INVALID_ARGUMENT = 1,
  MFG_ERR_IO = 2,
  MFG_ERR_CONFIG = 3,
  MFG_ERR_MAX_ITERATIONS = 4,
  MFG_ERR_BLOW_UP = 5,
  MFG_ERR_NON_CONTRACTION = 6,
  MFG_ERR_INCOMPATIBLE_DATA = 7,
  MFG_ERR_PROPERTY_FAILED = 8,
  MFG_ERR_INTERNAL = 9
} mfg_status;

typedef struct mfg_context mfg_context;

MFGLAB_API mfg_context* mfg_context_create(void);
MFGLAB_API void mfg_context_destroy(mfg_context* ctx);

/* Message for the most recent failing call on this context ("" if none).
 * The pointer stays valid until the next call that uses the context. */
MFGLAB_API const char* mfg_context_last_error(const mfg_context* ctx);

/* serial != 0 forces single-threaded execution (bit-reproducible reruns). */
MFGLAB_API void mfg_context_set_serial(mfg_context* ctx, int serial);
/* Overrides the RNG seed from the config file. */
MFGLAB_API void mfg_context_set_seed(mfg_context* ctx, uint64_t seed);

/* Runs one pipeline command: "forward", "linearize", "probe", "measure",
 * "reconstruct" or "verify". config_path names a JSON run configuration;
 * artifacts land under out_dir (falls back to the config's own out entry
 * when NULL). ground_truth optionally names a truth config used only to
 * attach error metrics to reconstruction reports. */
MFGLAB_API mfg_status mfg_run(mfg_context* ctx, const char* command, const char* config_path,
                   const char* out_dir, const char* ground_truth);

/* Conventional process exit code for a status:
 * 0 ok, 2 configuration/input problems, 3 solver failures, 4 failed property. */
MFGLAB_API int mfg_status_exit_code(mfg_status s);

/* Read access to the binary field container. */
typedef struct mfg_field mfg_field;

MFGLAB_API mfg_status mfg_field_load(mfg_context* ctx, const char* path, mfg_field** out);
MFGLAB_API void mfg_field_free(mfg_field* f);
MFGLAB_API int mfg_field_dim(const mfg_field* f);
MFGLAB_API int mfg_field_axis_nodes(const mfg_field* f, int axis);
/* Number of time slabs in the payload; 0 marks a spatial field. */
MFGLAB_API int mfg_field_time_slabs(const mfg_field* f);
MFGLAB_API const double* mfg_field_data(const mfg_field* f, size_t* count);

MFGLAB_API const char* mfg_version(void);

#ifdef __cplusplus
}
#endif

#endif /* MFGLAB_H */
