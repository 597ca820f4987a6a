// C shim over the C++ core: opaque handles, status codes, no exceptions
// across the boundary.

#include "mfglab.h"

#include <cstring>
#include <string>

#include "core/errors.hpp"
#include "core/field_io.hpp"
#include "core/runner.hpp"

struct mfg_context {
  std::string last_error;
  mfg::RunSettings settings;
};

struct mfg_field {
  mfg::LoadedField lf;
};

namespace {

mfg_status to_status(mfg::errc c) {
  switch (c) {
    case mfg::errc::invalid_argument: return MFG_ERR_INVALID_ARGUMENT;
    case mfg::errc::io_failure: return MFG_ERR_IO;
    case mfg::errc::config_error: return MFG_ERR_CONFIG;
    case mfg::errc::max_iterations: return MFG_ERR_MAX_ITERATIONS;
    case mfg::errc::blow_up: return MFG_ERR_BLOW_UP;
    case mfg::errc::non_contraction: return MFG_ERR_NON_CONTRACTION;
    case mfg::errc::incompatible_data: return MFG_ERR_INCOMPATIBLE_DATA;
    case mfg::errc::property_failed: return MFG_ERR_PROPERTY_FAILED;
    case mfg::errc::internal: return MFG_ERR_INTERNAL;
  }
  return MFG_ERR_INTERNAL;
}

// Runs the body, capturing any exception into the context's error slot.
template <class Body>
mfg_status guarded(mfg_context* ctx, Body&& body) {
  if (!ctx) return MFG_ERR_INVALID_ARGUMENT;
  ctx->last_error.clear();
  try {
    body();
    return MFG_OK;
  } catch (const mfg::Error& e) {
    ctx->last_error = e.what();
    return to_status(e.code);
  } catch (const std::exception& e) {
    ctx->last_error = e.what();
    return MFG_ERR_INTERNAL;
  } catch (...) {
    ctx->last_error = "unknown failure";
    return MFG_ERR_INTERNAL;
  }
}

}  // namespace

extern "C" {

mfg_context* mfg_context_create(void) { return new (std::nothrow) mfg_context(); }

void mfg_context_destroy(mfg_context* ctx) { delete ctx; }

const char* mfg_context_last_error(const mfg_context* ctx) {
  return ctx ? ctx->last_error.c_str() : "null context";
}

void mfg_context_set_serial(mfg_context* ctx, int serial) {
  if (ctx) ctx->settings.serial = serial != 0;
}

void mfg_context_set_seed(mfg_context* ctx, uint64_t seed) {
  if (ctx) ctx->settings.seed_override = seed;
}

mfg_status mfg_run(mfg_context* ctx, const char* command, const char* config_path,
                   const char* out_dir, const char* ground_truth) {
  return guarded(ctx, [&]() {
    mfg::require(command && config_path, mfg::errc::invalid_argument,
                 "command and config path are required");
    mfg::run_command(command, config_path, out_dir ? out_dir : "",
                     ground_truth ? ground_truth : "", ctx->settings);
  });
}

int mfg_status_exit_code(mfg_status s) {
  switch (s) {
    case MFG_OK: return 0;
    case MFG_ERR_INVALID_ARGUMENT:
    case MFG_ERR_IO:
    case MFG_ERR_CONFIG: return 2;
    case MFG_ERR_PROPERTY_FAILED: return 4;
    default: return 3;
  }
}

mfg_status mfg_field_load(mfg_context* ctx, const char* path, mfg_field** out) {
  return guarded(ctx, [&]() {
    mfg::require(path && out, mfg::errc::invalid_argument, "path and out are required");
    auto* f = new mfg_field{mfg::read_field(path)};
    *out = f;
  });
}

void mfg_field_free(mfg_field* f) { delete f; }

int mfg_field_dim(const mfg_field* f) { return f ? f->lf.spec.dim : 0; }

int mfg_field_axis_nodes(const mfg_field* f, int axis) {
  if (!f || axis < 0 || axis >= f->lf.spec.dim) return 0;
  return f->lf.spec.nx[axis];
}

int mfg_field_time_slabs(const mfg_field* f) {
  return f && f->lf.spacetime ? f->lf.spec.nt + 1 : 0;
}

const double* mfg_field_data(const mfg_field* f, size_t* count) {
  if (!f) {
    if (count) *count = 0;
    return nullptr;
  }
  if (count) *count = f->lf.data.size();
  return f->lf.data.data();
}

const char* mfg_version(void) {
  static const std::string v = mfg::version_string();
  return v.c_str();
}

}  // extern "C"
