#pragma once

#include <string>

#include "core/grid.hpp"

namespace mfg {

// Binary field container, version 1, little-endian throughout:
//   magic "MFGF" | version u16 | dim u8 | node counts u32 per axis |
//   extents (lo,hi) f64 per axis | nt u32 | payload f64, row-major,
//   time-major slabs.
// nt counts the time slabs in the payload and is 0 for spatial fields
// (one slab follows). The header carries no time extent; the run manifest
// owns the horizon, so readers of space-time files are handed it.

void write_field(const std::string& path, const ScalarField& f);
void write_field(const std::string& path, const SpaceTimeField& f);

struct LoadedField {
  GridSpec spec;  // horizon is 0 and must be supplied by the caller for nt > 0
  bool spacetime = false;
  std::vector<double> data;
};

LoadedField read_field(const std::string& path);
ScalarField read_scalar_field(const std::string& path);
SpaceTimeField read_spacetime_field(const std::string& path, double horizon);

// Complex fields persist as a pair of real files <base>_re.mfgf / <base>_im.mfgf.
std::string complex_field_path(const std::string& base, bool imag);

// Boundary trace CSV. Header: face, idx1..idx{dim-1}, t, value, normal_derivative.
// Tangential indices follow increasing axis order; t is the level time.
void write_trace_csv(const std::string& path, const BoundaryTrace& t);
BoundaryTrace read_trace_csv(const std::string& path, const Grid& g);

// All artifact writes funnel through a temp-file-plus-rename so partially
// written outputs never appear under their final name.
void atomic_write_bytes(const std::string& path, const std::string& bytes);
std::string read_file_bytes(const std::string& path);

// Stable content hash used by manifests (FNV-1a over the raw bytes).
std::string content_hash(const std::string& bytes);

}  // namespace mfg
