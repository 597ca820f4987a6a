#pragma once

#include <stdexcept>
#include <string>

namespace mfg {

// Failure classes surfaced through the C API and mapped to CLI exit codes.
enum class errc {
  invalid_argument = 1,
  io_failure = 2,
  config_error = 3,
  max_iterations = 4,
  blow_up = 5,
  non_contraction = 6,
  incompatible_data = 7,
  property_failed = 8,
  internal = 9,
};

struct Error : std::runtime_error {
  errc code;
  Error(errc c, const std::string& what) : std::runtime_error(what), code(c) {}
};

[[noreturn]] inline void fail(errc c, const std::string& what) { throw Error(c, what); }

inline void require(bool ok, errc c, const std::string& what) {
  if (!ok) fail(c, what);
}

}  // namespace mfg
