#include "core/runner.hpp"

#include "core/errors.hpp"

namespace mfg {

void run_command(const std::string& command, const std::string&, const std::string&,
                 const std::string&, const RunSettings&) {
  fail(errc::internal, "command dispatch not wired yet: " + command);
}

std::string version_string() { return "mfglab 1.0.0"; }

}  // namespace mfg
