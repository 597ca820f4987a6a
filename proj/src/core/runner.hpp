#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace mfg {

struct RunSettings {
  bool serial = false;
  std::optional<std::uint64_t> seed_override;
};

// Executes one pipeline command against a JSON run configuration. Throws
// Error; the C shim translates that into status codes. ground_truth may be
// empty; out_dir empty means "use the config's own output entry".
void run_command(const std::string& command, const std::string& config_path,
                 const std::string& out_dir, const std::string& ground_truth,
                 const RunSettings& settings);

std::string version_string();

}  // namespace mfg
