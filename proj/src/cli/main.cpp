// Command-line driver. Parses arguments, forwards to the shared library
// through the C API, and maps statuses to process exit codes.

#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "mfglab.h"

int main(int argc, char** argv) {
  CLI::App app{"mfglab: forward, linearized and inverse solvers for a mean "
               "field game system on box domains"};
  app.require_subcommand(1);

  struct Args {
    std::string config;
    std::string out;
    std::string ground_truth;
    std::uint64_t seed = 0;
    bool has_seed = false;
    bool serial = false;
  };

  const char* names[] = {"forward", "linearize", "probe", "measure", "reconstruct",
                         "verify"};
  const char* blurbs[] = {
      "solve the coupled system for one run configuration",
      "solve the expansion systems for the configured perturbations",
      "build probing fields and their decay report",
      "produce measurement archives (boundary data only)",
      "run the reconstruction pipeline against an archive",
      "run the property suite for a configuration",
  };

  Args args;
  for (int i = 0; i < 6; ++i) {
    CLI::App* sub = app.add_subcommand(names[i], blurbs[i]);
    sub->add_option("--config", args.config, "JSON run configuration")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "output directory (defaults to the config entry)");
    sub->add_option("--ground-truth", args.ground_truth,
                    "truth config for error columns in reports");
    sub->add_option("--seed", args.seed, "override the config RNG seed")
        ->each([&](const std::string&) { args.has_seed = true; });
    sub->add_flag("--serial", args.serial, "single-threaded, bit-reproducible run");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  mfg_context* ctx = mfg_context_create();
  if (!ctx) {
    std::fprintf(stderr, "error: out of memory\n");
    return 3;
  }
  mfg_context_set_serial(ctx, args.serial ? 1 : 0);
  if (args.has_seed) mfg_context_set_seed(ctx, args.seed);

  const mfg_status st = mfg_run(ctx, command.c_str(), args.config.c_str(),
                                args.out.empty() ? nullptr : args.out.c_str(),
                                args.ground_truth.empty() ? nullptr
                                                          : args.ground_truth.c_str());
  if (st != MFG_OK)
    std::fprintf(stderr, "mfglab %s failed: %s\n", command.c_str(),
                 mfg_context_last_error(ctx));
  const int code = mfg_status_exit_code(st);
  mfg_context_destroy(ctx);
  return code;
}
