#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Experiment driver: parses a JSON run configuration, dispatches the
// fixed/moving/sphere pipelines or the verification suites, persists trace
// CSVs, snapshots, and a summary JSON with named invariant verdicts.
//
// Exit codes: 0 all checked invariants passed, 1 invariant failure,
// 2 usage/config error.

namespace orthoflow::cli {

inline constexpr int kExitPass = 0;
inline constexpr int kExitInvariant = 1;
inline constexpr int kExitUsage = 2;

// The ORTHOFLOW_OUT environment variable overrides the output root;
// out_override (from the command line) wins over both.
int run_config(const std::string& config_path, const std::string& out_override = "");

int sweep_config(const std::string& config_path, const std::string& param,
                 const std::vector<std::string>& values,
                 const std::string& out_override = "");

int verify_command(int n, int trials, std::uint64_t seed,
                   const std::string& out_override = "");

} // namespace orthoflow::cli
