#include <string>
#include <vector>

#include <CLI11.hpp>

#include "orthoflow/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"orthoflow: minimizing-movement flows into O+(n)/O-(n) with a "
               "two-phase interface, plus the sphere-valued toy flow and the "
               "manifold-algebra verification suites"};
  app.require_subcommand(1);

  std::string config_path, out_override, param;
  std::string values_csv;

  auto* run = app.add_subcommand("run", "execute one configuration");
  run->add_option("config", config_path, "JSON configuration file")->required();
  run->add_option("--out", out_override, "output directory override");

  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep");
  sweep->add_option("config", config_path, "JSON configuration file")->required();
  sweep->add_option("--param", param, "parameter to sweep: N | seed | lambda")->required();
  sweep->add_option("--values", values_csv, "comma-separated values")->required();
  sweep->add_option("--out", out_override, "output directory override");

  int vn = 4, vtrials = 1000;
  std::uint64_t vseed = 7;
  auto* verify = app.add_subcommand("verify", "run the algebra verification suites");
  verify->add_option("--n", vn, "matrix dimension");
  verify->add_option("--trials", vtrials, "random trials per check");
  verify->add_option("--seed", vseed, "master seed");
  verify->add_option("--out", out_override, "output directory override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : orthoflow::cli::kExitUsage;
  }

  if (run->parsed()) return orthoflow::cli::run_config(config_path, out_override);
  if (sweep->parsed()) {
    std::vector<std::string> values;
    std::size_t pos = 0;
    while (pos <= values_csv.size()) {
      const std::size_t comma = values_csv.find(',', pos);
      const std::string tok = values_csv.substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos);
      if (!tok.empty()) values.push_back(tok);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return orthoflow::cli::sweep_config(config_path, param, values, out_override);
  }
  return orthoflow::cli::verify_command(vn, vtrials, vseed, out_override);
}
