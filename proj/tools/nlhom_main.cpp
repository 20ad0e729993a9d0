#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "nlhom/cli_io.hpp"
#include "nlhom/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"nlhom: a numerical laboratory for heterogeneous fractional "
               "p-Laplace problems and nonlocal homogenization"};
  app.require_subcommand(1);

  std::string configPath;
  int threads = -1;
  std::string outDir;
  auto* runCmd = app.add_subcommand("run", "Run an experiment from a config file");
  runCmd->add_option("--config", configPath, "TOML-style config file")
      ->required();
  runCmd->add_option("--threads", threads, "Worker thread cap (0 = auto)");
  runCmd->add_option("--out", outDir, "Output directory (overrides outputPath)");

  app.add_subcommand(
      "selftest",
      "Run the calculus and solver self-tests with built-in defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return nlhom::kStatusConfigError;
  }

  try {
    if (runCmd->parsed()) {
      nlhom::ExperimentConfig config = nlhom::load_config_file(configPath);
      if (threads >= 0) {
        config.threads = threads;
      }
      if (!outDir.empty()) {
        config.outputPath = outDir;
      }
      return nlhom::run_experiment(config, std::cout);
    }

    int status = nlhom::kStatusPass;
    for (const auto& [name, dir] :
         {std::pair<std::string, std::string>{"calculus-selftest",
                                              "nlhom-selftest-calculus"},
          std::pair<std::string, std::string>{"solver-selftest",
                                              "nlhom-selftest-solver"}}) {
      nlhom::ExperimentConfig config;
      config.experiment = name;
      config.outputPath = dir;
      const int st = nlhom::run_experiment(config, std::cout);
      if (status == nlhom::kStatusPass) {
        status = st;
      }
    }
    return status;
  } catch (const nlhom::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return nlhom::kStatusIoError;
  } catch (const nlhom::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return nlhom::kStatusConfigError;
  }
}
