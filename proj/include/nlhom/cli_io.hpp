#ifndef NLHOM_CLI_IO_HPP
#define NLHOM_CLI_IO_HPP

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "nlhom/homogenization_lab.hpp"

namespace nlhom {

inline constexpr std::string_view kCodeVersion = "1.0.0";

// Exit-status contract of run_experiment.
inline constexpr int kStatusPass = 0;
inline constexpr int kStatusAssertionFail = 1;
inline constexpr int kStatusConfigError = 2;
inline constexpr int kStatusSolveFailure = 3;
inline constexpr int kStatusIoError = 4;

// Everything a run needs, with defaults matching the built-in experiments.
// tol = 0 and threads = 0 mean "resolve automatically".
struct ExperimentConfig {
  std::string experiment;  // h-sufficiency | h-necessity |
                           // checkerboard-contrast | calculus-selftest |
                           // solver-selftest
  double s = 0.4;
  double p = 2.0;
  std::vector<std::size_t> kList = {1, 2, 4, 8, 16};
  bool kListSet = false;  // true iff kList came from the config file
  std::size_t nCellsBase = 64;
  double mean = 2.0;       // oscillation family
  double amplitude = 1.0;  // oscillation family
  double alpha = 1.0;      // checkerboard family
  double beta = 3.0;       // checkerboard family
  double tol = 0.0;
  int pointsPerCell = 3;
  int diagonalLevels = 6;
  double gradingRatio = 0.5;
  std::string outputPath = "nlhom-report";
  int threads = 0;
};

// Parses the TOML-style key = value document. When a [config] section is
// present only its keys are read (so a run manifest re-parses as a config);
// otherwise the keys must be at top level. Unknown keys in the read scope
// throw ConfigError naming the key. Values: numbers, quoted or bare strings,
// and [..] integer arrays.
ExperimentConfig parse_config_text(const std::string& text);

// Reads and parses a config file; unreadable file throws IoError.
ExperimentConfig load_config_file(const std::string& path);

// Range-checks every field; throws ConfigError naming the offending key.
void validate_config(const ExperimentConfig& config);

// The frozen report table: header exactly
// k,nCells,stateWeakGap,stateStrongGap,fluxWeakGap,coeffWeakStarGap,
// energyGap,divCurlGap,solveIterations (one line), gaps in %.12e.
std::string render_csv(const HReport& report);

// Writes the report table to csvPath (directories created as needed);
// throws IoError when the path cannot be written.
void emit_report(const HReport& report, const std::string& csvPath);

// The run manifest: schema-versioned metadata plus the resolved config in a
// [config] section, so the manifest itself re-runs the identical experiment.
std::string render_manifest(const ExperimentConfig& resolved,
                            double wallTimeSeconds,
                            const std::vector<std::string>& reportFiles,
                            int exitStatus);

// Runs the named experiment: writes the report CSV(s) and manifest under
// config.outputPath, streams PASS/FAIL lines to log, and returns the exit
// status (0 pass, 1 assertion fail, 2 config error, 3 solver failure,
// 4 I/O error).
int run_experiment(const ExperimentConfig& config, std::ostream& log);

}  // namespace nlhom

#endif
