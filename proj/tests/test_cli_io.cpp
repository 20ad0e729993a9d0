#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "nlhom/cli_io.hpp"
#include "nlhom/concurrency.hpp"
#include "nlhom/errors.hpp"

using namespace nlhom;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "nlhom-cli-tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig small_sufficiency_config(const fs::path& outDir) {
  ExperimentConfig cfg;
  cfg.experiment = "h-sufficiency";
  cfg.kList = {1};
  cfg.kListSet = true;
  cfg.nCellsBase = 16;
  cfg.outputPath = outDir.string();
  return cfg;
}

}  // namespace

TEST_CASE("config text parsing") {
  SUBCASE("an empty document yields the documented defaults") {
    const ExperimentConfig cfg = parse_config_text("");
    CHECK(cfg.experiment.empty());
    CHECK(cfg.s == 0.4);
    CHECK(cfg.p == 2.0);
    CHECK(cfg.kList == std::vector<std::size_t>{1, 2, 4, 8, 16});
    CHECK_FALSE(cfg.kListSet);
    CHECK(cfg.nCellsBase == 64);
    CHECK(cfg.tol == 0.0);
    CHECK(cfg.pointsPerCell == 3);
    CHECK(cfg.diagonalLevels == 6);
    CHECK(cfg.gradingRatio == 0.5);
    CHECK(cfg.outputPath == "nlhom-report");
    CHECK(cfg.threads == 0);
  }

  SUBCASE("every key parses, with comments, CRLF endings, and quoting") {
    const std::string text =
        "# experiment configuration\n"
        "experiment = h-sufficiency\n"
        "s = 0.3\r\n"
        "p = 2.5  # the growth exponent\n"
        "kList = [1, 2, 3]\n"
        "nCellsBase = 32\n"
        "mean = 2.25\n"
        "amplitude = 0.75\n"
        "alpha = 1.5\n"
        "beta = 2.5\n"
        "tol = 1e-9\n"
        "pointsPerCell = 4\n"
        "diagonalLevels = 8\n"
        "gradingRatio = 0.375\n"
        "outputPath = \"out#dir/x\"\n"
        "threads = 2\n";
    const ExperimentConfig cfg = parse_config_text(text);
    CHECK(cfg.experiment == "h-sufficiency");
    CHECK(cfg.s == 0.3);
    CHECK(cfg.p == 2.5);
    CHECK(cfg.kList == std::vector<std::size_t>{1, 2, 3});
    CHECK(cfg.kListSet);
    CHECK(cfg.nCellsBase == 32);
    CHECK(cfg.mean == 2.25);
    CHECK(cfg.amplitude == 0.75);
    CHECK(cfg.alpha == 1.5);
    CHECK(cfg.beta == 2.5);
    CHECK(cfg.tol == 1e-9);
    CHECK(cfg.pointsPerCell == 4);
    CHECK(cfg.diagonalLevels == 8);
    CHECK(cfg.gradingRatio == 0.375);
    CHECK(cfg.outputPath == "out#dir/x");  // '#' inside quotes is kept
    CHECK(cfg.threads == 2);
  }

  SUBCASE("a [config] section scopes the keys; metadata outside is ignored") {
    const std::string text =
        "manifestVersion = 1\n"
        "codeVersion = \"9.9.9\"\n"
        "wallTimeSeconds = 1.5\n"
        "\n"
        "[config]\n"
        "experiment = \"h-necessity\"\n"
        "s = 0.45\n";
    const ExperimentConfig cfg = parse_config_text(text);
    CHECK(cfg.experiment == "h-necessity");
    CHECK(cfg.s == 0.45);
    CHECK(cfg.p == 2.0);  // untouched default
  }

  SUBCASE("an unknown section is rejected when no [config] exists") {
    try {
      parse_config_text("[meta]\nx = 1\n");
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()) ==
            "unknown section [meta] (only [config] is recognized)");
      CHECK(e.key == "meta");
    }
  }

  SUBCASE("malformed lines carry the offending text") {
    CHECK_THROWS_WITH_AS(parse_config_text("[config\ns = 1\n"),
                         "malformed section header: [config", ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("just some words\n"),
                         "expected key = value, got \"just some words\"",
                         ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text(" = 5\n"),
                         "empty config key before \"=\"", ConfigError);
  }

  SUBCASE("unknown keys name themselves") {
    try {
      parse_config_text("bogus = 1\n");
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()) == "unknown config key \"bogus\"");
      CHECK(e.key == "bogus");
    }
  }

  SUBCASE("scalar values are type-checked") {
    CHECK_THROWS_WITH_AS(parse_config_text("s = abc\n"),
                         "config key \"s\": expected a finite number, got \"abc\"",
                         ConfigError);
    CHECK_THROWS_WITH_AS(
        parse_config_text("nCellsBase = 1.5\n"),
        "config key \"nCellsBase\": expected an integer, got \"1.5\"",
        ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("outputPath = \"abc\n"),
                         "config key \"outputPath\": unterminated string \"abc",
                         ConfigError);
  }

  SUBCASE("index arrays are validated entry by entry") {
    CHECK_THROWS_WITH_AS(
        parse_config_text("kList = 1,2\n"),
        "config key \"kList\": expected an array like [1, 2, 4], got \"1,2\"",
        ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("kList = [1,,2]\n"),
                         "config key \"kList\": empty entry in array \"[1,,2]\"",
                         ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("kList = [0]\n"),
                         "config key \"kList\": entries must be >= 1, got 0",
                         ConfigError);

    // An empty array parses; validate_config rejects it later.
    const ExperimentConfig cfg = parse_config_text("kList = []\n");
    CHECK(cfg.kList.empty());
    CHECK(cfg.kListSet);
  }
}

TEST_CASE("config validation names the offending key") {
  ExperimentConfig base;
  base.experiment = "h-sufficiency";
  validate_config(base);  // the defaults are valid

  SUBCASE("experiment") {
    ExperimentConfig c = base;
    c.experiment = "nope";
    try {
      validate_config(c);
      FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.key == "experiment");
      CHECK(std::string(e.what()) ==
            "config key \"experiment\": expected one of h-sufficiency | "
            "h-necessity | checkerboard-contrast | calculus-selftest | "
            "solver-selftest, got \"nope\"");
    }
  }

  SUBCASE("numeric ranges") {
    ExperimentConfig c = base;
    c.s = 1.0;
    CHECK_THROWS_WITH_AS(validate_config(c),
                         "config key \"s\": must lie in (0, 1), got 1",
                         ConfigError);
    c = base;
    c.p = 1.0;
    CHECK_THROWS_WITH_AS(validate_config(c),
                         "config key \"p\": must be > 1, got 1", ConfigError);
    c = base;
    c.kList.clear();
    CHECK_THROWS_WITH_AS(validate_config(c),
                         "config key \"kList\": needs at least one index",
                         ConfigError);
    c = base;
    c.kList = {1, 0};
    CHECK_THROWS_WITH_AS(validate_config(c),
                         "config key \"kList\": indices must be >= 1",
                         ConfigError);
    c = base;
    c.nCellsBase = 1;
    CHECK_THROWS_WITH_AS(validate_config(c),
                         "config key \"nCellsBase\": must be >= 2, got 1",
                         ConfigError);
    c = base;
    c.tol = -1.0;
    CHECK_THROWS_WITH_AS(
        validate_config(c),
        "config key \"tol\": must be >= 0 (0 means automatic), got -1",
        ConfigError);
    c = base;
    c.pointsPerCell = 1;
    CHECK_THROWS_WITH_AS(validate_config(c),
                         "config key \"pointsPerCell\": must be in [2, 32], got 1",
                         ConfigError);
    c = base;
    c.diagonalLevels = 65;
    CHECK_THROWS_WITH_AS(
        validate_config(c),
        "config key \"diagonalLevels\": must be in [3, 64], got 65",
        ConfigError);
    c = base;
    c.gradingRatio = 1.0;
    CHECK_THROWS_WITH_AS(validate_config(c),
                         "config key \"gradingRatio\": must lie in (0, 1), got 1",
                         ConfigError);
    c = base;
    c.threads = 65;
    CHECK_THROWS_WITH_AS(
        validate_config(c),
        "config key \"threads\": must be in [0, 64] (0 = auto), got 65",
        ConfigError);
    c = base;
    c.outputPath.clear();
    CHECK_THROWS_WITH_AS(validate_config(c),
                         "config key \"outputPath\": must not be empty",
                         ConfigError);
  }

  SUBCASE("experiment-specific couplings") {
    ExperimentConfig c = base;
    c.mean = 1.0;
    c.amplitude = 1.0;
    CHECK_THROWS_WITH_AS(
        validate_config(c),
        "config keys \"mean\"/\"amplitude\": require mean - |amplitude| > 0, "
        "got mean=1, amplitude=1",
        ConfigError);

    c = base;
    c.experiment = "checkerboard-contrast";
    c.alpha = 0.0;
    CHECK_THROWS_WITH_AS(validate_config(c),
                         "config key \"alpha\": must be > 0, got 0", ConfigError);
    c.alpha = 2.0;
    c.beta = 2.0;
    CHECK_THROWS_WITH_AS(validate_config(c),
                         "config keys \"alpha\"/\"beta\": must differ so the "
                         "arithmetic and harmonic means separate",
                         ConfigError);

    // The oscillation coupling is not applied to other experiments.
    c = base;
    c.experiment = "h-necessity";
    c.mean = 1.0;
    c.amplitude = 1.0;
    validate_config(c);
  }
}

TEST_CASE("report table renders with a frozen header and %.12e gaps") {
  HReport report;
  report.rows.push_back(
      {1, 64, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.0015, 7});
  report.rows.push_back({2, 128, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 12});

  const std::string want =
      "k,nCells,stateWeakGap,stateStrongGap,fluxWeakGap,coeffWeakStarGap,"
      "energyGap,divCurlGap,solveIterations\n"
      "1,64,5.000000000000e-01,2.500000000000e-01,1.250000000000e-01,"
      "6.250000000000e-02,3.125000000000e-02,1.500000000000e-03,7\n"
      "2,128,1.000000000000e+00,1.000000000000e+00,1.000000000000e+00,"
      "1.000000000000e+00,1.000000000000e+00,1.000000000000e+00,12\n";
  CHECK(render_csv(report) == want);
}

TEST_CASE("manifest renders the resolved config and reparses identically") {
  ExperimentConfig cfg;
  cfg.experiment = "h-sufficiency";
  cfg.s = 0.45;
  cfg.p = 2.5;
  cfg.kList = {1, 2, 4};
  cfg.kListSet = true;
  cfg.nCellsBase = 32;
  cfg.mean = 2.25;
  cfg.amplitude = 0.75;
  cfg.alpha = 1.5;
  cfg.beta = 2.5;
  cfg.tol = 1e-9;
  cfg.pointsPerCell = 4;
  cfg.diagonalLevels = 7;
  cfg.gradingRatio = 0.375;
  cfg.outputPath = "out/x";
  cfg.threads = 3;

  const std::string manifest =
      render_manifest(cfg, 1.5, {"a.csv", "b.csv"}, 0);

  SUBCASE("schema lines are frozen") {
    CHECK(manifest.rfind("manifestVersion = 1\n", 0) == 0);
    CHECK(manifest.find("codeVersion = \"1.0.0\"\n") != std::string::npos);
    CHECK(manifest.find("experiment = \"h-sufficiency\"\n") != std::string::npos);
    CHECK(manifest.find("wallTimeSeconds = 1.500\n") != std::string::npos);
    CHECK(manifest.find("exitStatus = 0\n") != std::string::npos);
    CHECK(manifest.find("reportFiles = [\"a.csv\", \"b.csv\"]\n") !=
          std::string::npos);
    CHECK(manifest.find("\n[config]\n") != std::string::npos);
    CHECK(manifest.find("kList = [1, 2, 4]\n") != std::string::npos);
  }

  SUBCASE("the [config] section reproduces every field bit for bit") {
    const ExperimentConfig back = parse_config_text(manifest);
    CHECK(back.experiment == cfg.experiment);
    CHECK(back.s == cfg.s);
    CHECK(back.p == cfg.p);
    CHECK(back.kList == cfg.kList);
    CHECK(back.kListSet);
    CHECK(back.nCellsBase == cfg.nCellsBase);
    CHECK(back.mean == cfg.mean);
    CHECK(back.amplitude == cfg.amplitude);
    CHECK(back.alpha == cfg.alpha);
    CHECK(back.beta == cfg.beta);
    CHECK(back.tol == cfg.tol);
    CHECK(back.pointsPerCell == cfg.pointsPerCell);
    CHECK(back.diagonalLevels == cfg.diagonalLevels);
    CHECK(back.gradingRatio == cfg.gradingRatio);
    CHECK(back.outputPath == cfg.outputPath);
    CHECK(back.threads == cfg.threads);
  }
}

TEST_CASE("report and config files round-trip through the filesystem") {
  const fs::path dir = fresh_dir("files");

  SUBCASE("emit_report creates parent directories") {
    HReport report;
    report.rows.push_back({1, 16, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1});
    const fs::path target = dir / "nested" / "deep" / "report.csv";
    emit_report(report, target.string());
    CHECK(read_file(target) == render_csv(report));
  }

  SUBCASE("an unwritable path raises IoError") {
    const fs::path blocker = dir / "blocker";
    std::ofstream(blocker) << "in the way";
    const fs::path target = blocker / "report.csv";  // parent is a file
    try {
      emit_report(HReport{}, target.string());
      FAIL("expected an IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).rfind("cannot open for writing: ", 0) == 0);
    }
  }

  SUBCASE("load_config_file reads back what was written") {
    const fs::path file = dir / "run.toml";
    std::ofstream(file) << "experiment = \"h-necessity\"\nnCellsBase = 24\n";
    const ExperimentConfig cfg = load_config_file(file.string());
    CHECK(cfg.experiment == "h-necessity");
    CHECK(cfg.nCellsBase == 24);
  }

  SUBCASE("a missing config file raises IoError") {
    const fs::path missing = dir / "does-not-exist.toml";
    CHECK_THROWS_WITH_AS(load_config_file(missing.string()),
                         ("cannot read config file: " + missing.string()).c_str(),
                         IoError);
  }
}

TEST_CASE("a small oscillation run passes end to end") {
  const fs::path dir = fresh_dir("suff-pass");
  const ExperimentConfig cfg = small_sufficiency_config(dir);
  std::ostringstream log;

  const int status = run_experiment(cfg, log);
  CHECK(status == kStatusPass);

  for (const char* name :
       {"h-sufficiency-const1.csv", "h-sufficiency-sinpi.csv",
        "h-sufficiency-bump.csv", "checks.csv", "manifest.toml"}) {
    CHECK(fs::exists(dir / name));
  }

  const std::string text = log.str();
  CHECK(text.find("PASS sufficiency-trend-const1") != std::string::npos);
  CHECK(text.find("PASS g-equals-h-bump") != std::string::npos);
  CHECK(text.find("FAIL") == std::string::npos);
  CHECK(text.find("RESULT h-sufficiency status=0") != std::string::npos);

  const std::string checksCsv = read_file(dir / "checks.csv");
  CHECK(checksCsv.rfind("check,caseIndex,value,threshold,passed\n", 0) == 0);
  CHECK(checksCsv.find(",0\n") == std::string::npos);  // no failed rows

  const std::string manifest = read_file(dir / "manifest.toml");
  CHECK(manifest.find("exitStatus = 0\n") != std::string::npos);
  const ExperimentConfig resolved = parse_config_text(manifest);
  CHECK(resolved.tol == 1e-10);  // auto tolerance was resolved and recorded

  const std::string reportCsv = read_file(dir / "h-sufficiency-sinpi.csv");
  CHECK(reportCsv.rfind("k,nCells,", 0) == 0);
  CHECK(reportCsv.find("\n1,16,") != std::string::npos);
}

TEST_CASE("an out-of-order index list fails the trend checks") {
  const fs::path dir = fresh_dir("suff-fail");
  ExperimentConfig cfg = small_sufficiency_config(dir);
  cfg.kList = {2, 1};
  std::ostringstream log;

  const int status = run_experiment(cfg, log);
  CHECK(status == kStatusAssertionFail);
  CHECK(log.str().find("FAIL sufficiency-trend-") != std::string::npos);
  CHECK(read_file(dir / "manifest.toml").find("exitStatus = 1\n") !=
        std::string::npos);
}

TEST_CASE("config errors return status 2 and write no manifest") {
  const fs::path dir = fresh_dir("config-error");
  ExperimentConfig cfg = small_sufficiency_config(dir);
  cfg.s = 2.0;
  std::ostringstream log;

  const int status = run_experiment(cfg, log);
  CHECK(status == kStatusConfigError);
  CHECK(log.str().find("error: config key \"s\"") != std::string::npos);
  CHECK(log.str().find("RESULT h-sufficiency status=2") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "manifest.toml"));
}

TEST_CASE("solver failures return status 3 and are recorded in the manifest") {
  const fs::path dir = fresh_dir("solve-fail");
  ExperimentConfig cfg = small_sufficiency_config(dir);
  cfg.tol = 1e-30;  // unreachable
  std::ostringstream log;

  const int status = run_experiment(cfg, log);
  CHECK(status == kStatusSolveFailure);
  CHECK(log.str().find("error: solver failure: limit problem failed to solve") !=
        std::string::npos);
  const std::string manifest = read_file(dir / "manifest.toml");
  CHECK(manifest.find("exitStatus = 3\n") != std::string::npos);
  CHECK(manifest.find("reportFiles = []\n") != std::string::npos);
}

TEST_CASE("unwritable output directories return status 4") {
  const fs::path dir = fresh_dir("io-fail");
  const fs::path blocker = dir / "blocker";
  std::ofstream(blocker) << "in the way";

  ExperimentConfig cfg = small_sufficiency_config(blocker / "out");
  std::ostringstream log;

  const int status = run_experiment(cfg, log);
  CHECK(status == kStatusIoError);
  CHECK(log.str().find("error: cannot open for writing: ") != std::string::npos);
  CHECK(log.str().find("RESULT h-sufficiency status=4") != std::string::npos);
}

TEST_CASE("the alternator run flags the missing limit") {
  const fs::path dir = fresh_dir("necessity");
  ExperimentConfig cfg;
  cfg.experiment = "h-necessity";
  cfg.nCellsBase = 16;
  cfg.outputPath = dir.string();
  std::ostringstream log;

  const int status = run_experiment(cfg, log);
  CHECK(status == kStatusPass);
  CHECK(fs::exists(dir / "h-necessity.csv"));
  CHECK(log.str().find("no H-limit: subsequence states stay separated (") !=
        std::string::npos);
  CHECK(log.str().find("PASS alternator-energy-not-continuous") !=
        std::string::npos);

  // The default index list for this experiment is resolved into the manifest.
  CHECK(read_file(dir / "manifest.toml").find("kList = [1, 2, 3, 4, 5, 6]\n") !=
        std::string::npos);
}

TEST_CASE("reports are byte-identical across thread counts") {
  const fs::path dirA = fresh_dir("threads-1");
  const fs::path dirB = fresh_dir("threads-8");

  ExperimentConfig cfgA = small_sufficiency_config(dirA);
  cfgA.threads = 1;
  ExperimentConfig cfgB = small_sufficiency_config(dirB);
  cfgB.threads = 8;

  std::ostringstream logA, logB;
  CHECK(run_experiment(cfgA, logA) == kStatusPass);
  CHECK(run_experiment(cfgB, logB) == kStatusPass);

  for (const char* name :
       {"h-sufficiency-const1.csv", "h-sufficiency-sinpi.csv",
        "h-sufficiency-bump.csv", "checks.csv"}) {
    CHECK(read_file(dirA / name) == read_file(dirB / name));
  }
  set_thread_cap(0);  // restore the automatic cap for later tests
}
