// Acceptance gate: ten end-to-end criteria, each printed as one PASS/FAIL
// line with its measured value and its frozen budget. The process exits 0
// only when every criterion passes. Budgets are pinned below and are not
// adjusted at run time.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "nlhom/cli_io.hpp"
#include "nlhom/concurrency.hpp"
#include "nlhom/homogenization_lab.hpp"
#include "nlhom/solver.hpp"
#include "support.hpp"

using namespace nlhom;
using nlhom::testing::random_state;
using nlhom::testing::test_seed;
using nlhom::testing::uniform_pm;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

// --- frozen budgets -------------------------------------------------------
constexpr double kDirectAgreementRelTol = 1e-8;   // Newton vs direct, p = 2
constexpr double kDirectAgreementTimeSec = 10.0;  // single-threaded wall time
constexpr double kIbpRelTol = 1e-12;              // divergence vs pairing
constexpr double kGradientRelTol = 1e-6;          // residual vs FD gradient
constexpr double kGradientDelta = 1e-5;           // FD step
constexpr double kEnergyIdentityFactor = 10.0;    // identity gap <= 10 tol
constexpr double kHomogeneityRelTol = 1e-8;       // state/flux scaling law
constexpr double kTrendTimeSec = 600.0;           // oscillation sweep budget
constexpr double kArithRatioBudget = 0.1;         // checkerboard, true mean
constexpr double kHarmRatioFloor = 0.5;           // checkerboard, wrong mean
constexpr double kSeparationFactor = 0.1;         // alternator separation
constexpr double kUlpBudget = 4.0;                // flux envelope, in ulps
// ---------------------------------------------------------------------------

double gWorstUlp = 0.0;  // max envelope violation over every solve below

void note_envelope(const Solution& sol, const Coefficient& a,
                   const FracParams& params, const QuadGrids& grids) {
  gWorstUlp = std::max(
      gWorstUlp, flux_envelope_margin_ulp(sol.flux, sol.state, a, params, grids));
}

Coefficient wavy_coefficient(const MeshPtr& mesh) {
  return sample_coefficient(
      [](double x, double y) {
        return 2.0 + std::sin(2.0 * kPi * x) * std::sin(2.0 * kPi * y);
      },
      2.0, mesh, 1.0, 3.0);
}

ProductField random_product_field(const QuadGrids& grids, std::mt19937_64& rng,
                                  bool withTail) {
  double c[6];
  for (double& v : c) v = uniform_pm(rng);
  auto phi = [&c](double x, double y) {
    return c[0] + c[1] * x + c[2] * y * y +
           c[3] * std::cos(kPi * x) * std::cos(kPi * y) +
           c[4] * std::sin(kPi * x) + c[5] * x * y;
  };
  ProductField field = sample_product_function(phi, grids);
  if (withTail) {
    field.tail.resize(grids.line.x.size());
    for (double& t : field.tail) t = uniform_pm(rng);
  }
  return field;
}

const Density kLoadOne = [](double) { return 1.0; };
const Density kLoadSin = [](double x) { return std::sin(kPi * x); };
const Density kLoadBump = [](double x) {
  return std::exp(-50.0 * (x - 0.5) * (x - 0.5));
};

double rel_max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / std::max(scale, 1e-300);
}

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[320];
  std::snprintf(buf, sizeof buf, f, args...);
  return std::string(buf);
}

using Outcome = std::pair<bool, std::string>;

bool run_criterion(const char* name, const std::function<Outcome()>& body) {
  bool ok = false;
  std::string detail;
  try {
    std::tie(ok, detail) = body();
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  std::printf("%s  %-36s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  return ok;
}

// 1. On the unit coefficient at p = 2 the damped-Newton path must reproduce
//    the direct factorization, fast and single-threaded.
Outcome direct_solver_agreement() {
  set_thread_cap(1);
  const auto t0 = std::chrono::steady_clock::now();
  const MeshPtr mesh = build_mesh(128);
  const QuadGrids grids = make_grids(mesh, QuadratureRule{});
  const FracParams params = make_frac_params(0.4, 2.0);
  const Coefficient a = constant_coefficient(1.0, mesh, 1.0, 1.0);
  const Solution newton = solve(a, kLoadOne, params, grids, Regularization{},
                                default_tolerance(params));
  const Solution direct = solve_linear_p2(a, kLoadOne, grids, 0.4);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  set_thread_cap(0);
  note_envelope(newton, a, params, grids);
  note_envelope(direct, a, params, grids);
  const double rel =
      rel_max_diff(newton.state.nodalValues, direct.state.nodalValues);
  return {rel <= kDirectAgreementRelTol && seconds <= kDirectAgreementTimeSec,
          fmt("rel=%.3e time=%.2fs (budget rel<=%.0e, time<=%.0fs)", rel,
              seconds, kDirectAgreementRelTol, kDirectAgreementTimeSec)};
}

// 2. The nonlocal divergence and the duality pairing must agree to near
//    roundoff for random windows and states on one shared grid.
Outcome integration_by_parts() {
  const MeshPtr mesh = build_mesh(64);
  const QuadGrids grids = make_grids(mesh, QuadratureRule{});
  const FracParams params = make_frac_params(0.4, 2.0);
  std::mt19937_64 rng(test_seed());
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const ScalarField v = random_state(mesh, rng);
    const ProductField phi = random_product_field(grids, rng, t % 2 == 0);
    const double lhs = nonlocal_divergence(phi, v, params, grids);
    const double rhs = duality_pairing(phi, v, params, grids);
    const double denom = std::max({std::abs(lhs), std::abs(rhs), 1e-30});
    worst = std::max(worst, std::abs(lhs - rhs) / denom);
  }
  return {worst <= kIbpRelTol,
          fmt("worst rel=%.3e over 20 pairs (budget <=%.0e)", worst,
              kIbpRelTol)};
}

// 3. The assembled residual must match a central finite difference of the
//    assembled energy across the exponent range, including p < 2.
Outcome residual_gradient_consistency() {
  const MeshPtr mesh = build_mesh(32);
  const QuadGrids grids = make_grids(mesh, QuadratureRule{});
  const Coefficient a = wavy_coefficient(mesh);
  std::mt19937_64 rng(test_seed());
  double worst = 0.0;
  for (const double p : {1.5, 2.0, 3.0}) {
    const FracParams params = make_frac_params(0.4, p);
    for (int t = 0; t < 10; ++t) {
      const ScalarField u = random_state(mesh, rng);
      const std::vector<double> res =
          assemble_residual(a, u, kLoadSin, params, grids);
      double resScale = 0.0;
      for (const double r : res) resScale = std::max(resScale, std::abs(r));
      ScalarField probe = u;
      double gap = 0.0;
      for (std::size_t j = 1; j <= res.size(); ++j) {
        probe.nodalValues[j] = u.nodalValues[j] + kGradientDelta;
        const double plus = assemble_energy(a, probe, kLoadSin, params, grids);
        probe.nodalValues[j] = u.nodalValues[j] - kGradientDelta;
        const double minus = assemble_energy(a, probe, kLoadSin, params, grids);
        probe.nodalValues[j] = u.nodalValues[j];
        const double fd = (plus - minus) / (2.0 * kGradientDelta);
        gap = std::max(gap, std::abs(fd - res[j - 1]));
      }
      worst = std::max(worst, gap / resScale);
    }
  }
  return {worst <= kGradientRelTol,
          fmt("worst rel=%.3e, p in {1.5, 2, 3} (budget <=%.0e)", worst,
              kGradientRelTol)};
}

// 4. Every converged solve must satisfy both optimality identities within a
//    small multiple of its stopping tolerance.
Outcome energy_identities() {
  const MeshPtr mesh = build_mesh(64);
  const QuadGrids grids = make_grids(mesh, QuadratureRule{});
  const std::vector<Coefficient> families = {
      constant_coefficient(2.0, mesh, 1.0, 3.0),
      gen_separable_oscillation(1, 2.0, 1.0, mesh),
      gen_product_checkerboard(1, 1.0, 3.0, mesh)};
  double worstFactor = 0.0;
  int solves = 0;
  for (const double p : {2.0, 3.0}) {
    const FracParams params = make_frac_params(0.4, p);
    const double tol = default_tolerance(params);
    for (const auto& a : families) {
      for (const Density& f : {kLoadOne, kLoadSin, kLoadBump}) {
        const Solution sol = solve(a, f, params, grids, Regularization{}, tol);
        note_envelope(sol, a, params, grids);
        worstFactor =
            std::max(worstFactor, verify_energy_identity(sol, a, f, params,
                                                         grids) / tol);
        ++solves;
      }
    }
  }
  return {worstFactor <= kEnergyIdentityFactor,
          fmt("worst gap=%.2f tol over %d solves (budget <=%.0f tol)",
              worstFactor, solves, kEnergyIdentityFactor)};
}

// 5. Scaling the load by c must scale the state by c^{1/(p-1)} and the flux
//    by c: the solution map is homogeneous of the advertised degrees.
Outcome solution_homogeneity() {
  const MeshPtr mesh = build_mesh(64);
  const QuadGrids grids = make_grids(mesh, QuadratureRule{});
  const Coefficient a = wavy_coefficient(mesh);
  double worst = 0.0;
  for (const double p : {2.0, 3.0}) {
    const FracParams params = make_frac_params(0.4, p);
    const double tol = default_tolerance(params);
    const Solution base = solve(a, kLoadSin, params, grids, Regularization{}, tol);
    note_envelope(base, a, params, grids);
    for (const double c : {0.5, 2.0}) {
      const Density scaled = [c](double x) { return c * std::sin(kPi * x); };
      const Solution sol = solve(a, scaled, params, grids, Regularization{}, tol);
      note_envelope(sol, a, params, grids);
      const double gamma = std::pow(c, 1.0 / (p - 1.0));
      std::vector<double> predictedState = base.state.nodalValues;
      for (double& v : predictedState) v *= gamma;
      std::vector<double> predictedFlux = base.flux.valXY;
      for (double& v : predictedFlux) v *= c;
      worst = std::max(worst,
                       rel_max_diff(sol.state.nodalValues, predictedState));
      worst = std::max(worst, rel_max_diff(sol.flux.valXY, predictedFlux));
    }
  }
  return {worst <= kHomogeneityRelTol,
          fmt("worst rel=%.3e, p in {2, 3}, c in {0.5, 2} (budget <=%.0e)",
              worst, kHomogeneityRelTol)};
}

// 6. For the oscillating family every gap column must trend to zero, for
//    both exponents and three loads, inside the wall-time budget.
Outcome oscillation_family_convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  const CoefficientSequence seq = make_oscillation_sequence(2.0, 1.0, 64);
  const std::vector<std::size_t> kList = {1, 2, 4, 8, 16};
  const TestSuite suite = make_default_suite();
  bool allTrends = true;
  int runs = 0;
  for (const double p : {2.0, 3.0}) {
    const FracParams params = make_frac_params(0.4, p);
    const double tol = default_tolerance(params);
    for (const Density& f : {kLoadOne, kLoadSin, kLoadBump}) {
      const HReport report = run_h_experiment(seq, kList, f, params,
                                              QuadratureRule{},
                                              Regularization{}, tol, suite);
      gWorstUlp = std::max(gWorstUlp, report.maxEnvelopeUlp);
      allTrends = allTrends && sufficiency_check(report);
      ++runs;
    }
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return {allTrends && seconds <= kTrendTimeSec,
          fmt("trends=%s over %d runs, time=%.1fs (budget time<=%.0fs)",
              allTrends ? "all-decaying" : "violated", runs, seconds,
              kTrendTimeSec)};
}

// 7. The high-contrast checkerboard must select the arithmetic mean as its
//    limit and reject the harmonic mean.
Outcome checkerboard_mean_selection() {
  const FracParams params = make_frac_params(0.4, 2.0);
  const ContrastResult r =
      checkerboard_contrast(1.0, 3.0, 16, kLoadSin, params, QuadratureRule{},
                            Regularization{}, default_tolerance(params), 64);
  const bool ok = r.arithRatio <= kArithRatioBudget &&
                  r.harmRatio >= kHarmRatioFloor && r.meansDiscriminated;
  return {ok, fmt("arith=%.4f harm=%.4f (budget arith<=%.1f, harm>=%.1f)",
                  r.arithRatio, r.harmRatio, kArithRatioBudget,
                  kHarmRatioFloor)};
}

// 8. The alternating-constant sequence must keep its subsequence limits
//    separated, so no single limit problem can represent it.
Outcome alternator_non_convergence() {
  const FracParams params = make_frac_params(0.4, 2.0);
  const NecessityResult r =
      necessity_check(kLoadSin, params, QuadratureRule{}, Regularization{},
                      default_tolerance(params), 64);
  const bool ok =
      r.noHLimit && r.separation >= kSeparationFactor * r.referenceNorm;
  return {ok, fmt("separation=%.3e ref=%.3e flagged=%s (budget sep>=%.1f ref)",
                  r.separation, r.referenceNorm, r.noHLimit ? "yes" : "no",
                  kSeparationFactor)};
}

// 9. Across every solve above, the flux must stay inside the coefficient
//    envelope at every canonical grid point, up to a few ulps.
Outcome flux_envelope_bound() {
  return {gWorstUlp <= kUlpBudget,
          fmt("worst=%.2f ulp across all solves (budget <=%.0f ulp)", gWorstUlp,
              kUlpBudget)};
}

// 10. The full default experiment must produce byte-identical reports when
//     rerun with a different thread count.
Outcome thread_determinism() {
  const fs::path root = fs::temp_directory_path() / "nlhom-acceptance";
  fs::remove_all(root);
  const fs::path dirA = root / "threads-1";
  const fs::path dirB = root / "threads-8";

  ExperimentConfig cfg;
  cfg.experiment = "h-sufficiency";
  cfg.outputPath = dirA.string();
  cfg.threads = 1;
  std::ostringstream logA;
  const int statusA = run_experiment(cfg, logA);

  cfg.outputPath = dirB.string();
  cfg.threads = 8;
  std::ostringstream logB;
  const int statusB = run_experiment(cfg, logB);
  set_thread_cap(0);

  auto slurp = [](const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  int identical = 0;
  const char* names[] = {"h-sufficiency-const1.csv", "h-sufficiency-sinpi.csv",
                         "h-sufficiency-bump.csv", "checks.csv"};
  for (const char* name : names) {
    const std::string a = slurp(dirA / name);
    if (!a.empty() && a == slurp(dirB / name)) ++identical;
  }
  return {statusA == statusB && identical == 4,
          fmt("status=%d/%d identical-files=%d/4 (budget 4/4, equal status)",
              statusA, statusB, identical)};
}

}  // namespace

int main() {
  std::printf("acceptance criteria, pinned budgets\n");
  int passed = 0;
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"01 direct-solver-agreement", direct_solver_agreement},
      {"02 integration-by-parts", integration_by_parts},
      {"03 residual-gradient-consistency", residual_gradient_consistency},
      {"04 energy-identities", energy_identities},
      {"05 solution-homogeneity", solution_homogeneity},
      {"06 oscillation-family-convergence", oscillation_family_convergence},
      {"07 checkerboard-mean-selection", checkerboard_mean_selection},
      {"08 alternator-non-convergence", alternator_non_convergence},
      {"09 flux-envelope-bound", flux_envelope_bound},
      {"10 thread-determinism", thread_determinism},
  };
  for (const auto& [name, body] : criteria) {
    if (run_criterion(name, body)) ++passed;
  }
  std::printf("acceptance: %d/10 criteria passed\n", passed);
  return passed == 10 ? 0 : 1;
}
