#ifndef NLHOM_HOMOGENIZATION_LAB_HPP
#define NLHOM_HOMOGENIZATION_LAB_HPP

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "nlhom/assembly.hpp"
#include "nlhom/mesh_fields.hpp"
#include "nlhom/quadrature.hpp"
#include "nlhom/solver.hpp"

namespace nlhom {

// A coefficient sequence with its analytic weak-* limit and the rule tying
// each index to a mesh fine enough to resolve it.
struct CoefficientSequence {
  std::string familyTag;  // separable-oscillation | product-checkerboard |
                          // non-converging-alternator | custom
  double lambda = 1.0;
  double Lambda = 1.0;
  std::function<std::size_t(std::size_t)> meshCellsForIndex;
  std::function<Coefficient(std::size_t, MeshPtr)> generator;
  std::function<Coefficient(MeshPtr)> claimedWeakStarLimit;
};

// a_k(x,y) = mean + amplitude sin(2 pi k x) sin(2 pi k y); weak-* limit is
// the constant mean. Requires mean - |amplitude| > 0.
Coefficient gen_separable_oscillation(std::size_t k, double mean,
                                      double amplitude, MeshPtr mesh);

// alpha where floor(2kx) + floor(2ky) is even, beta otherwise; the mesh must
// resolve the 1/(2k) tiles exactly (cell count divisible by 2k). Weak-*
// limit is the arithmetic mean (alpha + beta) / 2.
Coefficient gen_product_checkerboard(std::size_t k, double alpha, double beta,
                                     MeshPtr mesh);

// Alternates between the constants 1.5 (odd k) and 2.5 (even k) on a fixed
// mesh; has no weak-* limit. Its claimed-limit slot carries the midpoint 2.0
// purely as a diagnostic yardstick for the (failing) trend columns.
CoefficientSequence gen_non_converging_alternator(MeshPtr mesh);

// Sequence builders bundling the generators with their resolution rules.
CoefficientSequence make_oscillation_sequence(double mean, double amplitude,
                                              std::size_t baseCells);
CoefficientSequence make_checkerboard_sequence(double alpha, double beta,
                                               std::size_t baseCells);
CoefficientSequence make_constant_sequence(double value, double lambda,
                                           double Lambda,
                                           std::size_t baseCells);

// Finite families of test functions against which the weak convergences are
// measured; all members are bounded by 1 in sup-norm.
struct TestSuite {
  std::vector<std::function<double(double)>> stateTests;
  std::vector<std::function<double(double, double)>> productTests;
  std::vector<std::function<double(double, double)>> coefficientTests;
};

// stateTests: sin(j pi x), j = 1..J. productTests: cos(m pi x) cos(m pi y)
// for m = 1..M/2 followed by the antisymmetrized sin(m pi (x-y))/2 for
// m = 1..M-M/2. coefficientTests: low-order polynomials and smooth bumps.
// Requires J, M >= 4.
TestSuite make_default_suite(std::size_t J = 8, std::size_t M = 8);

struct HRecord {
  std::size_t k = 0;
  std::size_t nCells = 0;
  double stateWeakGap = 0.0;
  double stateStrongGap = 0.0;
  double fluxWeakGap = 0.0;
  double coeffWeakStarGap = 0.0;
  double energyGap = 0.0;
  double divCurlGap = 0.0;
  int solveIterations = 0;
};

struct HReport {
  std::vector<HRecord> rows;    // one per sequence index, in kList order
  double limitEnergy = 0.0;     // quadratic energy part of the limit solve
  double limitStateNorm = 0.0;  // L^p norm of the limit state
  double gapFloor = 0.0;        // gaps below this count as numerically zero
  double maxEnvelopeUlp = 0.0;  // worst flux-envelope violation, in ulps
};

// L^p norm / distance of states on one mesh, by line quadrature.
double lp_norm(const ScalarField& u, double p, const QuadGrids& grids);
double lp_distance(const ScalarField& u, const ScalarField& v, double p,
                   const QuadGrids& grids);

// max over the coefficient test family of |integral of (aK - aLimit) psi|;
// both coefficients must live on the grid's mesh.
double weak_star_gap(const Coefficient& aK, const Coefficient& aLimit,
                     const TestSuite& suite, const QuadGrids& grids);

// max over the product test windows of the drift of the windowed flux-
// gradient product between (uK, qK) and (uLim, qLim), all on one grid.
double div_curl_check(const ScalarField& uK, const ProductField& qK,
                      const ScalarField& uLim, const ProductField& qLim,
                      const TestSuite& suite, const FracParams& params,
                      const QuadGrids& grids);

// Solves the sequence problems and the claimed-limit problem, transfers all
// fields to the finest mesh in the run by exact piecewise-linear embedding,
// and fills one record per index. Inner solve failures abort with the
// failing index in the message. Requires every per-index cell count to
// divide the finest one (nested meshes).
HReport run_h_experiment(const CoefficientSequence& seq,
                         const std::vector<std::size_t>& kList,
                         const Density& f, const FracParams& params,
                         const QuadratureRule& rule, const Regularization& reg,
                         double tol, const TestSuite& suite);

// Frozen trend acceptance: a single row passes; a column entirely below the
// floor passes; otherwise the second half must be nonincreasing (small
// absolute slack) and the final entry at most 0.3 times the initial one.
bool trend_ok(const std::vector<double>& vals, double gapFloor);

// trend_ok applied to the energy-gap column.
bool energy_continuity_check(const HReport& report);

// The sufficiency bundle: trend_ok on the state-strong, flux-weak, energy,
// and div-curl columns simultaneously.
bool sufficiency_check(const HReport& report);

// The flux column may never lag the state column by more than tolFactor in
// relative decrease (vacuously true when states do not converge).
bool g_equals_h_check(const HReport& report, double tolFactor);

struct NecessityResult {
  double separation = 0.0;     // L^p distance between subsequence states
  double referenceNorm = 0.0;  // L^p norm of the odd-subsequence state
  bool noHLimit = false;       // separation >= 0.1 * referenceNorm
};

// Solves the two alternator subsequence problems on one mesh and measures
// their separation: a bounded-away-from-zero value flags "no H-limit".
NecessityResult necessity_check(const Density& f, const FracParams& params,
                                const QuadratureRule& rule,
                                const Regularization& reg, double tol,
                                std::size_t nCells);

struct ContrastResult {
  double separation = 0.0;  // L^p distance between the two mean solutions
  double arithRatio = 0.0;  // distance of u_K to the arithmetic-mean state
  double harmRatio = 0.0;   // distance of u_K to the harmonic-mean state
  bool meansDiscriminated = false;  // arithRatio <= 0.1 and harmRatio >= 0.5
};

// Solves the checkerboard problem at index K and the two constant-mean
// yardstick problems on the same mesh, and forms the discrimination ratios.
ContrastResult checkerboard_contrast(double alpha, double beta, std::size_t K,
                                     const Density& f, const FracParams& params,
                                     const QuadratureRule& rule,
                                     const Regularization& reg, double tol,
                                     std::size_t baseCells);

}  // namespace nlhom

#endif
