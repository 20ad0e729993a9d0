#ifndef NLHOM_SOLVER_HPP
#define NLHOM_SOLVER_HPP

#include <cstdint>
#include <vector>

#include "nlhom/assembly.hpp"
#include "nlhom/mesh_fields.hpp"
#include "nlhom/nonlocal_calculus.hpp"
#include "nlhom/quadrature.hpp"

namespace nlhom {

struct SolveReport {
  int iterations = 0;              // accepted Newton steps, all stages
  double finalResidualNorm = 0.0;  // max-norm scaled by the load max-norm
  double finalEpsilon = 0.0;       // regularization at the last stage run
  double energyValue = 0.0;        // objective at the returned state
  bool converged = false;
  std::vector<double> energyTrace;  // objective at each accepted iterate
};

// The solution pair: minimizing state and its flux, with the run report and
// a hash of the coefficient/exponent/mesh combination that produced it.
struct Solution {
  ScalarField state;
  ProductField flux;
  SolveReport report;
  std::uint64_t provenanceHash = 0;
};

// FNV-1a hash of the coefficient data, its mesh size, and the exponents.
std::uint64_t coefficient_hash(const Coefficient& a, const FracParams& params);

// Scale-free stopping tolerance defaults: 1e-10 for the linear case p = 2,
// 1e-8 otherwise.
double default_tolerance(const FracParams& params);

// Damped Newton minimization of the discrete energy: exact residual,
// epsilon-regularized second variation, Armijo backtracking, geometric
// epsilon continuation with a final polish at the floor. Deterministic for
// fixed inputs; throws SolveFailure instead of returning a partial answer.
// An optional initial guess (same mesh, zero trace) replaces the zero start.
Solution solve(const Coefficient& a, const Density& f, const FracParams& params,
               const QuadGrids& grids, const Regularization& reg, double tol,
               const ScalarField* initialGuess = nullptr);

// Direct dense factorization of the p = 2 stiffness system on the same
// quadrature as the nonlinear path; oracle for the linear case.
Solution solve_linear_p2(const Coefficient& a, const Density& f,
                         const QuadGrids& grids, double s);

// Relative mismatch of the optimality identities at the solved state:
// the quadratic part E against twice the load pairing, and the objective
// against -(load pairing)/pPrime. Returns the larger of the two relative
// mismatches (0/0 counts as 0).
double verify_energy_identity(const Solution& sol, const Coefficient& a,
                              const Density& f, const FracParams& params,
                              const QuadGrids& grids);

}  // namespace nlhom

#endif
