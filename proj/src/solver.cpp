#include "nlhom/solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <string>

#include "nlhom/errors.hpp"

namespace nlhom {

namespace {

constexpr int kMaxStages = 8;          // continuation stages before the polish
constexpr int kMaxIterationsPerStage = 50;
constexpr int kMaxBacktracks = 60;
constexpr double kArmijoSlope = 1e-4;
// Energy differences below this relative scale are dominated by summation
// roundoff (~10^4 quadrature block partials), so the sufficient-decrease
// comparison carries no information there; the line search then takes the
// step as long as it does not raise the energy above the same noise band.
constexpr double kEnergyNoiseRel = 1e-13;

double max_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (const double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::string fmt_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

void fnv1a_append(std::uint64_t& h, const void* bytes, std::size_t len) {
  const auto* b = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= static_cast<std::uint64_t>(b[i]);
    h *= 1099511628211ULL;
  }
}

void fnv1a_append_double(std::uint64_t& h, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  fnv1a_append(h, &bits, sizeof(bits));
}

// Solves H d = -res with a dense Cholesky factorization.
std::vector<double> newton_direction(const DenseMatrix& H,
                                     const std::vector<double>& res) {
  const auto n = static_cast<Eigen::Index>(H.n);
  Eigen::Map<const Eigen::MatrixXd> Hmap(H.data.data(), n, n);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) rhs[i] = -res[static_cast<std::size_t>(i)];
  Eigen::LLT<Eigen::MatrixXd> llt(Hmap);
  if (llt.info() != Eigen::Success) {
    throw SolveFailure("second-variation factorization failed (matrix not SPD)");
  }
  Eigen::VectorXd d = llt.solve(rhs);
  std::vector<double> out(H.n);
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = d[i];
  return out;
}

std::vector<double> continuation_stages(const FracParams& params,
                                        const Regularization& reg) {
  if (params.p == 2.0) return {0.0};  // the problem is linear; no smoothing
  std::vector<double> stages;
  double eps = reg.epsilon;
  while (static_cast<int>(stages.size()) < kMaxStages &&
         eps > reg.epsilonFloor) {
    stages.push_back(eps);
    eps *= reg.continuationFactor;
  }
  stages.push_back(reg.epsilonFloor);  // final polish
  return stages;
}

}  // namespace

std::uint64_t coefficient_hash(const Coefficient& a, const FracParams& params) {
  std::uint64_t h = 1469598103934665603ULL;
  const std::uint64_t n = a.mesh ? a.mesh->nCells : 0;
  fnv1a_append(h, &n, sizeof(n));
  fnv1a_append_double(h, params.s);
  fnv1a_append_double(h, params.p);
  fnv1a_append_double(h, a.exteriorValue);
  fnv1a_append_double(h, a.lambda);
  fnv1a_append_double(h, a.Lambda);
  for (const double v : a.pairValues) fnv1a_append_double(h, v);
  return h;
}

double default_tolerance(const FracParams& params) {
  return params.p == 2.0 ? 1e-10 : 1e-8;
}

Solution solve(const Coefficient& a, const Density& f, const FracParams& params,
               const QuadGrids& grids, const Regularization& reg, double tol,
               const ScalarField* initialGuess) {
  if (!(tol > 0.0)) {
    throw std::invalid_argument("solve tolerance must be positive; got " +
                                fmt_sci(tol));
  }
  ScalarField u = make_zero_state(grids.product.mesh);
  if (initialGuess != nullptr) {
    if (!initialGuess->mesh || !same_mesh(*initialGuess->mesh, grids.mesh())) {
      throw std::invalid_argument("initial guess lives on a different mesh");
    }
    u = *initialGuess;
    u.nodalValues.front() = 0.0;
    u.nodalValues.back() = 0.0;
  }

  const std::vector<double> load = assemble_load(f, grids);
  const double loadNorm = max_norm(load);
  const double scale = loadNorm > 0.0 ? loadNorm : 1.0;

  SolveReport report;
  double energy = assemble_energy(a, u, f, params, grids);
  report.energyTrace.push_back(energy);

  std::vector<double> res = assemble_residual(a, u, f, params, grids);
  double resNorm = max_norm(res) / scale;
  bool done = resNorm <= tol;

  const std::vector<double> stages = continuation_stages(params, reg);
  double currentEps = done ? stages.front() : 0.0;
  for (const double eps : stages) {
    if (done) break;
    currentEps = eps;
    const Regularization stageReg{eps, reg.continuationFactor, reg.epsilonFloor};
    for (int iter = 0; iter < kMaxIterationsPerStage; ++iter) {
      if (resNorm <= tol) {
        done = true;
        break;
      }
      const DenseMatrix H = assemble_hessian(a, u, params, grids, stageReg);
      const std::vector<double> d = newton_direction(H, res);
      double slope = 0.0;
      for (std::size_t i = 0; i < d.size(); ++i) slope += res[i] * d[i];
      if (!(slope < 0.0)) {
        throw SolveFailure("Newton direction is not a descent direction");
      }
      const double noiseFloor = kEnergyNoiseRel * (1.0 + std::abs(energy));
      double step = 1.0;
      ScalarField trial = u;
      double trialEnergy = energy;
      bool accepted = false;
      for (int bt = 0; bt < kMaxBacktracks; ++bt) {
        for (std::size_t i = 0; i < d.size(); ++i) {
          trial.nodalValues[i + 1] = u.nodalValues[i + 1] + step * d[i];
        }
        trialEnergy = assemble_energy(a, trial, f, params, grids);
        const double required = kArmijoSlope * step * slope;
        if (trialEnergy <= energy + required ||
            (-required <= noiseFloor && trialEnergy <= energy + noiseFloor)) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        throw SolveFailure(
            "line search failed to produce descent after " +
            std::to_string(kMaxBacktracks) + " backtracking steps");
      }
      u = trial;
      energy = trialEnergy;
      report.energyTrace.push_back(energy);
      ++report.iterations;
      res = assemble_residual(a, u, f, params, grids);
      resNorm = max_norm(res) / scale;
    }
    if (resNorm <= tol) done = true;
  }

  report.finalResidualNorm = resNorm;
  report.finalEpsilon = currentEps;
  report.energyValue = energy;
  report.converged = resNorm <= tol;
  if (!report.converged) {
    throw SolveFailure("solve did not reach tolerance " + fmt_sci(tol) +
                       ": residual " + fmt_sci(resNorm) + " after " +
                       std::to_string(report.iterations) + " Newton steps");
  }

  Solution sol;
  sol.state = std::move(u);
  sol.flux = compute_flux(a, sol.state, params, grids);
  sol.report = std::move(report);
  sol.provenanceHash = coefficient_hash(a, params);
  return sol;
}

Solution solve_linear_p2(const Coefficient& a, const Density& f,
                         const QuadGrids& grids, double s) {
  const FracParams params = make_frac_params(s, 2.0);
  const ScalarField zero = make_zero_state(grids.product.mesh);
  const Regularization noReg{0.0, 0.5, 1e-10};
  const DenseMatrix H = assemble_hessian(a, zero, params, grids, noReg);
  const std::vector<double> load = assemble_load(f, grids);

  const auto n = static_cast<Eigen::Index>(H.n);
  Eigen::Map<const Eigen::MatrixXd> Hmap(H.data.data(), n, n);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) rhs[i] = load[static_cast<std::size_t>(i)];
  Eigen::LLT<Eigen::MatrixXd> llt(Hmap);
  if (llt.info() != Eigen::Success) {
    throw SolveFailure("stiffness factorization failed (matrix not SPD)");
  }
  const Eigen::VectorXd x = llt.solve(rhs);

  Solution sol;
  sol.state = make_zero_state(grids.product.mesh);
  for (Eigen::Index i = 0; i < n; ++i) {
    sol.state.nodalValues[static_cast<std::size_t>(i) + 1] = x[i];
  }
  std::vector<double> res = assemble_residual(a, sol.state, f, params, grids);
  const double loadNorm = max_norm(load);
  sol.flux = compute_flux(a, sol.state, params, grids);
  sol.report.iterations = 1;
  sol.report.finalResidualNorm = max_norm(res) / (loadNorm > 0.0 ? loadNorm : 1.0);
  sol.report.finalEpsilon = 0.0;
  sol.report.energyValue = assemble_energy(a, sol.state, f, params, grids);
  sol.report.converged = true;
  sol.report.energyTrace = {sol.report.energyValue};
  sol.provenanceHash = coefficient_hash(a, params);
  return sol;
}

double verify_energy_identity(const Solution& sol, const Coefficient& a,
                              const Density& f, const FracParams& params,
                              const QuadGrids& grids) {
  const double E = energy_quadratic_part(a, sol.state, params, grids);
  const std::vector<double> load = assemble_load(f, grids);
  double fu = 0.0;
  for (std::size_t i = 0; i < load.size(); ++i) {
    fu += load[i] * sol.state.nodalValues[i + 1];
  }
  const auto relative = [](double diff, double denom) {
    if (diff == 0.0) return 0.0;
    if (denom == 0.0) return std::numeric_limits<double>::infinity();
    return std::abs(diff) / denom;
  };
  const double m1 = relative(E - 2.0 * fu, std::max(std::abs(E), std::abs(2.0 * fu)));
  const double objective = assemble_energy(a, sol.state, f, params, grids);
  const double m2 = relative(objective + fu / params.pPrime, std::abs(fu));
  return std::max(m1, m2);
}

}  // namespace nlhom
