#ifndef NLHOM_ASSEMBLY_HPP
#define NLHOM_ASSEMBLY_HPP

#include <cstddef>
#include <functional>
#include <vector>

#include "nlhom/mesh_fields.hpp"
#include "nlhom/nonlocal_calculus.hpp"
#include "nlhom/quadrature.hpp"

namespace nlhom {

// Right-hand-side density on [0,1], evaluated at quadrature points.
using Density = std::function<double(double)>;

// Smoothing of the degenerate/singular weight |t|^{p-2} t via
// (t^2 + eps^2)^{(p-2)/2} t, with geometric continuation toward the floor.
struct Regularization {
  double epsilon = 1e-2;
  double continuationFactor = 0.1;
  double epsilonFloor = 1e-10;
};

// Validates epsilon >= epsilonFloor > 0 and continuationFactor in (0,1);
// throws std::invalid_argument naming the field.
Regularization make_regularization(double epsilon, double continuationFactor,
                                   double epsilonFloor);

// Dense symmetric matrix over the interior nodes (row-major, n x n).
struct DenseMatrix {
  std::size_t n = 0;
  std::vector<double> data;

  double& at(std::size_t i, std::size_t j) { return data[i * n + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * n + j]; }
};

// Load vector: integral of f against each interior nodal basis function,
// on the shared line quadrature.
std::vector<double> assemble_load(const Density& f, const QuadGrids& grids);

// The full-plane energy integrand total: double integral of a |Du|^p over
// the product domain plus twice the exact exterior tail term.
double energy_quadratic_part(const Coefficient& a, const ScalarField& u,
                             const FracParams& params, const QuadGrids& grids);

// The objective being minimized:
//   (1/2p) * energy_quadratic_part(a, u) - integral of f * u.
double assemble_energy(const Coefficient& a, const ScalarField& u,
                       const Density& f, const FracParams& params,
                       const QuadGrids& grids);

// Exact gradient of assemble_energy with respect to the interior nodal
// values (the weak-form residual), one entry per interior node.
std::vector<double> assemble_residual(const Coefficient& a,
                                      const ScalarField& u, const Density& f,
                                      const FracParams& params,
                                      const QuadGrids& grids);

// Second variation of the epsilon-regularized energy; symmetric positive
// definite for lambda > 0 and epsilon > 0. Throws std::invalid_argument for
// p < 2 with epsilon == 0 (the unregularized weight blows up at Du = 0).
DenseMatrix assemble_hessian(const Coefficient& a, const ScalarField& u,
                             const FracParams& params, const QuadGrids& grids,
                             const Regularization& reg);

}  // namespace nlhom

#endif
