#ifndef NLHOM_MESH_FIELDS_HPP
#define NLHOM_MESH_FIELDS_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace nlhom {

// Exponent bundle for the fractional (s,p) setting in one space dimension.
// The two-point gradient scales differences by |x-y|^{-gradExponent} and the
// energy kernel is |x-y|^{-kernelExponent}.
struct FracParams {
  double s = 0.5;               // differentiability order, in (0,1)
  double p = 2.0;               // integrability exponent, in (1,inf)
  double pPrime = 2.0;          // conjugate exponent p/(p-1)
  double kernelExponent = 2.0;  // 1 + s*p
  double gradExponent = 1.0;    // 1/p + s
};

// Validates s in (0,1) and p in (1,inf); throws std::invalid_argument with a
// message naming the offending parameter.
FracParams make_frac_params(double s, double p);

// Uniform partition of [0,1] into nCells cells; nodes[i] = i/nCells.
struct Mesh {
  std::size_t nCells = 0;
  std::vector<double> nodes;  // nCells+1 entries, first 0, last 1
  double cellWidth = 0.0;     // 1/nCells
};

using MeshPtr = std::shared_ptr<const Mesh>;

// Requires nCells >= 2; throws std::invalid_argument otherwise.
MeshPtr build_mesh(std::size_t nCells);

// Two meshes describe the same partition iff they have equal cell counts
// (all meshes are uniform over [0,1]).
bool same_mesh(const Mesh& a, const Mesh& b);

// Continuous piecewise-linear function on [0,1] with zero boundary values,
// extended by zero outside [0,1].
struct ScalarField {
  MeshPtr mesh;
  std::vector<double> nodalValues;  // one per node; first and last are 0

  // Piecewise-linear reconstruction; returns 0 outside (0,1).
  double eval(double x) const;
};

ScalarField make_zero_state(MeshPtr mesh);

// Nodal interpolation of g with endpoints forced to zero. Throws
// std::runtime_error if g is non-finite at a node.
ScalarField interpolate_state(const std::function<double(double)>& g,
                              MeshPtr mesh);

// Symmetric kernel coefficient, piecewise constant on products of mesh cells,
// with one constant value for pairs where exactly one point lies outside the
// domain. Bounded between lambda and Lambda.
struct Coefficient {
  MeshPtr mesh;
  std::vector<double> pairValues;  // dense row-major, nCells x nCells
  double exteriorValue = 1.0;
  double lambda = 1.0;         // lower bound, > 0
  double Lambda = 1.0;         // upper bound, >= lambda
  std::size_t clampCount = 0;  // stored entries clamped into [lambda, Lambda]

  double pair_value(std::size_t i, std::size_t j) const {
    return pairValues[i * mesh->nCells + j];
  }
};

// Samples aFun at cell-midpoint pairs, symmetrizes by averaging the (i,j) and
// (j,i) samples, and clamps into [lambda, Lambda] (clamps counted). Requires
// lambda > 0, Lambda >= lambda, and exterior in [lambda, Lambda].
Coefficient sample_coefficient(const std::function<double(double, double)>& aFun,
                               double exterior, MeshPtr mesh, double lambda,
                               double Lambda);

// Constant coefficient `value` with the given class bounds; requires
// lambda <= value <= Lambda.
Coefficient constant_coefficient(double value, MeshPtr mesh, double lambda,
                                 double Lambda);

// Coefficient with every pair value and the exterior value multiplied by
// c > 0; the class bounds scale along.
Coefficient scale_coefficient(const Coefficient& a, double c);

// Exact transfer of a state to a nested finer mesh (fine cell count divisible
// by the coarse one). The piecewise-linear function is unchanged.
ScalarField embed_state(const ScalarField& u, MeshPtr fineMesh);

// Exact transfer of a piecewise-constant coefficient to a nested finer mesh.
Coefficient embed_coefficient(const Coefficient& a, MeshPtr fineMesh);

}  // namespace nlhom

#endif
