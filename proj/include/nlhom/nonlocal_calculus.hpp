#ifndef NLHOM_NONLOCAL_CALCULUS_HPP
#define NLHOM_NONLOCAL_CALCULUS_HPP

#include "nlhom/mesh_fields.hpp"
#include "nlhom/quadrature.hpp"

namespace nlhom {

// The two-point gradient (u(x) - u(y)) / |x - y|^{gradExponent} of the
// piecewise-linear reconstruction of u (zero outside the domain).
// Throws std::invalid_argument when x == y.
double nonlocal_gradient_at(const ScalarField& u, double x, double y,
                            const FracParams& params);

// Closed form of the exterior kernel mass at an interior point:
// integral over |y| outside (0,1) of |x-y|^{-kernelExponent} dy
//   = (x^{-sp} + (1-x)^{-sp}) / (s p).
// Throws std::invalid_argument unless 0 < x < 1.
double tail_weight(double x, const FracParams& params);

// Energy seminorm: the p-th root of the double integral of |Du|^p over the
// whole plane, split into the interior product grid plus the two exact
// exterior tails (u vanishes outside the domain).
double gagliardo_seminorm(const ScalarField& u, const FracParams& params,
                          const QuadGrids& grids);

// The flux a(x,y) |Du(x,y)|^{p-2} Du(x,y) on the canonical product grid.
// Its tail entries hold exteriorValue * |u(x)|^{p-2} u(x) at the line points,
// the one-sided factor of the flux when the other point leaves the domain.
// Throws std::invalid_argument on mesh mismatch.
ProductField compute_flux(const Coefficient& a, const ScalarField& u,
                          const FracParams& params, const QuadGrids& grids);

// Quadrature value of the double integral of phi * Du over the product
// domain, both orientations summed explicitly; when phi carries tail values
// the exterior contribution 2 * sum of tail(x) u(x) tail_weight(x) is added.
double duality_pairing(const ProductField& phi, const ScalarField& u,
                       const FracParams& params, const QuadGrids& grids);

// The weak nonlocal divergence paired with a test state: identical integral
// as duality_pairing, evaluated through the antisymmetrized combination
// (phi(x,y) - phi(y,x)) * Dv(x,y) on the same grid, so the integration-by-
// parts identity holds to roundoff by construction.
double nonlocal_divergence(const ProductField& phi, const ScalarField& vTest,
                           const FracParams& params, const QuadGrids& grids);

// Double integral of A * B over the product domain (both orientations).
double product_pairing(const ProductField& A, const ProductField& B,
                       const QuadGrids& grids);

// Double integral of window * A * B over the product domain.
double triple_pairing(const ProductField& window, const ProductField& A,
                      const ProductField& B, const QuadGrids& grids);

// The two-point gradient of u materialized on the product grid (no tail).
ProductField gradient_field(const ScalarField& u, const FracParams& params,
                            const QuadGrids& grids);

// Double integral of (piecewise-constant) a times psi over the product
// domain, evaluated on a's own mesh grid.
double coefficient_pairing(const Coefficient& a,
                           const std::function<double(double, double)>& psi,
                           const QuadGrids& grids);

// Largest violation, measured in units of roundoff (ulps of the bound), of
// the pointwise envelope lambda |Du|^{p-1} <= |q| <= Lambda |Du|^{p-1} over
// all canonical grid points; 0 when the envelope holds everywhere.
double flux_envelope_margin_ulp(const ProductField& q, const ScalarField& u,
                                const Coefficient& a, const FracParams& params,
                                const QuadGrids& grids);

}  // namespace nlhom

#endif
