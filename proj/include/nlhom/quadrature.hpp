#ifndef NLHOM_QUADRATURE_HPP
#define NLHOM_QUADRATURE_HPP

#include <cstddef>
#include <vector>

#include "nlhom/mesh_fields.hpp"

namespace nlhom {

// Knobs for the singular-kernel quadrature: tensor Gauss on smooth cell
// pairs, geometric grading toward the diagonal (and the domain boundary, for
// the exterior tail weight) on the singular ones.
struct QuadratureRule {
  int pointsPerCell = 3;      // Gauss points per cell per axis, >= 2
  int diagonalLevels = 6;     // grading depth for the singular regions, >= 3
  double gradingRatio = 0.5;  // geometric ratio, in (0,1)
};

// Validates the rule ranges; throws std::invalid_argument naming the field.
QuadratureRule make_quadrature_rule(int pointsPerCell, int diagonalLevels,
                                    double gradingRatio);

// Gauss–Legendre nodes and weights on [-1, 1].
void gauss_legendre(int m, std::vector<double>& points,
                    std::vector<double>& weights);

// Quadrature over [0,1] used for loads and exterior-tail terms: per-cell
// Gauss, with the two boundary cells geometrically refined toward the
// endpoints where the tail weight has unbounded derivatives.
struct LineQuadrature {
  MeshPtr mesh;
  std::vector<double> x, w;
  std::vector<std::size_t> cellOfPoint;  // mesh cell containing each point
};

LineQuadrature make_line_quadrature(MeshPtr mesh, const QuadratureRule& rule);

// One cell pair (ci <= cj) of the canonical product grid; its points sit in
// [offset, offset+count) of the point arrays.
struct PairBlock {
  std::size_t ci = 0, cj = 0;
  std::size_t offset = 0, count = 0;
};

// Canonical half of the symmetric product grid over [0,1]^2: every stored
// point has x < y, the mirrored point (y,x) is implied. Far cell pairs carry
// tensor Gauss points; pairs touching the diagonal are graded geometrically
// so no point ever lands on x = y.
struct ProductQuadrature {
  MeshPtr mesh;
  std::vector<PairBlock> blocks;  // lexicographic in (ci, cj), ci <= cj
  std::vector<double> x, y, w;    // canonical points and weights
};

ProductQuadrature make_product_quadrature(MeshPtr mesh,
                                          const QuadratureRule& rule);

// The line and product grids for one mesh and rule, built together so every
// assembly and pairing shares identical points.
struct QuadGrids {
  QuadratureRule rule;
  LineQuadrature line;
  ProductQuadrature product;

  const Mesh& mesh() const { return *product.mesh; }
};

QuadGrids make_grids(MeshPtr mesh, const QuadratureRule& rule);

// Two-point field sampled on the canonical product grid: valXY holds the
// value at (x,y) with x < y, valYX the value at the mirrored point (y,x).
// A flux may carry `tail`, its one-sided exterior factor at the line points
// (empty tail = the field vanishes whenever a point leaves the domain).
struct ProductField {
  MeshPtr mesh;
  std::vector<double> valXY, valYX;  // one entry per canonical product point
  std::vector<double> tail;          // empty, or one entry per line point
};

ProductField make_zero_product_field(const QuadGrids& grids);

// Samples a two-argument function at the canonical points and their mirrors.
ProductField sample_product_function(
    const std::function<double(double, double)>& phi, const QuadGrids& grids);

// Throws std::invalid_argument unless the field was built on this grid.
void require_same_grid(const ProductField& phi, const QuadGrids& grids);

}  // namespace nlhom

#endif
