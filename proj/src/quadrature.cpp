#include "nlhom/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include "nlhom/concurrency.hpp"

namespace nlhom {

QuadratureRule make_quadrature_rule(int pointsPerCell, int diagonalLevels,
                                    double gradingRatio) {
  if (pointsPerCell < 2) {
    throw std::invalid_argument("pointsPerCell must be at least 2; got " +
                                std::to_string(pointsPerCell));
  }
  if (diagonalLevels < 3) {
    throw std::invalid_argument("diagonalLevels must be at least 3; got " +
                                std::to_string(diagonalLevels));
  }
  if (!(gradingRatio > 0.0) || !(gradingRatio < 1.0)) {
    throw std::invalid_argument("gradingRatio must lie in (0,1); got " +
                                std::to_string(gradingRatio));
  }
  return QuadratureRule{pointsPerCell, diagonalLevels, gradingRatio};
}

void gauss_legendre(int m, std::vector<double>& points,
                    std::vector<double>& weights) {
  if (m < 1) {
    throw std::invalid_argument("Gauss rule needs at least 1 point; got " +
                                std::to_string(m));
  }
  points.resize(static_cast<std::size_t>(m));
  weights.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    // Initial guess for the i-th root of the Legendre polynomial P_m.
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(m) + 0.5));
    double deriv = 1.0;
    for (int iter = 0; iter < 100; ++iter) {
      double prev = 1.0;  // P_{k-1}
      double curr = x;    // P_k
      for (int k = 2; k <= m; ++k) {
        const double next =
            ((2.0 * k - 1.0) * x * curr - (k - 1.0) * prev) / k;
        prev = curr;
        curr = next;
      }
      deriv = static_cast<double>(m) * (x * curr - prev) / (x * x - 1.0);
      const double dx = -curr / deriv;
      x += dx;
      if (std::abs(dx) <= 4.0 * std::numeric_limits<double>::epsilon()) break;
    }
    points[static_cast<std::size_t>(i)] = x;
    weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * deriv * deriv);
  }
  // Roots emerge in descending order; store ascending.
  std::reverse(points.begin(), points.end());
  std::reverse(weights.begin(), weights.end());
}

namespace {

struct Gauss01 {
  std::vector<double> xi, w;  // reference points/weights on [-1,1]
};

Gauss01 reference_rule(int m) {
  Gauss01 g;
  gauss_legendre(m, g.xi, g.w);
  return g;
}

// Appends the Gauss rule mapped to [lo, hi].
void append_interval(const Gauss01& g, double lo, double hi,
                     std::vector<double>& x, std::vector<double>& w) {
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  for (std::size_t q = 0; q < g.xi.size(); ++q) {
    x.push_back(mid + half * g.xi[q]);
    w.push_back(half * g.w[q]);
  }
}

// Subintervals of [lo, hi] graded geometrically toward `toward` (an endpoint),
// listed in ascending order. Produces `levels` subintervals.
std::vector<std::pair<double, double>> graded_subintervals(double lo, double hi,
                                                           double toward,
                                                           int levels,
                                                           double ratio) {
  const double len = hi - lo;
  std::vector<std::pair<double, double>> out;
  out.reserve(static_cast<std::size_t>(levels));
  if (toward <= lo) {
    // Finest subinterval first: [lo, lo + len*r^{L-1}], then widening.
    double prev = lo;
    for (int l = levels - 1; l >= 1; --l) {
      const double next = lo + len * std::pow(ratio, l);
      out.emplace_back(prev, next);
      prev = next;
    }
    out.emplace_back(prev, hi);
  } else {
    // Widest subinterval first, finest last: toward the right endpoint.
    double prev = lo;
    for (int l = 1; l <= levels - 1; ++l) {
      const double next = hi - len * std::pow(ratio, l);
      out.emplace_back(prev, next);
      prev = next;
    }
    out.emplace_back(prev, hi);
  }
  return out;
}

}  // namespace

LineQuadrature make_line_quadrature(MeshPtr mesh, const QuadratureRule& rule) {
  const Gauss01 g = reference_rule(rule.pointsPerCell);
  LineQuadrature line;
  const std::size_t n = mesh->nCells;
  for (std::size_t c = 0; c < n; ++c) {
    const double lo = mesh->nodes[c];
    const double hi = mesh->nodes[c + 1];
    std::vector<std::pair<double, double>> subs;
    if (c == 0) {
      subs = graded_subintervals(lo, hi, lo, rule.diagonalLevels,
                                 rule.gradingRatio);
    } else if (c == n - 1) {
      subs = graded_subintervals(lo, hi, hi, rule.diagonalLevels,
                                 rule.gradingRatio);
    } else {
      subs = {{lo, hi}};
    }
    for (const auto& [a, b] : subs) {
      const std::size_t before = line.x.size();
      append_interval(g, a, b, line.x, line.w);
      line.cellOfPoint.insert(line.cellOfPoint.end(), line.x.size() - before, c);
    }
  }
  line.mesh = std::move(mesh);
  return line;
}

ProductQuadrature make_product_quadrature(MeshPtr mesh,
                                          const QuadratureRule& rule) {
  const Gauss01 g = reference_rule(rule.pointsPerCell);
  const std::size_t n = mesh->nCells;
  const double h = mesh->cellWidth;
  const int L = rule.diagonalLevels;
  const double r = rule.gradingRatio;

  ProductQuadrature grid;
  grid.blocks.reserve(n * (n + 1) / 2);

  std::vector<double> tx, tw;  // scratch for 1-D sub-rules
  for (std::size_t ci = 0; ci < n; ++ci) {
    for (std::size_t cj = ci; cj < n; ++cj) {
      PairBlock block;
      block.ci = ci;
      block.cj = cj;
      block.offset = grid.x.size();
      const double ax = mesh->nodes[ci];
      const double bx = mesh->nodes[ci + 1];
      const double ay = mesh->nodes[cj];
      const double by = mesh->nodes[cj + 1];
      if (cj == ci) {
        // Same cell, region {x < y}: substitute t = y - x in (0, h), graded
        // toward t = 0, and integrate x over [ax, bx - t].
        const auto tSubs = graded_subintervals(0.0, h, 0.0, L, r);
        for (const auto& [tlo, thi] : tSubs) {
          tx.clear();
          tw.clear();
          append_interval(g, tlo, thi, tx, tw);
          for (std::size_t qt = 0; qt < tx.size(); ++qt) {
            const double t = tx[qt];
            const double mid = 0.5 * (ax + (bx - t));
            const double half = 0.5 * ((bx - t) - ax);
            for (std::size_t qx = 0; qx < g.xi.size(); ++qx) {
              const double xv = mid + half * g.xi[qx];
              grid.x.push_back(xv);
              grid.y.push_back(xv + t);
              grid.w.push_back(tw[qt] * half * g.w[qx]);
            }
          }
        }
      } else if (cj == ci + 1) {
        // Neighbouring cells meet at one node; grade both axes toward it.
        const auto xSubs = graded_subintervals(ax, bx, bx, L, r);
        const auto ySubs = graded_subintervals(ay, by, ay, L, r);
        for (const auto& [xlo, xhi] : xSubs) {
          for (const auto& [ylo, yhi] : ySubs) {
            const double xmid = 0.5 * (xlo + xhi), xhalf = 0.5 * (xhi - xlo);
            const double ymid = 0.5 * (ylo + yhi), yhalf = 0.5 * (yhi - ylo);
            for (std::size_t qx = 0; qx < g.xi.size(); ++qx) {
              for (std::size_t qy = 0; qy < g.xi.size(); ++qy) {
                grid.x.push_back(xmid + xhalf * g.xi[qx]);
                grid.y.push_back(ymid + yhalf * g.xi[qy]);
                grid.w.push_back(xhalf * g.w[qx] * yhalf * g.w[qy]);
              }
            }
          }
        }
      } else {
        // Separated cells: the integrand is smooth, plain tensor Gauss.
        const double xmid = 0.5 * (ax + bx), xhalf = 0.5 * (bx - ax);
        const double ymid = 0.5 * (ay + by), yhalf = 0.5 * (by - ay);
        for (std::size_t qx = 0; qx < g.xi.size(); ++qx) {
          for (std::size_t qy = 0; qy < g.xi.size(); ++qy) {
            grid.x.push_back(xmid + xhalf * g.xi[qx]);
            grid.y.push_back(ymid + yhalf * g.xi[qy]);
            grid.w.push_back(xhalf * g.w[qx] * yhalf * g.w[qy]);
          }
        }
      }
      block.count = grid.x.size() - block.offset;
      grid.blocks.push_back(block);
    }
  }
  grid.mesh = std::move(mesh);
  return grid;
}

QuadGrids make_grids(MeshPtr mesh, const QuadratureRule& rule) {
  QuadGrids grids;
  grids.rule = make_quadrature_rule(rule.pointsPerCell, rule.diagonalLevels,
                                    rule.gradingRatio);
  grids.line = make_line_quadrature(mesh, rule);
  grids.product = make_product_quadrature(mesh, rule);
  return grids;
}

ProductField make_zero_product_field(const QuadGrids& grids) {
  ProductField f;
  f.mesh = grids.product.mesh;
  f.valXY.assign(grids.product.x.size(), 0.0);
  f.valYX.assign(grids.product.x.size(), 0.0);
  return f;
}

ProductField sample_product_function(
    const std::function<double(double, double)>& phi, const QuadGrids& grids) {
  ProductField f = make_zero_product_field(grids);
  const auto& gx = grids.product.x;
  const auto& gy = grids.product.y;
  parallel_chunks(gx.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      f.valXY[i] = phi(gx[i], gy[i]);
      f.valYX[i] = phi(gy[i], gx[i]);
    }
  });
  return f;
}

void require_same_grid(const ProductField& phi, const QuadGrids& grids) {
  if (!phi.mesh || !same_mesh(*phi.mesh, grids.mesh()) ||
      phi.valXY.size() != grids.product.x.size() ||
      phi.valYX.size() != grids.product.x.size() ||
      (!phi.tail.empty() && phi.tail.size() != grids.line.x.size())) {
    throw std::invalid_argument(
        "product field does not match the quadrature grid it is paired with");
  }
}

}  // namespace nlhom
