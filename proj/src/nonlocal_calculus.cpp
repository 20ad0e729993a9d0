#include "nlhom/nonlocal_calculus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlhom/concurrency.hpp"

namespace nlhom {

namespace {

// |t|^{p-2} t, continuously extended by 0 at t = 0 (the exponent p-1 of the
// magnitude is positive for every admissible p).
inline double power_weight(double t, double p) {
  if (p == 2.0) return t;
  if (t == 0.0) return 0.0;
  return std::pow(std::abs(t), p - 2.0) * t;
}

// Per-cell nodal value and slope of a state, for fast evaluation inside a
// known cell.
struct CellLinear {
  std::vector<double> leftValue;
  std::vector<double> slope;
  const std::vector<double>* nodes = nullptr;

  explicit CellLinear(const ScalarField& u) {
    const std::size_t n = u.mesh->nCells;
    nodes = &u.mesh->nodes;
    leftValue.resize(n);
    slope.resize(n);
    const double invH = static_cast<double>(n);
    for (std::size_t c = 0; c < n; ++c) {
      leftValue[c] = u.nodalValues[c];
      slope[c] = (u.nodalValues[c + 1] - u.nodalValues[c]) * invH;
    }
  }

  double eval(std::size_t cell, double x) const {
    return leftValue[cell] + slope[cell] * (x - (*nodes)[cell]);
  }
};

// Evaluates fn(block) for every canonical block in parallel and merges the
// per-block partials in block order, so the result is independent of the
// thread count.
template <class PerBlock>
double reduce_blocks_sum(const QuadGrids& grids, PerBlock&& fn) {
  const auto& blocks = grids.product.blocks;
  std::vector<double> partial(blocks.size(), 0.0);
  parallel_chunks(blocks.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t bi = b; bi < e; ++bi) partial[bi] = fn(blocks[bi]);
  });
  double total = 0.0;
  for (const double v : partial) total += v;
  return total;
}

template <class PerBlock>
double reduce_blocks_max(const QuadGrids& grids, PerBlock&& fn) {
  const auto& blocks = grids.product.blocks;
  std::vector<double> partial(blocks.size(), 0.0);
  parallel_chunks(blocks.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t bi = b; bi < e; ++bi) partial[bi] = fn(blocks[bi]);
  });
  double best = 0.0;
  for (const double v : partial) best = std::max(best, v);
  return best;
}

void require_state_on_grid(const ScalarField& u, const QuadGrids& grids) {
  if (!u.mesh || !same_mesh(*u.mesh, grids.mesh())) {
    throw std::invalid_argument("state mesh does not match the quadrature grid");
  }
}

inline double ulp_of(double x) {
  const double base = std::max(std::abs(x), std::numeric_limits<double>::min());
  return std::nextafter(base, std::numeric_limits<double>::infinity()) - base;
}

}  // namespace

double nonlocal_gradient_at(const ScalarField& u, double x, double y,
                            const FracParams& params) {
  if (x == y) {
    throw std::invalid_argument(
        "the two-point gradient is not evaluated on the diagonal x = y");
  }
  const double d = std::abs(x - y);
  return (u.eval(x) - u.eval(y)) / std::pow(d, params.gradExponent);
}

double tail_weight(double x, const FracParams& params) {
  if (!(x > 0.0) || !(x < 1.0)) {
    throw std::invalid_argument("tail weight is defined for x in (0,1); got " +
                                std::to_string(x));
  }
  const double sp = params.s * params.p;
  return (std::pow(x, -sp) + std::pow(1.0 - x, -sp)) / sp;
}

double gagliardo_seminorm(const ScalarField& u, const FracParams& params,
                          const QuadGrids& grids) {
  require_state_on_grid(u, grids);
  const CellLinear lin(u);
  const auto& G = grids.product;
  const double sigma = params.gradExponent;
  const double p = params.p;
  const double interior =
      2.0 * reduce_blocks_sum(grids, [&](const PairBlock& blk) {
        double acc = 0.0;
        for (std::size_t i = blk.offset; i < blk.offset + blk.count; ++i) {
          const double du = (lin.eval(blk.ci, G.x[i]) - lin.eval(blk.cj, G.y[i])) *
                            std::pow(G.y[i] - G.x[i], -sigma);
          acc += G.w[i] * std::pow(std::abs(du), p);
        }
        return acc;
      });
  double tails = 0.0;
  for (std::size_t i = 0; i < grids.line.x.size(); ++i) {
    const double ux = lin.eval(grids.line.cellOfPoint[i], grids.line.x[i]);
    tails += grids.line.w[i] * std::pow(std::abs(ux), p) *
             tail_weight(grids.line.x[i], params);
  }
  return std::pow(interior + 2.0 * tails, 1.0 / p);
}

ProductField compute_flux(const Coefficient& a, const ScalarField& u,
                          const FracParams& params, const QuadGrids& grids) {
  if (!a.mesh || !u.mesh || !same_mesh(*a.mesh, *u.mesh)) {
    throw std::invalid_argument("coefficient and state live on different meshes");
  }
  require_state_on_grid(u, grids);
  const CellLinear lin(u);
  const auto& G = grids.product;
  const double sigma = params.gradExponent;
  const double p = params.p;

  ProductField q = make_zero_product_field(grids);
  const auto& blocks = G.blocks;
  parallel_chunks(blocks.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t bi = b; bi < e; ++bi) {
      const PairBlock& blk = blocks[bi];
      const double av = a.pair_value(blk.ci, blk.cj);
      for (std::size_t i = blk.offset; i < blk.offset + blk.count; ++i) {
        const double du = (lin.eval(blk.ci, G.x[i]) - lin.eval(blk.cj, G.y[i])) *
                          std::pow(G.y[i] - G.x[i], -sigma);
        const double v = av * power_weight(du, p);
        q.valXY[i] = v;
        q.valYX[i] = -v;
      }
    }
  });
  q.tail.resize(grids.line.x.size());
  for (std::size_t i = 0; i < grids.line.x.size(); ++i) {
    const double ux = lin.eval(grids.line.cellOfPoint[i], grids.line.x[i]);
    q.tail[i] = a.exteriorValue * power_weight(ux, p);
  }
  return q;
}

namespace {

double exterior_pairing_tail(const ProductField& phi, const CellLinear& lin,
                             const FracParams& params, const QuadGrids& grids) {
  if (phi.tail.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < grids.line.x.size(); ++i) {
    const double vx = lin.eval(grids.line.cellOfPoint[i], grids.line.x[i]);
    acc += grids.line.w[i] * phi.tail[i] * vx *
           tail_weight(grids.line.x[i], params);
  }
  return 2.0 * acc;
}

}  // namespace

double duality_pairing(const ProductField& phi, const ScalarField& u,
                       const FracParams& params, const QuadGrids& grids) {
  require_same_grid(phi, grids);
  require_state_on_grid(u, grids);
  const CellLinear lin(u);
  const auto& G = grids.product;
  const double sigma = params.gradExponent;
  const double interior = reduce_blocks_sum(grids, [&](const PairBlock& blk) {
    double acc = 0.0;
    for (std::size_t i = blk.offset; i < blk.offset + blk.count; ++i) {
      const double du = (lin.eval(blk.ci, G.x[i]) - lin.eval(blk.cj, G.y[i])) *
                        std::pow(G.y[i] - G.x[i], -sigma);
      acc += G.w[i] * (phi.valXY[i] * du + phi.valYX[i] * (-du));
    }
    return acc;
  });
  return interior + exterior_pairing_tail(phi, lin, params, grids);
}

double nonlocal_divergence(const ProductField& phi, const ScalarField& vTest,
                           const FracParams& params, const QuadGrids& grids) {
  require_same_grid(phi, grids);
  require_state_on_grid(vTest, grids);
  const CellLinear lin(vTest);
  const auto& G = grids.product;
  const double sigma = params.gradExponent;
  const double interior = reduce_blocks_sum(grids, [&](const PairBlock& blk) {
    double acc = 0.0;
    for (std::size_t i = blk.offset; i < blk.offset + blk.count; ++i) {
      const double dv = (lin.eval(blk.ci, G.x[i]) - lin.eval(blk.cj, G.y[i])) *
                        std::pow(G.y[i] - G.x[i], -sigma);
      acc += G.w[i] * ((phi.valXY[i] - phi.valYX[i]) * dv);
    }
    return acc;
  });
  return interior + exterior_pairing_tail(phi, lin, params, grids);
}

double product_pairing(const ProductField& A, const ProductField& B,
                       const QuadGrids& grids) {
  require_same_grid(A, grids);
  require_same_grid(B, grids);
  const auto& G = grids.product;
  return reduce_blocks_sum(grids, [&](const PairBlock& blk) {
    double acc = 0.0;
    for (std::size_t i = blk.offset; i < blk.offset + blk.count; ++i) {
      acc += G.w[i] * (A.valXY[i] * B.valXY[i] + A.valYX[i] * B.valYX[i]);
    }
    return acc;
  });
}

double triple_pairing(const ProductField& window, const ProductField& A,
                      const ProductField& B, const QuadGrids& grids) {
  require_same_grid(window, grids);
  require_same_grid(A, grids);
  require_same_grid(B, grids);
  const auto& G = grids.product;
  return reduce_blocks_sum(grids, [&](const PairBlock& blk) {
    double acc = 0.0;
    for (std::size_t i = blk.offset; i < blk.offset + blk.count; ++i) {
      acc += G.w[i] * (window.valXY[i] * A.valXY[i] * B.valXY[i] +
                       window.valYX[i] * A.valYX[i] * B.valYX[i]);
    }
    return acc;
  });
}

ProductField gradient_field(const ScalarField& u, const FracParams& params,
                            const QuadGrids& grids) {
  require_state_on_grid(u, grids);
  const CellLinear lin(u);
  const auto& G = grids.product;
  const double sigma = params.gradExponent;
  ProductField f = make_zero_product_field(grids);
  const auto& blocks = G.blocks;
  parallel_chunks(blocks.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t bi = b; bi < e; ++bi) {
      const PairBlock& blk = blocks[bi];
      for (std::size_t i = blk.offset; i < blk.offset + blk.count; ++i) {
        const double du = (lin.eval(blk.ci, G.x[i]) - lin.eval(blk.cj, G.y[i])) *
                          std::pow(G.y[i] - G.x[i], -sigma);
        f.valXY[i] = du;
        f.valYX[i] = -du;
      }
    }
  });
  return f;
}

double coefficient_pairing(const Coefficient& a,
                           const std::function<double(double, double)>& psi,
                           const QuadGrids& grids) {
  if (!a.mesh || !same_mesh(*a.mesh, grids.mesh())) {
    throw std::invalid_argument("coefficient mesh does not match the grid");
  }
  const auto& G = grids.product;
  return reduce_blocks_sum(grids, [&](const PairBlock& blk) {
    double acc = 0.0;
    for (std::size_t i = blk.offset; i < blk.offset + blk.count; ++i) {
      acc += G.w[i] * (psi(G.x[i], G.y[i]) + psi(G.y[i], G.x[i]));
    }
    return acc * a.pair_value(blk.ci, blk.cj);
  });
}

double flux_envelope_margin_ulp(const ProductField& q, const ScalarField& u,
                                const Coefficient& a, const FracParams& params,
                                const QuadGrids& grids) {
  require_same_grid(q, grids);
  require_state_on_grid(u, grids);
  if (!a.mesh || !same_mesh(*a.mesh, *u.mesh)) {
    throw std::invalid_argument("coefficient and state live on different meshes");
  }
  const CellLinear lin(u);
  const auto& G = grids.product;
  const double sigma = params.gradExponent;
  const double p = params.p;
  const double lambda = a.lambda;
  const double Lambda = a.Lambda;

  const auto pointMargin = [&](double magnitude, double envelope) {
    const double lo = lambda * envelope;
    const double hi = Lambda * envelope;
    double worst = 0.0;
    if (magnitude < lo) worst = (lo - magnitude) / ulp_of(lo);
    if (magnitude > hi) worst = std::max(worst, (magnitude - hi) / ulp_of(hi));
    return worst;
  };

  double worst = reduce_blocks_max(grids, [&](const PairBlock& blk) {
    double blockWorst = 0.0;
    for (std::size_t i = blk.offset; i < blk.offset + blk.count; ++i) {
      const double du = (lin.eval(blk.ci, G.x[i]) - lin.eval(blk.cj, G.y[i])) *
                        std::pow(G.y[i] - G.x[i], -sigma);
      const double envelope = std::abs(power_weight(du, p));
      blockWorst = std::max(blockWorst, pointMargin(std::abs(q.valXY[i]), envelope));
      blockWorst = std::max(blockWorst, pointMargin(std::abs(q.valYX[i]), envelope));
    }
    return blockWorst;
  });
  for (std::size_t i = 0; i < q.tail.size(); ++i) {
    const double ux = lin.eval(grids.line.cellOfPoint[i], grids.line.x[i]);
    const double envelope = std::abs(power_weight(ux, p));
    worst = std::max(worst, pointMargin(std::abs(q.tail[i]), envelope));
  }
  return worst;
}

}  // namespace nlhom
