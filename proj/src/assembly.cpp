#include "nlhom/assembly.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "nlhom/concurrency.hpp"

namespace nlhom {

namespace {

inline double power_weight(double t, double p) {
  if (p == 2.0) return t;
  if (t == 0.0) return 0.0;
  return std::pow(std::abs(t), p - 2.0) * t;
}

// Derivative of the regularized weight (t^2 + eps^2)^{(p-2)/2} t:
//   (t^2 + eps^2)^{(p-4)/2} * ((p-1) t^2 + eps^2).
inline double power_weight_derivative(double t, double p, double eps) {
  if (p == 2.0) return 1.0;
  if (eps == 0.0) {
    if (t == 0.0) return 0.0;  // p > 2 here; the p < 2 case is rejected earlier
    return (p - 1.0) * std::pow(std::abs(t), p - 2.0);
  }
  const double m2 = t * t + eps * eps;
  return std::pow(m2, 0.5 * (p - 4.0)) * ((p - 1.0) * t * t + eps * eps);
}

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

void require_shared_meshes(const Coefficient& a, const ScalarField& u,
                           const QuadGrids& grids) {
  if (!a.mesh || !u.mesh || !same_mesh(*a.mesh, *u.mesh) ||
      !same_mesh(*u.mesh, grids.mesh())) {
    throw std::invalid_argument(
        "assembly requires coefficient, state, and grid on one mesh");
  }
}

}  // namespace

Regularization make_regularization(double epsilon, double continuationFactor,
                                   double epsilonFloor) {
  if (!(epsilonFloor > 0.0)) {
    throw std::invalid_argument("epsilonFloor must be positive; got " +
                                std::to_string(epsilonFloor));
  }
  if (!(epsilon >= epsilonFloor)) {
    throw std::invalid_argument("epsilon must start at or above epsilonFloor; got " +
                                std::to_string(epsilon));
  }
  if (!(continuationFactor > 0.0) || !(continuationFactor < 1.0)) {
    throw std::invalid_argument("continuationFactor must lie in (0,1); got " +
                                std::to_string(continuationFactor));
  }
  return Regularization{epsilon, continuationFactor, epsilonFloor};
}

std::vector<double> assemble_load(const Density& f, const QuadGrids& grids) {
  const std::size_t n = grids.mesh().nCells;
  const double invH = static_cast<double>(n);
  std::vector<double> load(n - 1, 0.0);
  for (std::size_t i = 0; i < grids.line.x.size(); ++i) {
    const double x = grids.line.x[i];
    const std::size_t c = grids.line.cellOfPoint[i];
    const double fv = f(x);
    if (!std::isfinite(fv)) {
      throw std::runtime_error("load density is non-finite at x=" +
                               std::to_string(x));
    }
    const double e = grids.line.w[i] * fv;
    const double xi = (x - grids.mesh().nodes[c]) * invH;
    if (c >= 1) load[c - 1] += e * (1.0 - xi);
    if (c + 1 <= n - 1) load[c] += e * xi;
  }
  return load;
}

double energy_quadratic_part(const Coefficient& a, const ScalarField& u,
                             const FracParams& params, const QuadGrids& grids) {
  require_shared_meshes(a, u, grids);
  const CellLinear lin(u);
  const auto& G = grids.product;
  const auto& blocks = G.blocks;
  const double sigma = params.gradExponent;
  const double p = params.p;

  std::vector<double> partial(blocks.size(), 0.0);
  parallel_chunks(blocks.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t bi = b; bi < e; ++bi) {
      const PairBlock& blk = blocks[bi];
      const double av = a.pair_value(blk.ci, blk.cj);
      double acc = 0.0;
      for (std::size_t i = blk.offset; i < blk.offset + blk.count; ++i) {
        const double du = (lin.eval(blk.ci, G.x[i]) - lin.eval(blk.cj, G.y[i])) *
                          std::pow(G.y[i] - G.x[i], -sigma);
        acc += G.w[i] * std::pow(std::abs(du), p);
      }
      partial[bi] = acc * av;
    }
  });
  double interior = 0.0;
  for (const double v : partial) interior += v;

  double tails = 0.0;
  for (std::size_t i = 0; i < grids.line.x.size(); ++i) {
    const double ux = lin.eval(grids.line.cellOfPoint[i], grids.line.x[i]);
    tails += grids.line.w[i] * std::pow(std::abs(ux), p) *
             tail_weight(grids.line.x[i], params);
  }
  return 2.0 * interior + 2.0 * a.exteriorValue * tails;
}

double assemble_energy(const Coefficient& a, const ScalarField& u,
                       const Density& f, const FracParams& params,
                       const QuadGrids& grids) {
  const double quadraticPart = energy_quadratic_part(a, u, params, grids);
  const CellLinear lin(u);
  double loadPart = 0.0;
  for (std::size_t i = 0; i < grids.line.x.size(); ++i) {
    const double ux = lin.eval(grids.line.cellOfPoint[i], grids.line.x[i]);
    loadPart += grids.line.w[i] * f(grids.line.x[i]) * ux;
  }
  return quadraticPart / (2.0 * params.p) - loadPart;
}

std::vector<double> assemble_residual(const Coefficient& a,
                                      const ScalarField& u, const Density& f,
                                      const FracParams& params,
                                      const QuadGrids& grids) {
  require_shared_meshes(a, u, grids);
  const std::size_t n = grids.mesh().nCells;
  const double invH = static_cast<double>(n);
  const CellLinear lin(u);
  const auto& G = grids.product;
  const auto& blocks = G.blocks;
  const auto& nodes = grids.mesh().nodes;
  const double sigma = params.gradExponent;
  const double p = params.p;

  // Per-block partials against the four basis functions touching the block:
  // slots 0..3 correspond to nodes (ci, ci+1, cj, cj+1); coincident nodes in
  // neighbouring slots simply accumulate twice at merge time.
  std::vector<std::array<double, 4>> partial(blocks.size());
  parallel_chunks(blocks.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t bi = b; bi < e; ++bi) {
      const PairBlock& blk = blocks[bi];
      const double av = a.pair_value(blk.ci, blk.cj);
      std::array<double, 4> acc{0.0, 0.0, 0.0, 0.0};
      for (std::size_t i = blk.offset; i < blk.offset + blk.count; ++i) {
        const double kern = std::pow(G.y[i] - G.x[i], -sigma);
        const double xiX = (G.x[i] - nodes[blk.ci]) * invH;
        const double xiY = (G.y[i] - nodes[blk.cj]) * invH;
        const double du = (lin.eval(blk.ci, G.x[i]) - lin.eval(blk.cj, G.y[i])) * kern;
        const double common = G.w[i] * av * power_weight(du, p) * kern;
        acc[0] += common * (1.0 - xiX);
        acc[1] += common * xiX;
        acc[2] -= common * (1.0 - xiY);
        acc[3] -= common * xiY;
      }
      partial[bi] = acc;
    }
  });

  std::vector<double> res(n - 1, 0.0);
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const std::array<std::size_t, 4> node{blocks[bi].ci, blocks[bi].ci + 1,
                                          blocks[bi].cj, blocks[bi].cj + 1};
    for (int s = 0; s < 4; ++s) {
      if (node[s] >= 1 && node[s] <= n - 1) res[node[s] - 1] += partial[bi][s];
    }
  }

  // Exterior tail term and load, on the shared line quadrature.
  for (std::size_t i = 0; i < grids.line.x.size(); ++i) {
    const double x = grids.line.x[i];
    const std::size_t c = grids.line.cellOfPoint[i];
    const double xi = (x - nodes[c]) * invH;
    const double ux = lin.eval(c, x);
    const double e = grids.line.w[i] * a.exteriorValue * power_weight(ux, p) *
                     tail_weight(x, params);
    if (c >= 1) res[c - 1] += e * (1.0 - xi);
    if (c + 1 <= n - 1) res[c] += e * xi;
  }
  const std::vector<double> load = assemble_load(f, grids);
  for (std::size_t i = 0; i < res.size(); ++i) res[i] -= load[i];
  return res;
}

DenseMatrix assemble_hessian(const Coefficient& a, const ScalarField& u,
                             const FracParams& params, const QuadGrids& grids,
                             const Regularization& reg) {
  if (params.p < 2.0 && reg.epsilon == 0.0) {
    throw std::invalid_argument(
        "the unregularized second variation is unbounded for p < 2; "
        "a positive epsilon is required");
  }
  require_shared_meshes(a, u, grids);
  const std::size_t n = grids.mesh().nCells;
  const double invH = static_cast<double>(n);
  const CellLinear lin(u);
  const auto& G = grids.product;
  const auto& blocks = G.blocks;
  const auto& nodes = grids.mesh().nodes;
  const double sigma = params.gradExponent;
  const double p = params.p;
  const double eps = reg.epsilon;

  // 4x4 per-block partials over the touching basis functions; only the upper
  // triangle is computed and it is mirrored on write, so the assembled matrix
  // is symmetric bit for bit.
  std::vector<std::array<double, 16>> partial(blocks.size());
  parallel_chunks(blocks.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t bi = b; bi < e; ++bi) {
      const PairBlock& blk = blocks[bi];
      const double av = a.pair_value(blk.ci, blk.cj);
      std::array<double, 16> acc{};
      for (std::size_t i = blk.offset; i < blk.offset + blk.count; ++i) {
        const double kern = std::pow(G.y[i] - G.x[i], -sigma);
        const double xiX = (G.x[i] - nodes[blk.ci]) * invH;
        const double xiY = (G.y[i] - nodes[blk.cj]) * invH;
        const double du = (lin.eval(blk.ci, G.x[i]) - lin.eval(blk.cj, G.y[i])) * kern;
        const double common =
            G.w[i] * av * power_weight_derivative(du, p, eps) * kern * kern;
        const std::array<double, 4> delta{1.0 - xiX, xiX, -(1.0 - xiY), -xiY};
        for (int s = 0; s < 4; ++s) {
          const double cs = common * delta[s];
          for (int t = s; t < 4; ++t) acc[4 * s + t] += cs * delta[t];
        }
      }
      partial[bi] = acc;
    }
  });

  DenseMatrix H;
  H.n = n - 1;
  H.data.assign(H.n * H.n, 0.0);
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const std::array<std::size_t, 4> node{blocks[bi].ci, blocks[bi].ci + 1,
                                          blocks[bi].cj, blocks[bi].cj + 1};
    for (int s = 0; s < 4; ++s) {
      if (node[s] < 1 || node[s] > n - 1) continue;
      for (int t = s; t < 4; ++t) {
        if (node[t] < 1 || node[t] > n - 1) continue;
        const double v = partial[bi][4 * s + t];
        H.at(node[s] - 1, node[t] - 1) += v;
        // The mirrored slot pair contributes equally; when both slots map to
        // one node this lands on the same diagonal entry, as it must.
        if (s != t) H.at(node[t] - 1, node[s] - 1) += v;
      }
    }
  }

  for (std::size_t i = 0; i < grids.line.x.size(); ++i) {
    const double x = grids.line.x[i];
    const std::size_t c = grids.line.cellOfPoint[i];
    const double xi = (x - nodes[c]) * invH;
    const double ux = lin.eval(c, x);
    const double e = grids.line.w[i] * a.exteriorValue *
                     power_weight_derivative(ux, p, eps) * tail_weight(x, params);
    if (c >= 1) H.at(c - 1, c - 1) += e * (1.0 - xi) * (1.0 - xi);
    if (c + 1 <= n - 1) H.at(c, c) += e * xi * xi;
    if (c >= 1 && c + 1 <= n - 1) {
      const double off = e * (1.0 - xi) * xi;
      H.at(c - 1, c) += off;
      H.at(c, c - 1) += off;
    }
  }
  return H;
}

}  // namespace nlhom
