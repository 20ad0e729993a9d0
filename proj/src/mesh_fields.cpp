#include "nlhom/mesh_fields.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nlhom {

FracParams make_frac_params(double s, double p) {
  if (!(s > 0.0) || !(s < 1.0) || !std::isfinite(s)) {
    throw std::invalid_argument("s must lie in the open interval (0,1); got " +
                                std::to_string(s));
  }
  if (!(p > 1.0) || !std::isfinite(p)) {
    throw std::invalid_argument("p must lie in (1,inf); got " +
                                std::to_string(p));
  }
  FracParams params;
  params.s = s;
  params.p = p;
  params.pPrime = p / (p - 1.0);
  params.kernelExponent = 1.0 + s * p;
  params.gradExponent = 1.0 / p + s;
  return params;
}

MeshPtr build_mesh(std::size_t nCells) {
  if (nCells < 2) {
    throw std::invalid_argument("nCells must be at least 2; got " +
                                std::to_string(nCells));
  }
  auto mesh = std::make_shared<Mesh>();
  mesh->nCells = nCells;
  mesh->cellWidth = 1.0 / static_cast<double>(nCells);
  mesh->nodes.resize(nCells + 1);
  for (std::size_t i = 0; i <= nCells; ++i) {
    mesh->nodes[i] = static_cast<double>(i) / static_cast<double>(nCells);
  }
  return mesh;
}

bool same_mesh(const Mesh& a, const Mesh& b) { return a.nCells == b.nCells; }

double ScalarField::eval(double x) const {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  const std::size_t n = mesh->nCells;
  auto c = static_cast<std::size_t>(x * static_cast<double>(n));
  if (c >= n) c = n - 1;
  // Guard against roundoff placing x just below its cell's left node.
  if (x < mesh->nodes[c] && c > 0) --c;
  const double xi = (x - mesh->nodes[c]) * static_cast<double>(n);
  return nodalValues[c] + (nodalValues[c + 1] - nodalValues[c]) * xi;
}

ScalarField make_zero_state(MeshPtr mesh) {
  ScalarField u;
  u.nodalValues.assign(mesh->nCells + 1, 0.0);
  u.mesh = std::move(mesh);
  return u;
}

ScalarField interpolate_state(const std::function<double(double)>& g,
                              MeshPtr mesh) {
  ScalarField u = make_zero_state(std::move(mesh));
  const std::size_t n = u.mesh->nCells;
  for (std::size_t i = 1; i < n; ++i) {
    const double v = g(u.mesh->nodes[i]);
    if (!std::isfinite(v)) {
      throw std::runtime_error("state interpolation hit a non-finite value at x=" +
                               std::to_string(u.mesh->nodes[i]));
    }
    u.nodalValues[i] = v;
  }
  return u;
}

namespace {

void check_bounds(double exterior, double lambda, double Lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("lambda must be positive; got " +
                                std::to_string(lambda));
  }
  if (!(Lambda >= lambda) || !std::isfinite(Lambda)) {
    throw std::invalid_argument("Lambda must be >= lambda; got " +
                                std::to_string(Lambda));
  }
  if (!(exterior >= lambda) || !(exterior <= Lambda)) {
    throw std::invalid_argument("exterior value must lie in [lambda, Lambda]; got " +
                                std::to_string(exterior));
  }
}

}  // namespace

Coefficient sample_coefficient(const std::function<double(double, double)>& aFun,
                               double exterior, MeshPtr mesh, double lambda,
                               double Lambda) {
  check_bounds(exterior, lambda, Lambda);
  Coefficient a;
  a.mesh = std::move(mesh);
  a.exteriorValue = exterior;
  a.lambda = lambda;
  a.Lambda = Lambda;
  const std::size_t n = a.mesh->nCells;
  a.pairValues.assign(n * n, 0.0);
  std::vector<double> mid(n);
  for (std::size_t i = 0; i < n; ++i) {
    mid[i] = 0.5 * (a.mesh->nodes[i] + a.mesh->nodes[i + 1]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double raw = 0.5 * (aFun(mid[i], mid[j]) + aFun(mid[j], mid[i]));
      if (!std::isfinite(raw)) {
        throw std::runtime_error("coefficient sample is non-finite at cell pair (" +
                                 std::to_string(i) + "," + std::to_string(j) + ")");
      }
      const double v = std::clamp(raw, lambda, Lambda);
      if (v != raw) a.clampCount += (i == j) ? 1 : 2;
      a.pairValues[i * n + j] = v;
      a.pairValues[j * n + i] = v;
    }
  }
  return a;
}

Coefficient constant_coefficient(double value, MeshPtr mesh, double lambda,
                                 double Lambda) {
  if (!(value >= lambda) || !(value <= Lambda)) {
    throw std::invalid_argument("constant coefficient value must lie in [lambda, Lambda]; got " +
                                std::to_string(value));
  }
  check_bounds(value, lambda, Lambda);
  Coefficient a;
  a.mesh = std::move(mesh);
  a.exteriorValue = value;
  a.lambda = lambda;
  a.Lambda = Lambda;
  a.pairValues.assign(a.mesh->nCells * a.mesh->nCells, value);
  return a;
}

Coefficient scale_coefficient(const Coefficient& a, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw std::invalid_argument("coefficient scaling factor must be positive; got " +
                                std::to_string(c));
  }
  Coefficient b = a;
  for (double& v : b.pairValues) v *= c;
  b.exteriorValue *= c;
  b.lambda *= c;
  b.Lambda *= c;
  return b;
}

ScalarField embed_state(const ScalarField& u, MeshPtr fineMesh) {
  const std::size_t coarse = u.mesh->nCells;
  const std::size_t fine = fineMesh->nCells;
  if (fine % coarse != 0) {
    throw std::invalid_argument("state embedding requires nested meshes: " +
                                std::to_string(fine) + " cells not divisible by " +
                                std::to_string(coarse));
  }
  const std::size_t q = fine / coarse;
  ScalarField v = make_zero_state(std::move(fineMesh));
  for (std::size_t j = 0; j <= fine; ++j) {
    const std::size_t i = std::min(j / q, coarse - 1);
    const double xi =
        static_cast<double>(j - i * q) / static_cast<double>(q);
    v.nodalValues[j] =
        u.nodalValues[i] + (u.nodalValues[i + 1] - u.nodalValues[i]) * xi;
  }
  v.nodalValues[0] = 0.0;
  v.nodalValues[fine] = 0.0;
  return v;
}

Coefficient embed_coefficient(const Coefficient& a, MeshPtr fineMesh) {
  const std::size_t coarse = a.mesh->nCells;
  const std::size_t fine = fineMesh->nCells;
  if (fine % coarse != 0) {
    throw std::invalid_argument("coefficient embedding requires nested meshes: " +
                                std::to_string(fine) + " cells not divisible by " +
                                std::to_string(coarse));
  }
  const std::size_t q = fine / coarse;
  Coefficient b;
  b.mesh = std::move(fineMesh);
  b.exteriorValue = a.exteriorValue;
  b.lambda = a.lambda;
  b.Lambda = a.Lambda;
  b.clampCount = a.clampCount;
  b.pairValues.assign(fine * fine, 0.0);
  for (std::size_t i = 0; i < fine; ++i) {
    const std::size_t ic = i / q;
    for (std::size_t j = 0; j < fine; ++j) {
      b.pairValues[i * fine + j] = a.pairValues[ic * coarse + j / q];
    }
  }
  return b;
}

}  // namespace nlhom
