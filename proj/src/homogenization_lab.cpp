#include "nlhom/homogenization_lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlhom/errors.hpp"
#include "nlhom/nonlocal_calculus.hpp"

namespace nlhom {

namespace {

// Frozen acceptance constants for the trend checks. A gap below gapFloor is
// treated as numerically zero; the slack absorbs roundoff wiggle on plateaus.
constexpr double kTrendSlackRel = 1e-9;
constexpr double kTrendFinalOverInitial = 0.3;
constexpr double kGapFloorFactor = 1000.0;

constexpr double kPi = std::numbers::pi;

std::size_t round_up_multiple(std::size_t value, std::size_t unit) {
  return ((value + unit - 1) / unit) * unit;
}

void require_index(std::size_t k) {
  if (k == 0) {
    throw std::invalid_argument("sequence index k must be >= 1");
  }
}

long long tile_index(double t, std::size_t k) {
  const double scaled = 2.0 * static_cast<double>(k) * t;
  auto idx = static_cast<long long>(std::floor(scaled));
  const auto last = static_cast<long long>(2 * k) - 1;
  return std::clamp(idx, static_cast<long long>(0), last);
}

std::vector<double> line_values(const ScalarField& u,
                                const LineQuadrature& line) {
  std::vector<double> vals(line.x.size());
  for (std::size_t i = 0; i < line.x.size(); ++i) {
    vals[i] = u.eval(line.x[i]);
  }
  return vals;
}

void require_field_on_grid(const ScalarField& u, const QuadGrids& grids,
                           const char* who) {
  if (!u.mesh || !same_mesh(*u.mesh, grids.mesh())) {
    throw std::invalid_argument(std::string(who) +
                                ": field does not live on the grid's mesh");
  }
}

void require_suite(const TestSuite& suite) {
  if (suite.stateTests.empty() || suite.productTests.empty() ||
      suite.coefficientTests.empty()) {
    throw std::invalid_argument(
        "test suite must have at least one member in every family");
  }
}

}  // namespace

Coefficient gen_separable_oscillation(std::size_t k, double mean,
                                      double amplitude, MeshPtr mesh) {
  require_index(k);
  const double amp = std::abs(amplitude);
  if (!(mean - amp > 0.0)) {
    throw std::invalid_argument(
        "separable oscillation must stay uniformly positive: require "
        "mean - |amplitude| > 0");
  }
  const double omega = 2.0 * kPi * static_cast<double>(k);
  auto fun = [mean, amplitude, omega](double x, double y) {
    return mean + amplitude * std::sin(omega * x) * std::sin(omega * y);
  };
  return sample_coefficient(fun, mean, mesh, mean - amp, mean + amp);
}

Coefficient gen_product_checkerboard(std::size_t k, double alpha, double beta,
                                     MeshPtr mesh) {
  require_index(k);
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw std::invalid_argument("checkerboard values must be positive");
  }
  if (mesh->nCells % (2 * k) != 0) {
    throw std::invalid_argument(
        "product checkerboard needs nCells divisible by 2k so tiles align "
        "with cells (nCells=" +
        std::to_string(mesh->nCells) + ", k=" + std::to_string(k) + ")");
  }
  auto fun = [alpha, beta, k](double x, double y) {
    const long long parity = (tile_index(x, k) + tile_index(y, k)) % 2;
    return parity == 0 ? alpha : beta;
  };
  return sample_coefficient(fun, 0.5 * (alpha + beta), mesh,
                            std::min(alpha, beta), std::max(alpha, beta));
}

CoefficientSequence gen_non_converging_alternator(MeshPtr mesh) {
  if (!mesh) {
    throw std::invalid_argument("alternator sequence needs a mesh");
  }
  CoefficientSequence seq;
  seq.familyTag = "non-converging-alternator";
  seq.lambda = 1.5;
  seq.Lambda = 2.5;
  const std::size_t n = mesh->nCells;
  seq.meshCellsForIndex = [n](std::size_t k) {
    require_index(k);
    return n;
  };
  seq.generator = [](std::size_t k, MeshPtr m) {
    require_index(k);
    const double value = (k % 2 == 1) ? 1.5 : 2.5;
    return constant_coefficient(value, m, 1.5, 2.5);
  };
  seq.claimedWeakStarLimit = [](MeshPtr m) {
    return constant_coefficient(2.0, m, 1.5, 2.5);
  };
  return seq;
}

CoefficientSequence make_oscillation_sequence(double mean, double amplitude,
                                              std::size_t baseCells) {
  const double amp = std::abs(amplitude);
  if (!(mean - amp > 0.0)) {
    throw std::invalid_argument(
        "separable oscillation must stay uniformly positive: require "
        "mean - |amplitude| > 0");
  }
  if (baseCells < 2) {
    throw std::invalid_argument("baseCells must be >= 2");
  }
  CoefficientSequence seq;
  seq.familyTag = "separable-oscillation";
  seq.lambda = mean - amp;
  seq.Lambda = mean + amp;
  seq.meshCellsForIndex = [baseCells](std::size_t k) {
    require_index(k);
    return std::max<std::size_t>(baseCells, 16 * k);
  };
  seq.generator = [mean, amplitude](std::size_t k, MeshPtr m) {
    return gen_separable_oscillation(k, mean, amplitude, m);
  };
  const double lam = seq.lambda;
  const double Lam = seq.Lambda;
  seq.claimedWeakStarLimit = [mean, lam, Lam](MeshPtr m) {
    return constant_coefficient(mean, m, lam, Lam);
  };
  return seq;
}

CoefficientSequence make_checkerboard_sequence(double alpha, double beta,
                                               std::size_t baseCells) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw std::invalid_argument("checkerboard values must be positive");
  }
  if (baseCells < 2) {
    throw std::invalid_argument("baseCells must be >= 2");
  }
  CoefficientSequence seq;
  seq.familyTag = "product-checkerboard";
  seq.lambda = std::min(alpha, beta);
  seq.Lambda = std::max(alpha, beta);
  seq.meshCellsForIndex = [baseCells](std::size_t k) {
    require_index(k);
    const std::size_t raw = std::max<std::size_t>(baseCells, 16 * k);
    return round_up_multiple(raw, 2 * k);
  };
  seq.generator = [alpha, beta](std::size_t k, MeshPtr m) {
    return gen_product_checkerboard(k, alpha, beta, m);
  };
  const double mean = 0.5 * (alpha + beta);
  const double lam = seq.lambda;
  const double Lam = seq.Lambda;
  seq.claimedWeakStarLimit = [mean, lam, Lam](MeshPtr m) {
    return constant_coefficient(mean, m, lam, Lam);
  };
  return seq;
}

CoefficientSequence make_constant_sequence(double value, double lambda,
                                           double Lambda,
                                           std::size_t baseCells) {
  if (!(lambda > 0.0) || !(lambda <= value) || !(value <= Lambda)) {
    throw std::invalid_argument(
        "constant sequence needs 0 < lambda <= value <= Lambda");
  }
  if (baseCells < 2) {
    throw std::invalid_argument("baseCells must be >= 2");
  }
  CoefficientSequence seq;
  seq.familyTag = "constant";
  seq.lambda = lambda;
  seq.Lambda = Lambda;
  seq.meshCellsForIndex = [baseCells](std::size_t k) {
    require_index(k);
    return baseCells;
  };
  seq.generator = [value, lambda, Lambda](std::size_t k, MeshPtr m) {
    require_index(k);
    return constant_coefficient(value, m, lambda, Lambda);
  };
  seq.claimedWeakStarLimit = [value, lambda, Lambda](MeshPtr m) {
    return constant_coefficient(value, m, lambda, Lambda);
  };
  return seq;
}

TestSuite make_default_suite(std::size_t J, std::size_t M) {
  if (J < 4 || M < 4) {
    throw std::invalid_argument(
        "default suite needs at least 4 members per family");
  }
  TestSuite suite;
  for (std::size_t j = 1; j <= J; ++j) {
    const double freq = static_cast<double>(j) * kPi;
    suite.stateTests.push_back(
        [freq](double x) { return std::sin(freq * x); });
  }
  // Symmetric windows first (they feed the div-curl products), then
  // antisymmetric ones (they see the flux, which is odd under swapping).
  const std::size_t mSym = M / 2;
  for (std::size_t m = 1; m <= mSym; ++m) {
    const double freq = static_cast<double>(m) * kPi;
    suite.productTests.push_back([freq](double x, double y) {
      return std::cos(freq * x) * std::cos(freq * y);
    });
  }
  for (std::size_t m = 1; m <= M - mSym; ++m) {
    const double freq = static_cast<double>(m) * kPi;
    suite.productTests.push_back([freq](double x, double y) {
      return 0.5 * std::sin(freq * (x - y));
    });
  }
  suite.coefficientTests.push_back([](double, double) { return 1.0; });
  suite.coefficientTests.push_back(
      [](double x, double y) { return 0.5 * (x + y); });
  suite.coefficientTests.push_back([](double x, double y) { return x * y; });
  suite.coefficientTests.push_back(
      [](double x, double y) { return (x - y) * (x - y); });
  suite.coefficientTests.push_back([](double x, double y) {
    const double dx = x - 0.5;
    const double dy = y - 0.5;
    return std::exp(-(dx * dx + dy * dy) / 0.02);
  });
  suite.coefficientTests.push_back([](double x, double y) {
    auto g = [](double t) {
      return std::exp(-(t - 0.3) * (t - 0.3) / 0.01);
    };
    auto h = [](double t) {
      return std::exp(-(t - 0.7) * (t - 0.7) / 0.01);
    };
    return 0.5 * (g(x) * h(y) + g(y) * h(x));
  });
  return suite;
}

double lp_norm(const ScalarField& u, double p, const QuadGrids& grids) {
  if (!(p >= 1.0)) {
    throw std::invalid_argument("lp_norm needs p >= 1");
  }
  require_field_on_grid(u, grids, "lp_norm");
  const LineQuadrature& line = grids.line;
  double acc = 0.0;
  for (std::size_t i = 0; i < line.x.size(); ++i) {
    acc += line.w[i] * std::pow(std::abs(u.eval(line.x[i])), p);
  }
  return std::pow(acc, 1.0 / p);
}

double lp_distance(const ScalarField& u, const ScalarField& v, double p,
                   const QuadGrids& grids) {
  if (!(p >= 1.0)) {
    throw std::invalid_argument("lp_distance needs p >= 1");
  }
  require_field_on_grid(u, grids, "lp_distance");
  require_field_on_grid(v, grids, "lp_distance");
  const LineQuadrature& line = grids.line;
  double acc = 0.0;
  for (std::size_t i = 0; i < line.x.size(); ++i) {
    const double d = u.eval(line.x[i]) - v.eval(line.x[i]);
    acc += line.w[i] * std::pow(std::abs(d), p);
  }
  return std::pow(acc, 1.0 / p);
}

double weak_star_gap(const Coefficient& aK, const Coefficient& aLimit,
                     const TestSuite& suite, const QuadGrids& grids) {
  require_suite(suite);
  if (!aK.mesh || !aLimit.mesh || !same_mesh(*aK.mesh, grids.mesh()) ||
      !same_mesh(*aLimit.mesh, grids.mesh())) {
    throw std::invalid_argument(
        "weak_star_gap: coefficients must live on the grid's mesh");
  }
  double worst = 0.0;
  for (const auto& psi : suite.coefficientTests) {
    const double gap = std::abs(coefficient_pairing(aK, psi, grids) -
                                coefficient_pairing(aLimit, psi, grids));
    worst = std::max(worst, gap);
  }
  return worst;
}

double div_curl_check(const ScalarField& uK, const ProductField& qK,
                      const ScalarField& uLim, const ProductField& qLim,
                      const TestSuite& suite, const FracParams& params,
                      const QuadGrids& grids) {
  require_suite(suite);
  require_field_on_grid(uK, grids, "div_curl_check");
  require_field_on_grid(uLim, grids, "div_curl_check");
  const ProductField DuK = gradient_field(uK, params, grids);
  const ProductField DuLim = gradient_field(uLim, params, grids);
  double worst = 0.0;
  for (const auto& phi : suite.productTests) {
    const ProductField window = sample_product_function(phi, grids);
    const double gap = std::abs(triple_pairing(window, qK, DuK, grids) -
                                triple_pairing(window, qLim, DuLim, grids));
    worst = std::max(worst, gap);
  }
  return worst;
}

HReport run_h_experiment(const CoefficientSequence& seq,
                         const std::vector<std::size_t>& kList,
                         const Density& f, const FracParams& params,
                         const QuadratureRule& rule, const Regularization& reg,
                         double tol, const TestSuite& suite) {
  require_suite(suite);
  if (kList.empty()) {
    throw std::invalid_argument("run_h_experiment: kList must not be empty");
  }
  if (!(tol > 0.0)) {
    throw std::invalid_argument("run_h_experiment: tolerance must be > 0");
  }
  if (!seq.meshCellsForIndex || !seq.generator || !seq.claimedWeakStarLimit) {
    throw std::invalid_argument(
        "run_h_experiment: sequence is missing a generator, resolution rule, "
        "or claimed limit");
  }

  std::vector<std::size_t> cells(kList.size());
  std::size_t finest = 0;
  for (std::size_t i = 0; i < kList.size(); ++i) {
    cells[i] = seq.meshCellsForIndex(kList[i]);
    finest = std::max(finest, cells[i]);
  }
  for (std::size_t i = 0; i < kList.size(); ++i) {
    if (finest % cells[i] != 0) {
      throw std::invalid_argument(
          "run_h_experiment: meshes are not nested (nCells=" +
          std::to_string(cells[i]) + " at k=" + std::to_string(kList[i]) +
          " does not divide the finest " + std::to_string(finest) + ")");
    }
  }

  const MeshPtr fineMesh = build_mesh(finest);
  const QuadGrids fineGrids = make_grids(fineMesh, rule);

  const Coefficient aLim = seq.claimedWeakStarLimit(fineMesh);
  Solution solLim;
  try {
    solLim = solve(aLim, f, params, fineGrids, reg, tol);
  } catch (const SolveFailure& e) {
    throw SolveFailure(std::string("limit problem failed to solve: ") +
                       e.what());
  }

  HReport report;
  report.maxEnvelopeUlp = flux_envelope_margin_ulp(
      solLim.flux, solLim.state, aLim, params, fineGrids);
  report.limitEnergy =
      energy_quadratic_part(aLim, solLim.state, params, fineGrids);
  report.limitStateNorm = lp_norm(solLim.state, params.p, fineGrids);
  report.gapFloor =
      kGapFloorFactor * tol * std::max(1.0, std::abs(report.limitEnergy));

  // Cache the limit-side pairings once: every per-index gap is a difference
  // against these values, evaluated through the very same code paths.
  const ProductField DuLim = gradient_field(solLim.state, params, fineGrids);
  std::vector<ProductField> windows;
  windows.reserve(suite.productTests.size());
  for (const auto& phi : suite.productTests) {
    windows.push_back(sample_product_function(phi, fineGrids));
  }
  std::vector<double> fluxLim(windows.size());
  std::vector<double> divCurlLim(windows.size());
  for (std::size_t m = 0; m < windows.size(); ++m) {
    fluxLim[m] = product_pairing(windows[m], solLim.flux, fineGrids);
    divCurlLim[m] = triple_pairing(windows[m], solLim.flux, DuLim, fineGrids);
  }
  std::vector<double> coeffLim(suite.coefficientTests.size());
  for (std::size_t r = 0; r < suite.coefficientTests.size(); ++r) {
    coeffLim[r] =
        coefficient_pairing(aLim, suite.coefficientTests[r], fineGrids);
  }
  const std::vector<double> uLimLine = line_values(solLim.state, fineGrids.line);
  std::vector<std::vector<double>> stateTestLine(suite.stateTests.size());
  for (std::size_t j = 0; j < suite.stateTests.size(); ++j) {
    stateTestLine[j].resize(fineGrids.line.x.size());
    for (std::size_t i = 0; i < fineGrids.line.x.size(); ++i) {
      stateTestLine[j][i] = suite.stateTests[j](fineGrids.line.x[i]);
    }
  }

  report.rows.reserve(kList.size());
  for (std::size_t i = 0; i < kList.size(); ++i) {
    const std::size_t k = kList[i];
    const MeshPtr meshK = build_mesh(cells[i]);
    const QuadGrids gridsK = make_grids(meshK, rule);
    const Coefficient aK = seq.generator(k, meshK);

    Solution solK;
    try {
      solK = solve(aK, f, params, gridsK, reg, tol);
    } catch (const SolveFailure& e) {
      throw SolveFailure("sequence index k=" + std::to_string(k) +
                         " failed to solve: " + e.what());
    }
    report.maxEnvelopeUlp = std::max(
        report.maxEnvelopeUlp,
        flux_envelope_margin_ulp(solK.flux, solK.state, aK, params, gridsK));

    const ScalarField ueK = embed_state(solK.state, fineMesh);
    const Coefficient aeK = embed_coefficient(aK, fineMesh);
    const ProductField qK = compute_flux(aeK, ueK, params, fineGrids);
    const ProductField DuK = gradient_field(ueK, params, fineGrids);

    HRecord row;
    row.k = k;
    row.nCells = cells[i];
    row.solveIterations = solK.report.iterations;

    const std::vector<double> uKLine = line_values(ueK, fineGrids.line);
    double stateWeak = 0.0;
    for (std::size_t j = 0; j < stateTestLine.size(); ++j) {
      double acc = 0.0;
      for (std::size_t q = 0; q < uKLine.size(); ++q) {
        acc += fineGrids.line.w[q] * (uKLine[q] - uLimLine[q]) *
               stateTestLine[j][q];
      }
      stateWeak = std::max(stateWeak, std::abs(acc));
    }
    row.stateWeakGap = stateWeak;

    double strongAcc = 0.0;
    for (std::size_t q = 0; q < uKLine.size(); ++q) {
      strongAcc += fineGrids.line.w[q] *
                   std::pow(std::abs(uKLine[q] - uLimLine[q]), params.p);
    }
    row.stateStrongGap = std::pow(strongAcc, 1.0 / params.p);

    double fluxWeak = 0.0;
    double divCurl = 0.0;
    for (std::size_t m = 0; m < windows.size(); ++m) {
      fluxWeak = std::max(
          fluxWeak,
          std::abs(product_pairing(windows[m], qK, fineGrids) - fluxLim[m]));
      divCurl = std::max(
          divCurl, std::abs(triple_pairing(windows[m], qK, DuK, fineGrids) -
                            divCurlLim[m]));
    }
    row.fluxWeakGap = fluxWeak;
    row.divCurlGap = divCurl;

    double coeffGap = 0.0;
    for (std::size_t r = 0; r < suite.coefficientTests.size(); ++r) {
      coeffGap = std::max(
          coeffGap,
          std::abs(
              coefficient_pairing(aeK, suite.coefficientTests[r], fineGrids) -
              coeffLim[r]));
    }
    row.coeffWeakStarGap = coeffGap;

    row.energyGap = std::abs(
        energy_quadratic_part(aeK, ueK, params, fineGrids) -
        report.limitEnergy);

    report.rows.push_back(row);
  }
  return report;
}

bool trend_ok(const std::vector<double>& vals, double gapFloor) {
  if (vals.size() <= 1) {
    return true;
  }
  const bool allBelowFloor =
      std::all_of(vals.begin(), vals.end(),
                  [gapFloor](double v) { return v <= gapFloor; });
  if (allBelowFloor) {
    return true;
  }
  const double slack = kTrendSlackRel * std::max(1.0, vals.front());
  const std::size_t mid = (vals.size() - 1) / 2;
  for (std::size_t i = mid + 1; i < vals.size(); ++i) {
    if (vals[i] > vals[i - 1] + slack) {
      return false;
    }
  }
  return vals.back() <= kTrendFinalOverInitial * vals.front() ||
         vals.back() <= gapFloor;
}

bool energy_continuity_check(const HReport& report) {
  std::vector<double> col;
  col.reserve(report.rows.size());
  for (const auto& row : report.rows) {
    col.push_back(row.energyGap);
  }
  return trend_ok(col, report.gapFloor);
}

bool sufficiency_check(const HReport& report) {
  std::vector<double> strongCol, fluxCol, energyCol, divCurlCol;
  for (const auto& row : report.rows) {
    strongCol.push_back(row.stateStrongGap);
    fluxCol.push_back(row.fluxWeakGap);
    energyCol.push_back(row.energyGap);
    divCurlCol.push_back(row.divCurlGap);
  }
  return trend_ok(strongCol, report.gapFloor) &&
         trend_ok(fluxCol, report.gapFloor) &&
         trend_ok(energyCol, report.gapFloor) &&
         trend_ok(divCurlCol, report.gapFloor);
}

bool g_equals_h_check(const HReport& report, double tolFactor) {
  const auto& rows = report.rows;
  if (rows.size() <= 1) {
    return true;
  }
  const double floorVal = report.gapFloor;
  const double s0 = std::max(rows.front().stateWeakGap, floorVal);
  const double f0 = std::max(rows.front().fluxWeakGap, floorVal);
  for (const auto& row : rows) {
    if (row.fluxWeakGap <= floorVal) {
      // A flux gap at numerical zero has converged as far as it can; it
      // cannot lag the state column no matter how the states move.
      continue;
    }
    const double sRel = std::max(row.stateWeakGap, floorVal) / s0;
    const double fRel = row.fluxWeakGap / f0;
    if (fRel > tolFactor * sRel) {
      return false;
    }
  }
  return true;
}

NecessityResult necessity_check(const Density& f, const FracParams& params,
                                const QuadratureRule& rule,
                                const Regularization& reg, double tol,
                                std::size_t nCells) {
  const MeshPtr mesh = build_mesh(nCells);
  const QuadGrids grids = make_grids(mesh, rule);
  const CoefficientSequence seq = gen_non_converging_alternator(mesh);
  const Coefficient aOdd = seq.generator(1, mesh);
  const Coefficient aEven = seq.generator(2, mesh);
  const Solution solOdd = solve(aOdd, f, params, grids, reg, tol);
  const Solution solEven = solve(aEven, f, params, grids, reg, tol);
  NecessityResult result;
  result.separation =
      lp_distance(solOdd.state, solEven.state, params.p, grids);
  result.referenceNorm = lp_norm(solOdd.state, params.p, grids);
  result.noHLimit = result.separation >= 0.1 * result.referenceNorm;
  return result;
}

ContrastResult checkerboard_contrast(double alpha, double beta, std::size_t K,
                                     const Density& f, const FracParams& params,
                                     const QuadratureRule& rule,
                                     const Regularization& reg, double tol,
                                     std::size_t baseCells) {
  if (alpha == beta) {
    throw std::invalid_argument(
        "checkerboard contrast needs alpha != beta to separate the means");
  }
  const CoefficientSequence seq =
      make_checkerboard_sequence(alpha, beta, baseCells);
  const std::size_t nCells = seq.meshCellsForIndex(K);
  const MeshPtr mesh = build_mesh(nCells);
  const QuadGrids grids = make_grids(mesh, rule);
  const Coefficient aK = seq.generator(K, mesh);
  const double arith = 0.5 * (alpha + beta);
  const double harm = 2.0 * alpha * beta / (alpha + beta);
  const Coefficient aArith =
      constant_coefficient(arith, mesh, seq.lambda, seq.Lambda);
  const Coefficient aHarm =
      constant_coefficient(harm, mesh, seq.lambda, seq.Lambda);

  const Solution solK = solve(aK, f, params, grids, reg, tol);
  const Solution solArith = solve(aArith, f, params, grids, reg, tol);
  const Solution solHarm = solve(aHarm, f, params, grids, reg, tol);

  ContrastResult result;
  result.separation =
      lp_distance(solArith.state, solHarm.state, params.p, grids);
  if (!(result.separation > 0.0)) {
    throw std::invalid_argument(
        "checkerboard contrast: mean states coincide, ratios undefined");
  }
  result.arithRatio =
      lp_distance(solK.state, solArith.state, params.p, grids) /
      result.separation;
  result.harmRatio = lp_distance(solK.state, solHarm.state, params.p, grids) /
                     result.separation;
  result.meansDiscriminated =
      result.arithRatio <= 0.1 && result.harmRatio >= 0.5;
  return result;
}

}  // namespace nlhom
