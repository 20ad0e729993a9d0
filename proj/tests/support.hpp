#ifndef NLHOM_TESTS_SUPPORT_HPP
#define NLHOM_TESTS_SUPPORT_HPP

#include <cstdint>
#include <cstdlib>
#include <random>

#include "nlhom/mesh_fields.hpp"

namespace nlhom::testing {

// Property-test seed; override with the NLHOM_TEST_SEED environment variable
// to reproduce a failure from a different run.
inline std::uint64_t test_seed() {
  if (const char* env = std::getenv("NLHOM_TEST_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return 0x5eed0001ULL;
}

// Uniform draw in [-1, 1) from raw generator bits, identical on every
// platform (distribution classes are not pinned by the standard).
inline double uniform_pm(std::mt19937_64& rng) {
  return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
}

inline ScalarField random_state(MeshPtr mesh, std::mt19937_64& rng,
                                double amp = 1.0) {
  ScalarField u = make_zero_state(mesh);
  for (std::size_t i = 1; i + 1 < u.nodalValues.size(); ++i) {
    u.nodalValues[i] = amp * uniform_pm(rng);
  }
  return u;
}

}  // namespace nlhom::testing

#endif
