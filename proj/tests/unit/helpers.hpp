#pragma once

#include <cstdint>
#include <random>

#include "hnbr/model.hpp"
#include "hnbr/rng.hpp"
#include "hnbr/simulate.hpp"

namespace hnbr::fixtures {

/// Small random dataset with N(0,1) design and responses drawn at `truth`.
inline Dataset random_dataset(Index n, const Coefficients& truth, std::uint64_t seed) {
  Rng rng = make_stream(seed, 99);
  return generate_dataset(n, truth, 0.0, rng);
}

inline Coefficients random_coefficients(Index p, double scale, Rng& rng) {
  std::normal_distribution<double> z(0.0, scale);
  Coefficients c = Coefficients::zeros(p);
  for (Index j = 0; j < p; ++j) {
    c.theta1[j] = z(rng);
    c.theta2[j] = z(rng);
  }
  return c;
}

}  // namespace hnbr::fixtures
