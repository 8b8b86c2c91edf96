#pragma once

#include <cmath>
#include <complex>
#include <random>

#include "qtele/qstate.hpp"

namespace test {

using qtele::Complex;

// Haar-random pure qubit from a normalized complex Gaussian vector.
inline qtele::PureState haar_state(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return qtele::PureState::normalized(Complex(n(rng), n(rng)), Complex(n(rng), n(rng)));
}

// Uniform point in the unit Bloch ball.
inline qtele::DensityMatrix random_mixed(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  qtele::Vector3 r(n(rng), n(rng), n(rng));
  r *= std::cbrt(u(rng)) / r.norm();
  return qtele::from_bloch_vector(r);
}

// Plain 2x2 matrix from row-major entries; keeps oracles independent of the
// library's own constructors.
inline qtele::Matrix2c m2(Complex a, Complex b, Complex c, Complex d) {
  qtele::Matrix2c m;
  m << a, b, c, d;
  return m;
}

inline double max_abs(const qtele::Matrix2c& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace test
