#pragma once

// Polarization qubit algebra: canonical kets, Bell states, Pauli operators and
// the scalar figures of merit used throughout the analysis chain.
//
// Phase convention (fixed for the whole library):
//   |P> = (|H> + |V>)/sqrt2  -> Bloch +x
//   |R> = (|H> + i|V>)/sqrt2 -> Bloch +y
//   |H>                      -> Bloch +z

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <string_view>
#include <utility>

namespace qtele {

using Complex = std::complex<double>;
using Matrix2c = Eigen::Matrix2cd;
using Vector2c = Eigen::Vector2cd;
using Vector4c = Eigen::Vector4cd;
using Vector3 = Eigen::Vector3d;

/// Single-photon polarization state alpha|H> + beta|V>. The global phase is
/// kept as given; compare rays with `same_ray`.
class PureState {
 public:
  /// Throws ValidationError unless |alpha|^2 + |beta|^2 = 1 within 1e-12.
  PureState(Complex alpha, Complex beta);

  /// Rescales (alpha, beta) to unit norm; throws on the zero vector.
  static PureState normalized(Complex alpha, Complex beta);

  static PureState H();
  static PureState V();
  static PureState P();
  static PureState M();
  static PureState R();
  static PureState L();

  /// Parses one of "H", "V", "P", "M", "R", "L".
  static PureState named(std::string_view name);

  Complex alpha() const { return alpha_; }
  Complex beta() const { return beta_; }
  Vector2c ket() const { return Vector2c(alpha_, beta_); }
  Matrix2c projector() const;

  /// |<this|other>|^2.
  double overlap(const PureState& other) const;
  bool same_ray(const PureState& other, double tol = 1e-10) const {
    return overlap(other) >= 1.0 - tol;
  }

 private:
  Complex alpha_;
  Complex beta_;
};

/// Canonical name of `s` if it is one of the six basis states (up to phase),
/// otherwise an empty view.
std::string_view state_name(const PureState& s);

/// 2x2 Hermitian, positive semidefinite, unit-trace matrix.
class DensityMatrix {
 public:
  static constexpr double kTolerance = 1e-10;

  /// Throws ValidationError when any invariant fails by more than 1e-10.
  explicit DensityMatrix(const Matrix2c& entries);

  static DensityMatrix pure(const PureState& s);
  static DensityMatrix maximally_mixed();

  const Matrix2c& matrix() const { return entries_; }

 private:
  Matrix2c entries_;
};

enum class BellState { PsiMinus, PsiPlus, PhiPlus, PhiMinus };

/// Two-qubit vector in the product basis {HH, HV, VH, VV}.
Vector4c bell_vector(BellState b);

/// Reduced state of a two-qubit pure state; `keep` selects qubit 0 or 1.
Matrix2c partial_trace(const Vector4c& psi, int keep);

enum class Basis { HV, PM, RL };

/// Orthonormal (+, -) pair of the basis: (H,V), (P,M), (R,L).
std::pair<PureState, PureState> basis_states(Basis b);
std::string_view basis_name(Basis b);
Basis parse_basis(std::string_view name);
inline constexpr std::array<Basis, 3> kAllBases{Basis::HV, Basis::PM,
                                                Basis::RL};

/// sigma_0 (identity) through sigma_3.
const Matrix2c& pauli(int index);

/// <ideal|rho|ideal>.
double fidelity(const PureState& ideal, const DensityMatrix& rho);

/// 2f - 1. Throws ValidationError for f outside [0, 1].
double visibility(double f);

/// (V + 1)/2, the inverse of `visibility`.
double fidelity_from_visibility(double v);

/// tr(rho^2).
double purity(const DensityMatrix& rho);

Vector3 bloch_vector(const DensityMatrix& rho);

/// Inverse of `bloch_vector`; rejects |r| > 1 + 1e-9.
DensityMatrix from_bloch_vector(const Vector3& r);

/// Half the trace norm of the difference.
double trace_distance(const DensityMatrix& a, const DensityMatrix& b);

/// exp(i theta/2 n.sigma) for a unit axis n.
Matrix2c rotation(const Vector3& axis, double theta);

}  // namespace qtele
