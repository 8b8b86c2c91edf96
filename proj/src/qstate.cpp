#include "qtele/qstate.hpp"

#include <cmath>
#include <string>

#include "qtele/errors.hpp"

namespace qtele {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
const Complex kI{0.0, 1.0};

}  // namespace

PureState::PureState(Complex alpha, Complex beta) : alpha_(alpha), beta_(beta) {
  const double n = std::norm(alpha) + std::norm(beta);
  if (!(std::abs(n - 1.0) <= 1e-12)) {
    throw ValidationError("PureState: |alpha|^2 + |beta|^2 = " +
                          std::to_string(n) + ", expected 1");
  }
}

PureState PureState::normalized(Complex alpha, Complex beta) {
  const double n = std::sqrt(std::norm(alpha) + std::norm(beta));
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw ValidationError("PureState: cannot normalize the zero vector");
  }
  return PureState(alpha / n, beta / n);
}

PureState PureState::H() { return PureState(1.0, 0.0); }
PureState PureState::V() { return PureState(0.0, 1.0); }
PureState PureState::P() { return PureState(kInvSqrt2, kInvSqrt2); }
PureState PureState::M() { return PureState(kInvSqrt2, -kInvSqrt2); }
PureState PureState::R() { return PureState(kInvSqrt2, kI * kInvSqrt2); }
PureState PureState::L() { return PureState(kInvSqrt2, -kI * kInvSqrt2); }

PureState PureState::named(std::string_view name) {
  if (name == "H") return H();
  if (name == "V") return V();
  if (name == "P") return P();
  if (name == "M") return M();
  if (name == "R") return R();
  if (name == "L") return L();
  throw ValidationError("unknown polarization state '" + std::string(name) +
                        "' (expected H, V, P, M, R or L)");
}

Matrix2c PureState::projector() const {
  const Vector2c k = ket();
  return k * k.adjoint();
}

double PureState::overlap(const PureState& other) const {
  return std::norm(std::conj(alpha_) * other.alpha_ +
                   std::conj(beta_) * other.beta_);
}

std::string_view state_name(const PureState& s) {
  static constexpr std::array<std::string_view, 6> kNames{"H", "V", "P",
                                                          "M", "R", "L"};
  for (auto name : kNames) {
    if (s.same_ray(PureState::named(name))) return name;
  }
  return {};
}

DensityMatrix::DensityMatrix(const Matrix2c& entries) : entries_(entries) {
  if (!entries_.allFinite()) {
    throw ValidationError("DensityMatrix: non-finite entries");
  }
  if ((entries_ - entries_.adjoint()).cwiseAbs().maxCoeff() > kTolerance) {
    throw ValidationError("DensityMatrix: not Hermitian");
  }
  const Complex tr = entries_.trace();
  if (std::abs(tr - 1.0) > kTolerance) {
    throw ValidationError("DensityMatrix: trace " + std::to_string(tr.real()) +
                          ", expected 1");
  }
  Eigen::SelfAdjointEigenSolver<Matrix2c> eig(entries_,
                                              Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -kTolerance) {
    throw ValidationError("DensityMatrix: negative eigenvalue " +
                          std::to_string(eig.eigenvalues().minCoeff()));
  }
}

DensityMatrix DensityMatrix::pure(const PureState& s) {
  return DensityMatrix(s.projector());
}

DensityMatrix DensityMatrix::maximally_mixed() {
  return DensityMatrix(Matrix2c::Identity() * 0.5);
}

Vector4c bell_vector(BellState b) {
  Vector4c v = Vector4c::Zero();
  switch (b) {
    case BellState::PsiMinus:
      v << 0.0, kInvSqrt2, -kInvSqrt2, 0.0;
      break;
    case BellState::PsiPlus:
      v << 0.0, kInvSqrt2, kInvSqrt2, 0.0;
      break;
    case BellState::PhiPlus:
      v << kInvSqrt2, 0.0, 0.0, kInvSqrt2;
      break;
    case BellState::PhiMinus:
      v << kInvSqrt2, 0.0, 0.0, -kInvSqrt2;
      break;
  }
  return v;
}

Matrix2c partial_trace(const Vector4c& psi, int keep) {
  if (keep != 0 && keep != 1) {
    throw ValidationError("partial_trace: keep must be 0 or 1");
  }
  // psi index = 2*q0 + q1
  Matrix2c out = Matrix2c::Zero();
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < 2; ++k) {
        const int a = keep == 0 ? 2 * i + k : 2 * k + i;
        const int b = keep == 0 ? 2 * j + k : 2 * k + j;
        out(i, j) += psi(a) * std::conj(psi(b));
      }
    }
  }
  return out;
}

std::pair<PureState, PureState> basis_states(Basis b) {
  switch (b) {
    case Basis::HV:
      return {PureState::H(), PureState::V()};
    case Basis::PM:
      return {PureState::P(), PureState::M()};
    case Basis::RL:
      return {PureState::R(), PureState::L()};
  }
  throw LogicError("basis_states: bad basis");
}

std::string_view basis_name(Basis b) {
  switch (b) {
    case Basis::HV:
      return "HV";
    case Basis::PM:
      return "PM";
    case Basis::RL:
      return "RL";
  }
  return "?";
}

Basis parse_basis(std::string_view name) {
  if (name == "HV") return Basis::HV;
  if (name == "PM") return Basis::PM;
  if (name == "RL") return Basis::RL;
  throw ValidationError("unknown basis '" + std::string(name) +
                        "' (expected HV, PM or RL)");
}

const Matrix2c& pauli(int index) {
  static const std::array<Matrix2c, 4> kPauli = [] {
    std::array<Matrix2c, 4> s;
    s[0] << 1, 0, 0, 1;
    s[1] << 0, 1, 1, 0;
    s[2] << 0, -kI, kI, 0;
    s[3] << 1, 0, 0, -1;
    return s;
  }();
  if (index < 0 || index > 3) throw ValidationError("pauli: index not in 0..3");
  return kPauli[static_cast<std::size_t>(index)];
}

double fidelity(const PureState& ideal, const DensityMatrix& rho) {
  const Vector2c k = ideal.ket();
  return (k.adjoint() * rho.matrix() * k)(0, 0).real();
}

double visibility(double f) {
  if (!(f >= 0.0 && f <= 1.0)) {
    throw ValidationError("visibility: fidelity " + std::to_string(f) +
                          " outside [0, 1]");
  }
  return 2.0 * f - 1.0;
}

double fidelity_from_visibility(double v) {
  if (!(v >= -1.0 && v <= 1.0)) {
    throw ValidationError("fidelity_from_visibility: visibility outside [-1, 1]");
  }
  return 0.5 * (v + 1.0);
}

double purity(const DensityMatrix& rho) {
  return (rho.matrix() * rho.matrix()).trace().real();
}

Vector3 bloch_vector(const DensityMatrix& rho) {
  Vector3 r;
  for (int i = 0; i < 3; ++i) {
    r(i) = (rho.matrix() * pauli(i + 1)).trace().real();
  }
  return r;
}

DensityMatrix from_bloch_vector(const Vector3& r) {
  if (!r.allFinite() || r.norm() > 1.0 + 1e-9) {
    throw ValidationError("from_bloch_vector: |r| exceeds 1");
  }
  Matrix2c m = pauli(0);
  for (int i = 0; i < 3; ++i) m += r(i) * pauli(i + 1);
  m *= 0.5;
  if (r.norm() > 1.0) {
    // Clamp the tolerated overshoot back onto the sphere.
    m = 0.5 * (pauli(0) + (r(0) * pauli(1) + r(1) * pauli(2) +
                           r(2) * pauli(3)) / r.norm());
  }
  return DensityMatrix(m);
}

double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  Eigen::SelfAdjointEigenSolver<Matrix2c> eig(a.matrix() - b.matrix(),
                                              Eigen::EigenvaluesOnly);
  return 0.5 * eig.eigenvalues().cwiseAbs().sum();
}

Matrix2c rotation(const Vector3& axis, double theta) {
  const double n = axis.norm();
  if (!(n > 0.0)) throw ValidationError("rotation: zero axis");
  const Vector3 u = axis / n;
  const Matrix2c ns = u(0) * pauli(1) + u(1) * pauli(2) + u(2) * pauli(3);
  return std::cos(theta / 2) * pauli(0) + kI * std::sin(theta / 2) * ns;
}

}  // namespace qtele
