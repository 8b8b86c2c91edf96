#pragma once

// Single-qubit state tomography by maximum likelihood and analytic process
// tomography from the four probe states H, V, P, R.

#include <array>
#include <iosfwd>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "qtele/qstate.hpp"

namespace qtele {

using Matrix4c = Eigen::Matrix4cd;

/// (n_plus, n_minus) per basis, indexed by Basis.
struct TomographyCounts {
  std::array<std::array<std::uint64_t, 2>, 3> n{};

  std::array<std::uint64_t, 2>& operator[](Basis b) {
    return n[static_cast<std::size_t>(b)];
  }
  const std::array<std::uint64_t, 2>& operator[](Basis b) const {
    return n[static_cast<std::size_t>(b)];
  }
  std::uint64_t total() const;
};

/// CSV with header `basis,n_plus,n_minus`, one row per basis present.
/// Reading skips '#' lines and rejects repeated or unknown bases.
void write_counts_csv(std::ostream& os, const TomographyCounts& counts);
TomographyCounts read_counts_csv(std::istream& is);

struct MleOptions {
  /// Stop once the mean log-likelihood per count improves by less than this.
  double tolerance = 1e-10;
  int max_iterations = 10000;
};

struct MleResult {
  DensityMatrix rho = DensityMatrix::maximally_mixed();
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0.0;
  double gradient_norm = 0.0;
};

/// Maximizes the product of per-basis binomial likelihoods over physical
/// states rho = T'T / tr(T'T), T lower triangular. Starts at I/2 and runs
/// BFGS with backtracking. Throws ValidationError when every count is zero.
MleResult mle_state(const TomographyCounts& counts, const MleOptions& options = {});

/// chi in the Pauli basis: E(rho) = sum_mn chi(m, n) sigma_m rho sigma_n.
class ProcessMatrix {
 public:
  static constexpr double kTolerance = 1e-8;

  /// Throws ValidationError unless chi is Hermitian, unit trace and PSD
  /// within 1e-8.
  explicit ProcessMatrix(const Matrix4c& chi);

  static ProcessMatrix identity();

  const Matrix4c& chi() const { return chi_; }

 private:
  Matrix4c chi_;
};

/// The four probe inputs in their fixed order.
inline const std::array<PureState, 4>& probe_states() {
  static const std::array<PureState, 4> probes{PureState::H(), PureState::V(),
                                               PureState::P(), PureState::R()};
  return probes;
}

struct ProcessReconstruction {
  Matrix4c raw;             ///< direct linear solve, may be unphysical
  ProcessMatrix projected;  ///< eigenvalues clipped at 0, trace renormalized
};

/// `inputs` must be H, V, P, R in that order (up to global phase).
ProcessReconstruction process_from_pairs(std::span<const PureState, 4> inputs,
                                         std::span<const DensityMatrix, 4> outputs);

/// Same reconstruction from arbitrary 2x2 output operators (no validation of
/// the outputs). Used for the raw solve and by tests on exact channels.
Matrix4c chi_from_outputs(std::span<const Matrix2c, 4> outputs);

/// Nearest valid process matrix by eigenvalue clipping.
ProcessMatrix project_chi(const Matrix4c& raw);

/// tr(chi_ideal chi), real part.
double process_fidelity(const ProcessMatrix& chi, const ProcessMatrix& ideal);

/// E(op) for the channel described by chi.
Matrix2c apply_process(const Matrix4c& chi, const Matrix2c& op);

struct BlochAffineMap {
  Eigen::Matrix3d M = Eigen::Matrix3d::Identity();
  Vector3 c = Vector3::Zero();

  Vector3 operator()(const Vector3& r) const { return M * r + c; }
};

BlochAffineMap bloch_map(const ProcessMatrix& chi);

/// `n` points spread evenly over the unit sphere (Fibonacci lattice), pushed
/// through `map`.
std::vector<Vector3> deformed_sphere(const BlochAffineMap& map, std::size_t n);

}  // namespace qtele
