#include <doctest.h>

#include <random>
#include <sstream>

#include "qtele/errors.hpp"
#include "qtele/tomography.hpp"
#include "support.hpp"

using namespace qtele;

namespace {

TomographyCounts counts(std::uint64_t hp, std::uint64_t hm, std::uint64_t pp, std::uint64_t pm,
                        std::uint64_t rp, std::uint64_t rm) {
  TomographyCounts c;
  c[Basis::HV] = {hp, hm};
  c[Basis::PM] = {pp, pm};
  c[Basis::RL] = {rp, rm};
  return c;
}

TomographyCounts sample_counts(const DensityMatrix& rho, std::uint64_t n, std::mt19937_64& rng) {
  TomographyCounts c;
  for (auto b : kAllBases) {
    const double p = fidelity(basis_states(b).first, rho);
    const auto k = std::binomial_distribution<std::uint64_t>(n, std::clamp(p, 0.0, 1.0))(rng);
    c[b] = {k, n - k};
  }
  return c;
}

using Kraus = std::vector<Matrix2c>;

// Random channel from a Haar-like isometry C^2 -> C^2 x C^r.
Kraus random_channel(std::mt19937_64& rng, int rank) {
  std::normal_distribution<double> g;
  Eigen::MatrixXcd G(2 * rank, 2);
  for (int i = 0; i < G.rows(); ++i) {
    for (int j = 0; j < 2; ++j) G(i, j) = Complex(g(rng), g(rng));
  }
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(G);
  const Eigen::MatrixXcd V = qr.householderQ() * Eigen::MatrixXcd::Identity(2 * rank, 2);
  Kraus ks;
  for (int k = 0; k < rank; ++k) ks.push_back(V.block(2 * k, 0, 2, 2));
  return ks;
}

Matrix2c act(const Kraus& ks, const Matrix2c& rho) {
  Matrix2c out = Matrix2c::Zero();
  for (const auto& k : ks) out += k * rho * k.adjoint();
  return out;
}

// chi_mn = sum_k c_km conj(c_kn) with K_k = sum_m c_km sigma_m.
Matrix4c chi_of(const Kraus& ks) {
  Matrix4c chi = Matrix4c::Zero();
  for (const auto& k : ks) {
    Vector4c c;
    for (int m = 0; m < 4; ++m) c(m) = 0.5 * (pauli(m) * k).trace();
    chi += c * c.adjoint();
  }
  return chi;
}

std::array<Matrix2c, 4> probe_outputs(const Kraus& ks) {
  std::array<Matrix2c, 4> out;
  for (int i = 0; i < 4; ++i) out[i] = act(ks, probe_states()[i].projector());
  return out;
}

ProcessReconstruction reconstruct(const Kraus& ks) {
  const auto outs = probe_outputs(ks);
  const std::array<DensityMatrix, 4> rhos{DensityMatrix(outs[0]), DensityMatrix(outs[1]),
                                          DensityMatrix(outs[2]), DensityMatrix(outs[3])};
  return process_from_pairs(std::span<const PureState, 4>(probe_states()),
                            std::span<const DensityMatrix, 4>(rhos));
}

Matrix4c diag4(double a, double b, double c, double d) {
  return Eigen::Vector4d(a, b, c, d).cast<Complex>().asDiagonal();
}

}  // namespace

TEST_SUITE("tomography") {

TEST_CASE("maximum-likelihood examples") {
  const auto h = mle_state(counts(1000, 0, 500, 500, 500, 500));
  CHECK(h.converged);
  CHECK(trace_distance(h.rho, DensityMatrix::pure(PureState::H())) < 1e-3);
  const auto mixed = mle_state(counts(500, 500, 500, 500, 500, 500));
  CHECK(trace_distance(mixed.rho, DensityMatrix::maximally_mixed()) < 1e-3);
  const auto p = mle_state(counts(500, 500, 1000, 0, 500, 500));
  CHECK(trace_distance(p.rho, DensityMatrix::pure(PureState::P())) < 1e-3);
  CHECK_THROWS_AS(mle_state(TomographyCounts{}), ValidationError);
}

TEST_CASE("interior estimates match linear inversion") {
  // r_i = (n+ - n-)/(n+ + n-) is physical here, so it is the likelihood maximum.
  const auto r = mle_state(counts(700, 300, 400, 600, 550, 450));
  const Vector3 expect(-0.2, 0.1, 0.4);
  CHECK((bloch_vector(r.rho) - expect).norm() < 1e-4);
}

TEST_CASE("estimates are always physical") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> n(0, 50);
  for (int k = 0; k < 200; ++k) {
    const auto c = counts(n(rng), n(rng), n(rng), n(rng), n(rng), n(rng));
    if (c.total() == 0) continue;
    const auto r = mle_state(c);
    CHECK_NOTHROW(DensityMatrix(r.rho.matrix()));
    CHECK(std::isfinite(r.log_likelihood));
  }
  // Partial data: a single basis still yields an estimate.
  const auto one = mle_state(counts(10, 0, 0, 0, 0, 0));
  CHECK(bloch_vector(one.rho)(2) > 0.99);
}

TEST_CASE("recovers random states from 10^4 counts per basis") {
  std::mt19937_64 rng(31);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const DensityMatrix rho = k % 2 ? test::random_mixed(rng) : DensityMatrix::pure(test::haar_state(rng));
    const auto r = mle_state(sample_counts(rho, 10000, rng));
    worst = std::max(worst, trace_distance(r.rho, rho));
  }
  CHECK(worst < 0.05);
}

TEST_CASE("process examples") {
  const auto id = reconstruct({Matrix2c::Identity()});
  CHECK((id.raw - diag4(1, 0, 0, 0)).norm() < 1e-10);
  CHECK(process_fidelity(id.projected, ProcessMatrix::identity()) == doctest::Approx(1.0));

  const auto flip = reconstruct({pauli(1)});
  CHECK(std::abs(flip.raw(1, 1) - 1.0) < 1e-10);
  CHECK((flip.raw - diag4(0, 1, 0, 0)).norm() < 1e-10);

  const auto deph = reconstruct({std::sqrt(0.5) * pauli(0), std::sqrt(0.5) * pauli(3)});
  CHECK((deph.raw - diag4(0.5, 0, 0, 0.5)).norm() < 1e-10);
  CHECK(process_fidelity(deph.projected, ProcessMatrix::identity()) == doctest::Approx(0.5));
}

TEST_CASE("random channels are recovered exactly") {
  std::mt19937_64 rng(41);
  for (int k = 0; k < 20; ++k) {
    const Kraus ks = random_channel(rng, 1 + k % 4);
    const Matrix4c truth = chi_of(ks);
    const auto rec = reconstruct(ks);
    CHECK((rec.raw - truth).norm() < 1e-8);
    CHECK((rec.projected.chi() - truth).norm() < 1e-8);
    // The channel acts as chi says on an arbitrary operator.
    const Matrix2c op = test::m2(0.3, Complex(0.1, -0.7), 2.0, -1.0);
    CHECK(test::max_abs(apply_process(truth, op) - act(ks, op)) < 1e-12);
    const double f = process_fidelity(rec.projected, rec.projected);
    CHECK(f >= (truth * truth).trace().real() - 1e-9);
    CHECK(f <= 1.0 + 1e-9);
    CHECK(process_fidelity(rec.projected, ProcessMatrix::identity()) >= -1e-12);
  }
}

TEST_CASE("random channels from finite-count tomography") {
  std::mt19937_64 rng(43);
  for (int k = 0; k < 10; ++k) {
    const Kraus ks = random_channel(rng, 2);
    const auto outs = probe_outputs(ks);
    std::array<DensityMatrix, 4> est{DensityMatrix::maximally_mixed(), DensityMatrix::maximally_mixed(),
                                     DensityMatrix::maximally_mixed(), DensityMatrix::maximally_mixed()};
    for (int i = 0; i < 4; ++i) est[i] = mle_state(sample_counts(DensityMatrix(outs[i]), 10000, rng)).rho;
    const auto rec = process_from_pairs(std::span<const PureState, 4>(probe_states()),
                                        std::span<const DensityMatrix, 4>(est));
    CHECK((rec.projected.chi() - chi_of(ks)).norm() < 0.05);
  }
}

TEST_CASE("projection onto physical process matrices") {
  Matrix4c raw = diag4(1.1, -0.1, 0.0, 0.0);
  const ProcessMatrix p = project_chi(raw);
  CHECK((p.chi() - diag4(1, 0, 0, 0)).norm() < 1e-12);
  CHECK_THROWS_AS(ProcessMatrix(diag4(0.5, 0.6, 0, 0)), ValidationError);
  CHECK_THROWS_AS(ProcessMatrix(diag4(1.2, -0.2, 0, 0)), ValidationError);
  Matrix4c nh = diag4(1, 0, 0, 0);
  nh(0, 1) = 0.1;
  CHECK_THROWS_AS(ProcessMatrix{nh}, ValidationError);
}

TEST_CASE("probe set is fixed") {
  const std::array<PureState, 4> wrong{PureState::H(), PureState::V(), PureState::M(), PureState::R()};
  const std::array<DensityMatrix, 4> outs{DensityMatrix::maximally_mixed(), DensityMatrix::maximally_mixed(),
                                          DensityMatrix::maximally_mixed(), DensityMatrix::maximally_mixed()};
  CHECK_THROWS_AS(process_from_pairs(std::span<const PureState, 4>(wrong),
                                     std::span<const DensityMatrix, 4>(outs)),
                  ValidationError);
}

TEST_CASE("Bloch affine maps") {
  const auto id = bloch_map(ProcessMatrix::identity());
  CHECK((id.M - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  CHECK(id.c.norm() < 1e-12);

  const auto deph = bloch_map(ProcessMatrix(diag4(0.5, 0, 0, 0.5)));
  CHECK((deph.M - Eigen::Vector3d(0, 0, 1).asDiagonal().toDenseMatrix()).norm() < 1e-12);
  CHECK(deph.c.norm() < 1e-12);

  const auto depol = bloch_map(ProcessMatrix(diag4(0.25, 0.25, 0.25, 0.25)));
  CHECK(depol.M.norm() < 1e-12);
  CHECK(depol.c.norm() < 1e-12);

  const auto flip = bloch_map(ProcessMatrix(diag4(0, 1, 0, 0)));
  CHECK((flip.M - Eigen::Vector3d(1, -1, -1).asDiagonal().toDenseMatrix()).norm() < 1e-12);

  // Amplitude damping moves the centre towards +z.
  const double g = 0.36;
  const Kraus ad{test::m2(1, 0, 0, std::sqrt(1 - g)), test::m2(0, std::sqrt(g), 0, 0)};
  const auto damp = bloch_map(ProcessMatrix(chi_of(ad)));
  CHECK((damp.c - Vector3(0, 0, g)).norm() < 1e-12);
  CHECK(damp.M(2, 2) == doctest::Approx(1 - g));
}

TEST_CASE("channels keep the Bloch ball inside itself") {
  std::mt19937_64 rng(47);
  for (int k = 0; k < 20; ++k) {
    const auto map = bloch_map(ProcessMatrix(chi_of(random_channel(rng, 1 + k % 3))));
    const auto pts = deformed_sphere(map, 1000);
    REQUIRE(pts.size() == 1000);
    for (const auto& p : pts) REQUIRE(p.norm() <= 1.0 + 1e-9);
  }
  const auto sphere = deformed_sphere(BlochAffineMap{}, 1024);
  Vector3 mean = Vector3::Zero();
  for (const auto& p : sphere) {
    CHECK(p.norm() == doctest::Approx(1.0));
    mean += p;
  }
  CHECK(mean.norm() / 1024 < 1e-2);
}

TEST_CASE("counts CSV") {
  const auto c = counts(1, 2, 3, 4, 5, 6);
  std::stringstream ss;
  write_counts_csv(ss, c);
  CHECK(ss.str() == "basis,n_plus,n_minus\nHV,1,2\nPM,3,4\nRL,5,6\n");
  const auto back = read_counts_csv(ss);
  CHECK(back.n == c.n);
  std::istringstream dup("# note\nbasis,n_plus,n_minus\nHV,1,2\nHV,3,4\n");
  CHECK_THROWS(read_counts_csv(dup));
  std::istringstream unknown("basis,n_plus,n_minus\nXY,1,2\n");
  CHECK_THROWS(read_counts_csv(unknown));
  std::istringstream negative("basis,n_plus,n_minus\nHV,-1,2\n");
  CHECK_THROWS(read_counts_csv(negative));
}

}  // TEST_SUITE
