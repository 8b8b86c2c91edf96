#include "qtele/tomography.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <limits>
#include <numbers>

#include "qtele/errors.hpp"

namespace qtele {

std::uint64_t TomographyCounts::total() const {
  std::uint64_t t = 0;
  for (const auto& b : n) t += b[0] + b[1];
  return t;
}

void write_counts_csv(std::ostream& os, const TomographyCounts& counts) {
  os << "basis,n_plus,n_minus\n";
  for (Basis b : kAllBases) {
    os << basis_name(b) << ',' << counts[b][0] << ',' << counts[b][1] << '\n';
  }
}

TomographyCounts read_counts_csv(std::istream& is) {
  TomographyCounts out;
  std::array<bool, 3> seen{};
  bool header = false;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != "basis,n_plus,n_minus") {
        throw ValidationError("counts csv: expected header basis,n_plus,n_minus");
      }
      header = true;
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    auto bad = [&] {
      return ValidationError("counts csv: malformed line " + std::to_string(line_no));
    };
    if (c2 == std::string::npos) throw bad();
    Basis b;
    try {
      b = parse_basis(std::string_view(line).substr(0, c1));
    } catch (const std::exception&) {
      throw bad();
    }
    auto& slot = seen[static_cast<std::size_t>(b)];
    if (slot) throw ValidationError("counts csv: basis listed twice");
    slot = true;
    auto number = [&](std::size_t from, std::size_t to) {
      std::uint64_t v = 0;
      const char* first = line.data() + from;
      const char* last = line.data() + to;
      const auto [p, ec] = std::from_chars(first, last, v);
      if (ec != std::errc{} || p != last) throw bad();
      return v;
    };
    out[b][0] = number(c1 + 1, c2);
    out[b][1] = number(c2 + 1, line.size());
  }
  if (!header) throw ValidationError("counts csv: empty input");
  return out;
}

namespace {

using Vector4 = Eigen::Vector4d;
using Matrix4 = Eigen::Matrix4d;

Matrix2c lower_triangular(const Vector4& t) {
  Matrix2c T = Matrix2c::Zero();
  T(0, 0) = t(0);
  T(1, 1) = t(1);
  T(1, 0) = Complex(t(2), t(3));
  return T;
}

// Objective for the minimizer: minus the mean log-likelihood of rho = A/trA
// with A = T'T, plus (trA - 1)^2 to pin the otherwise free scale.
class Objective {
 public:
  explicit Objective(const TomographyCounts& counts) {
    for (Basis b : kAllBases) {
      const auto [plus, minus] = basis_states(b);
      for (int s = 0; s < 2; ++s) {
        const auto k = counts[b][static_cast<std::size_t>(s)];
        if (k == 0) continue;
        terms_.push_back({(s == 0 ? plus : minus).projector(), static_cast<double>(k)});
      }
    }
    total_ = static_cast<double>(counts.total());
  }

  double log_likelihood(const Matrix2c& rho) const {
    double l = 0.0;
    for (const auto& t : terms_) {
      const double p = (t.proj * rho).trace().real();
      if (!(p > 0.0)) return -std::numeric_limits<double>::infinity();
      l += t.n * std::log(p);
    }
    return l;
  }

  double value(const Vector4& x) const {
    const Matrix2c T = lower_triangular(x);
    const Matrix2c A = T.adjoint() * T;
    const double tr = A.trace().real();
    if (!(tr > 0.0)) return std::numeric_limits<double>::infinity();
    const double l = log_likelihood(A / tr);
    return -l / total_ + (tr - 1.0) * (tr - 1.0);
  }

  Vector4 gradient(const Vector4& x) const {
    const Matrix2c T = lower_triangular(x);
    const Matrix2c A = T.adjoint() * T;
    const double tr = A.trace().real();
    const Matrix2c rho = A / tr;
    Matrix2c R = Matrix2c::Zero();
    for (const auto& t : terms_) {
      R += (t.n / (t.proj * rho).trace().real()) * t.proj;
    }
    // d(mean logL)/dA = (R - N I) / (N trA), Hermitian.
    const Matrix2c G = (R - total_ * Matrix2c::Identity()) / (total_ * tr);
    const Matrix2c GT = G * T.adjoint();
    Vector4 g;
    g(0) = 2.0 * GT(0, 0).real();
    g(1) = 2.0 * GT(1, 1).real();
    g(2) = 2.0 * GT(0, 1).real();
    g(3) = -2.0 * GT(0, 1).imag();
    return -g + 4.0 * (tr - 1.0) * x;
  }

 private:
  struct Term {
    Matrix2c proj;
    double n;
  };
  std::vector<Term> terms_;
  double total_ = 0.0;
};

Matrix2c hermitian_part(const Matrix2c& m) { return 0.5 * (m + m.adjoint()); }

}  // namespace

MleResult mle_state(const TomographyCounts& counts, const MleOptions& options) {
  if (counts.total() == 0) {
    throw ValidationError("mle_state: all counts are zero");
  }
  const Objective f(counts);
  Vector4 x(std::sqrt(0.5), std::sqrt(0.5), 0.0, 0.0);
  double fx = f.value(x);
  Vector4 g = f.gradient(x);
  Matrix4 Hinv = Matrix4::Identity();

  MleResult out;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    Vector4 d = -Hinv * g;
    if (g.dot(d) >= 0.0) {
      Hinv.setIdentity();
      d = -g;
    }
    double step = 1.0;
    Vector4 x_new = x;
    double f_new = fx;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      x_new = x + step * d;
      f_new = f.value(x_new);
      if (f_new <= fx + 1e-4 * step * g.dot(d)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      out.converged = true;
      break;
    }
    const double improvement = fx - f_new;
    const Vector4 g_new = f.gradient(x_new);
    const Vector4 s = x_new - x;
    const Vector4 y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      const double r = 1.0 / sy;
      const Matrix4 I = Matrix4::Identity();
      Hinv = (I - r * s * y.transpose()) * Hinv * (I - r * y * s.transpose()) +
             r * s * s.transpose();
    }
    x = x_new;
    fx = f_new;
    g = g_new;
    if (improvement < options.tolerance) {
      out.converged = true;
      ++it;
      break;
    }
  }

  const Matrix2c T = lower_triangular(x);
  Matrix2c A = hermitian_part(T.adjoint() * T);
  A /= A.trace().real();
  out.rho = DensityMatrix(A);
  out.iterations = it;
  out.log_likelihood = f.log_likelihood(A);
  out.gradient_norm = g.norm();
  return out;
}

ProcessMatrix::ProcessMatrix(const Matrix4c& chi) : chi_(chi) {
  if ((chi - chi.adjoint()).cwiseAbs().maxCoeff() > kTolerance) {
    throw ValidationError("ProcessMatrix: chi is not Hermitian");
  }
  if (std::abs(chi.trace() - Complex(1.0, 0.0)) > kTolerance) {
    throw ValidationError("ProcessMatrix: chi does not have unit trace");
  }
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(0.5 * (chi + chi.adjoint()),
                                             Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -kTolerance) {
    throw ValidationError("ProcessMatrix: chi has a negative eigenvalue");
  }
}

ProcessMatrix ProcessMatrix::identity() {
  Matrix4c chi = Matrix4c::Zero();
  chi(0, 0) = 1.0;
  return ProcessMatrix(chi);
}

Matrix4c chi_from_outputs(std::span<const Matrix2c, 4> outputs) {
  // Images of the matrix units |i><j|, built from the probe outputs.
  const Complex i(0.0, 1.0);
  const Matrix2c& eh = outputs[0];
  const Matrix2c& ev = outputs[1];
  const Matrix2c& ep = outputs[2];
  const Matrix2c& er = outputs[3];
  std::array<Matrix2c, 4> image;
  image[0] = eh;                                           // |H><H|
  image[1] = ep + i * er - 0.5 * (1.0 + i) * (eh + ev);    // |H><V|
  image[2] = ep - i * er - 0.5 * (1.0 - i) * (eh + ev);    // |V><H|
  image[3] = ev;                                           // |V><V|

  Eigen::Matrix<Complex, 16, 16> beta;
  Eigen::Matrix<Complex, 16, 1> lambda;
  for (int j = 0; j < 4; ++j) {
    Matrix2c unit = Matrix2c::Zero();
    unit(j / 2, j % 2) = 1.0;
    for (int k = 0; k < 4; ++k) lambda(4 * j + k) = image[static_cast<std::size_t>(j)](k / 2, k % 2);
    for (int m = 0; m < 4; ++m) {
      for (int n = 0; n < 4; ++n) {
        const Matrix2c term = pauli(m) * unit * pauli(n);
        for (int k = 0; k < 4; ++k) beta(4 * j + k, 4 * m + n) = term(k / 2, k % 2);
      }
    }
  }
  const Eigen::Matrix<Complex, 16, 1> x = beta.fullPivLu().solve(lambda);
  Matrix4c chi;
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 4; ++n) chi(m, n) = x(4 * m + n);
  return chi;
}

ProcessMatrix project_chi(const Matrix4c& raw) {
  Eigen::SelfAdjointEigenSolver<Matrix4c> es(0.5 * (raw + raw.adjoint()));
  Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0);
  const double tr = ev.sum();
  if (!(tr > 0.0)) throw ValidationError("project_chi: no positive eigenvalue");
  ev /= tr;
  Matrix4c chi = es.eigenvectors() * ev.cast<Complex>().asDiagonal() *
                 es.eigenvectors().adjoint();
  chi = 0.5 * (chi + chi.adjoint());
  return ProcessMatrix(chi);
}

ProcessReconstruction process_from_pairs(std::span<const PureState, 4> inputs,
                                         std::span<const DensityMatrix, 4> outputs) {
  const auto& probes = probe_states();
  for (std::size_t k = 0; k < 4; ++k) {
    if (!inputs[k].same_ray(probes[k])) {
      throw ValidationError("process_from_pairs: inputs must be H, V, P, R in order");
    }
  }
  std::array<Matrix2c, 4> out;
  for (std::size_t k = 0; k < 4; ++k) out[k] = outputs[k].matrix();
  const Matrix4c raw = chi_from_outputs(out);
  return ProcessReconstruction{raw, project_chi(raw)};
}

double process_fidelity(const ProcessMatrix& chi, const ProcessMatrix& ideal) {
  return (ideal.chi() * chi.chi()).trace().real();
}

Matrix2c apply_process(const Matrix4c& chi, const Matrix2c& op) {
  Matrix2c out = Matrix2c::Zero();
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 4; ++n) out += chi(m, n) * pauli(m) * op * pauli(n);
  return out;
}

BlochAffineMap bloch_map(const ProcessMatrix& chi) {
  BlochAffineMap map;
  const Matrix2c e0 = apply_process(chi.chi(), pauli(0));
  for (int i = 1; i <= 3; ++i) {
    map.c(i - 1) = 0.5 * (pauli(i) * e0).trace().real();
    for (int j = 1; j <= 3; ++j) {
      const Matrix2c ej = apply_process(chi.chi(), pauli(j));
      map.M(i - 1, j - 1) = 0.5 * (pauli(i) * ej).trace().real();
    }
  }
  return map;
}

std::vector<Vector3> deformed_sphere(const BlochAffineMap& map, std::size_t n) {
  std::vector<Vector3> pts;
  pts.reserve(n);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t k = 0; k < n; ++k) {
    const double z = 1.0 - (2.0 * static_cast<double>(k) + 1.0) / static_cast<double>(n);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(k);
    pts.push_back(map(Vector3(r * std::cos(phi), r * std::sin(phi), z)));
  }
  return pts;
}

}  // namespace qtele
