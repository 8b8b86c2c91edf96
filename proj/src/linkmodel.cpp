#include "qtele/linkmodel.hpp"

#include <cmath>
#include <algorithm>
#include <limits>

#include <Eigen/Dense>

#include "qtele/errors.hpp"

namespace qtele {

namespace {

double eta_of(double db) { return std::pow(10.0, -db / 10.0); }

std::vector<double> dbs_of(std::span<const SweepSample> sweep) {
  std::vector<double> dbs;
  for (const auto& s : sweep) dbs.push_back(s.attenuation_db);
  return dbs;
}

double visibility_at(const LinkBudget& b, double eta) {
  const double signal = b.p_bsm_hz * eta;
  const double rate = signal * (1.0 + b.s2_frac) + b.p_bsm_hz * b.n_hz * b.tau_s;
  if (!(rate > 0.0)) return 0.0;
  return (b.v0 * signal + b.v2 * b.s2_frac * signal) / rate;
}

}  // namespace

double LinkBudget::eta() const { return eta_of(attenuation_db + receiver_loss_db); }

void LinkBudget::validate() const {
  if (!(attenuation_db >= 0.0) || !std::isfinite(attenuation_db)) {
    throw ValidationError("attenuation_db must be finite and >= 0");
  }
  if (!(n_hz >= 0.0) || !(tau_s >= 0.0) || !(p_bsm_hz >= 0.0) ||
      !(s2_frac >= 0.0)) {
    throw ValidationError("link budget rates must be >= 0");
  }
  if (!(receiver_loss_db >= 0.0) || !std::isfinite(receiver_loss_db)) {
    throw ValidationError("receiver_loss_db must be finite and >= 0");
  }
  if (!(v0 >= 0.0 && v0 <= 1.0) || !(v2 >= -1.0 && v2 <= 1.0)) {
    throw ValidationError("link budget visibilities out of range");
  }
}

SnrResult snr(const LinkBudget& budget) {
  budget.validate();
  const double noise = budget.n_hz * budget.tau_s;
  if (noise == 0.0) return {std::numeric_limits<double>::infinity(), true};
  return {budget.eta() / noise, false};
}

std::vector<LinkPoint> predict_rate_visibility(const LinkBudget& budget,
                                               std::span<const double> attenuation_db) {
  budget.validate();
  std::vector<LinkPoint> out;
  out.reserve(attenuation_db.size());
  for (double db : attenuation_db) {
    LinkBudget b = budget;
    b.attenuation_db = db;
    b.validate();
    const double eta = b.eta();
    LinkPoint p;
    p.attenuation_db = db;
    p.rate_hz = b.p_bsm_hz * (eta * (1.0 + b.s2_frac) + b.n_hz * b.tau_s);
    p.visibility = visibility_at(b, eta);
    p.snr = snr(b);
    out.push_back(p);
  }
  return out;
}

std::optional<double> visibility_crossover_db(const LinkBudget& budget,
                                              double max_db) {
  budget.validate();
  const double third = ClassicalBounds::v_cl;
  auto excess = [&](double db) {
    return visibility_at(budget, eta_of(db + budget.receiver_loss_db)) - third;
  };
  double lo = 0.0;
  double hi = max_db;
  if (excess(lo) < 0.0 || excess(hi) >= 0.0) return std::nullopt;
  for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) >= 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::optional<double> crossover_eta_closed_form(const LinkBudget& budget) {
  budget.validate();
  const double denom = 3.0 * budget.v0 - 1.0;
  if (!(denom > 0.0)) return std::nullopt;
  return budget.n_hz * budget.tau_s / denom;
}

BudgetFit fit_budget(std::span<const SweepSample> sweep, const LinkBudget& fixed) {
  if (sweep.size() < 4) {
    throw ValidationError("fit_budget: needs at least four sweep points");
  }
  fixed.validate();
  BudgetFit fit;
  fit.budget = fixed;
  const double floor_scale = fixed.n_hz * fixed.tau_s;
  const auto n = static_cast<Eigen::Index>(sweep.size());

  // rate = p (eta + n tau) + (p s2) eta, linear in (p, p s2).
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd y(n);
  Eigen::VectorXd eta(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = sweep[static_cast<std::size_t>(i)];
    if (!(s.rate_hz >= 0.0) || s.rate_sigma_hz < 0.0 || s.visibility_sigma < 0.0) {
      throw ValidationError("fit_budget: rates and errors must be >= 0");
    }
    eta(i) = eta_of(s.attenuation_db + fixed.receiver_loss_db);
    double w = s.rate_sigma_hz > 0.0 ? s.rate_sigma_hz : s.rate_hz;
    if (!(w > 0.0)) w = 1.0;
    A(i, 0) = (eta(i) + floor_scale) / w;
    A(i, 1) = eta(i) / w;
    y(i) = s.rate_hz / w;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  const bool rate_identifiable = qr.rank() == 2;
  double p = 0.0;
  double ps2 = 0.0;
  if (rate_identifiable) {
    const Eigen::Vector2d x = qr.solve(y);
    p = x(0);
    ps2 = x(1);
  } else {
    fit.flags.push_back(
        "rate curve cannot separate signal from multi-pair terms; s2_frac fixed at 0");
    p = A.col(0).dot(y) / A.col(0).squaredNorm();
  }
  if (!(p > 0.0)) {
    fit.flags.push_back("fitted p_bsm_hz is not positive");
    return fit;
  }
  if (ps2 < 0.0) {
    fit.flags.push_back("negative multi-pair fraction clipped to 0");
    ps2 = 0.0;
    p = A.col(0).dot(y) / A.col(0).squaredNorm();
  }
  fit.budget.p_bsm_hz = p;
  fit.budget.s2_frac = ps2 / p;

  // V = (v0 + v2 s2) p eta / rate, linear in v0 once the rate is fixed.
  double num = 0.0;
  double den = 0.0;
  double max_share = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = sweep[static_cast<std::size_t>(i)];
    const double signal = p * eta(i);
    const double rate = signal * (1.0 + fit.budget.s2_frac) + p * floor_scale;
    const double x = signal / rate;
    const double target = s.visibility - fixed.v2 * fit.budget.s2_frac * x;
    const double w = s.visibility_sigma > 0.0 ? 1.0 / (s.visibility_sigma * s.visibility_sigma) : 1.0;
    num += w * x * target;
    den += w * x * x;
    max_share = std::max(max_share, eta(i) / (eta(i) + floor_scale));
  }
  if (!(den > 0.0) || max_share < 0.05) {
    fit.flags.push_back("v0 unidentifiable: every point sits on the dark-count floor");
    return fit;
  }
  const double v0 = num / den;
  if (v0 < 0.0 || v0 > 1.0) fit.flags.push_back("fitted v0 clipped to [0, 1]");
  fit.budget.v0 = std::clamp(v0, 0.0, 1.0);

  const auto pred = predict_rate_visibility(fit.budget, dbs_of(sweep));
  double rr = 0.0;
  double rv = 0.0;
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    rr += std::pow(pred[i].rate_hz - sweep[i].rate_hz, 2);
    rv += std::pow(pred[i].visibility - sweep[i].visibility, 2);
  }
  fit.rate_residual_norm = std::sqrt(rr);
  fit.visibility_residual_norm = std::sqrt(rv);
  fit.ok = rate_identifiable && fit.flags.empty();
  return fit;
}

}  // namespace qtele
