#include <doctest.h>

#include <cmath>
#include <random>
#include <ratio>

#include "qtele/errors.hpp"
#include "qtele/linkmodel.hpp"

using namespace qtele;

namespace {

LinkBudget budget(double db, double n = 400.0, double tau = 3e-9) {
  LinkBudget b;
  b.attenuation_db = db;
  b.n_hz = n;
  b.tau_s = tau;
  return b;
}

std::vector<double> grid(double lo, double hi, double step) {
  std::vector<double> v;
  for (double x = lo; x <= hi + 1e-9; x += step) v.push_back(x);
  return v;
}

}  // namespace

TEST_SUITE("linkmodel") {

TEST_CASE("SNR examples") {
  CHECK(snr(budget(31)).value == doctest::Approx(std::pow(10.0, -3.1) / 1.2e-6).epsilon(1e-15));
  CHECK(snr(budget(31)).value == doctest::Approx(661.9).epsilon(1e-4));
  CHECK(snr(budget(50)).value == doctest::Approx(8.33).epsilon(1e-3));
  CHECK(snr(budget(0, 1.0, 1.0)).value == 1.0);
  const auto inf = snr(budget(10, 0.0));
  CHECK(inf.unbounded);
  CHECK(std::isinf(inf.value));
  CHECK(snr(budget(10, 400.0, 0.0)).unbounded);
  CHECK_THROWS_AS(snr(budget(-1)), ValidationError);
}

TEST_CASE("SNR is strictly decreasing in every noise input") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> db(0.0, 80.0), n(1.0, 1e4), tau(1e-10, 1e-7), f(1.001, 2.0);
  for (int k = 0; k < 1000; ++k) {
    const LinkBudget b = budget(db(rng), n(rng), tau(rng));
    const double base = snr(b).value;
    LinkBudget x = b;
    x.attenuation_db += f(rng) - 1.0;
    CHECK(snr(x).value < base);
    x = b;
    x.n_hz *= f(rng);
    CHECK(snr(x).value < base);
    x = b;
    x.tau_s *= f(rng);
    CHECK(snr(x).value < base);
  }
}

TEST_CASE("prediction limits") {
  LinkBudget b = budget(0, 0.0);
  b.v0 = 0.93;
  for (const auto& p : predict_rate_visibility(b, grid(0, 60, 5))) {
    CHECK(p.visibility == doctest::Approx(0.93));
  }
  b = budget(0);
  b.p_bsm_hz = 2.0;
  b.v0 = 0.9;
  const auto pts = predict_rate_visibility(b, grid(0, 200, 2));
  CHECK(pts.back().rate_hz == doctest::Approx(2.0 * 400.0 * 3e-9).epsilon(1e-9));
  for (std::size_t i = 1; i < pts.size(); ++i) {
    CHECK(pts[i].rate_hz < pts[i - 1].rate_hz);
    CHECK(pts[i].rate_hz > 2.0 * 400.0 * 3e-9);
    CHECK(pts[i].visibility <= pts[i - 1].visibility);
  }
  CHECK(pts.front().visibility == doctest::Approx(0.9).epsilon(1e-5));
  b.s2_frac = 0.2;
  b.v2 = 0.5;
  const auto q = predict_rate_visibility(b, std::vector<double>{0.0});
  CHECK(q[0].visibility == doctest::Approx((0.9 + 0.1) / (1.2 + 1.2e-6)));
}

TEST_CASE("crossover of the classical visibility bound") {
  for (double v0 : {0.5, 0.7, 0.9, 1.0}) {
    LinkBudget b = budget(0);
    b.v0 = v0;
    const auto db = visibility_crossover_db(b);
    REQUIRE(db.has_value());
    const double eta_star = 1.2e-6 / (3.0 * v0 - 1.0);
    CHECK(*crossover_eta_closed_form(b) == doctest::Approx(eta_star).epsilon(1e-12));
    CHECK(std::pow(10.0, -*db / 10.0) == doctest::Approx(eta_star).epsilon(1e-9));
    // V >= 1/3 exactly on the high-transmission side of the crossover.
    b.attenuation_db = *db - 0.01;
    CHECK(predict_rate_visibility(b, std::vector<double>{b.attenuation_db})[0].visibility > 1.0 / 3);
    CHECK(predict_rate_visibility(b, std::vector<double>{*db + 0.01})[0].visibility < 1.0 / 3);
  }
  LinkBudget low = budget(0);
  low.v0 = 0.3;
  CHECK_FALSE(crossover_eta_closed_form(low).has_value());
  CHECK_FALSE(visibility_crossover_db(low).has_value());
  // With receiver loss the crossover moves to a lower link attenuation.
  LinkBudget rx = budget(0);
  rx.receiver_loss_db = 5.0;
  CHECK(*visibility_crossover_db(rx) == doctest::Approx(*visibility_crossover_db(budget(0)) - 5.0));
}

TEST_CASE("classical bounds") {
  using B = ClassicalBounds;
  static_assert(std::ratio_equal_v<B::visibility,
                                   std::ratio_subtract<std::ratio_multiply<std::ratio<2>, B::fidelity>,
                                                       std::ratio<1>>>);
  static_assert(std::ratio_equal_v<B::visibility, std::ratio<1, 3>>);
  CHECK(ClassicalBounds::v_cl == 1.0 / 3.0);
  CHECK(ClassicalBounds::f_cl == 2.0 / 3.0);
}

TEST_CASE("fit recovers a noiseless budget") {
  LinkBudget truth = budget(0, 580.0, 5.5e-9);
  truth.p_bsm_hz = 3.7;
  truth.v0 = 0.82;
  truth.s2_frac = 0.15;
  truth.receiver_loss_db = 5.2;
  std::vector<SweepSample> data;
  for (const auto& p : predict_rate_visibility(truth, grid(0, 60, 5))) {
    data.push_back({p.attenuation_db, p.rate_hz, p.visibility, 0.0, 0.0});
  }
  LinkBudget fixed = truth;
  fixed.p_bsm_hz = 1.0;
  fixed.v0 = 1.0;
  fixed.s2_frac = 0.0;
  const BudgetFit fit = fit_budget(data, fixed);
  CHECK(fit.ok);
  CHECK(fit.flags.empty());
  CHECK(fit.budget.p_bsm_hz == doctest::Approx(3.7).epsilon(1e-6));
  CHECK(fit.budget.v0 == doctest::Approx(0.82).epsilon(1e-6));
  CHECK(fit.budget.s2_frac == doctest::Approx(0.15).epsilon(1e-6));
  CHECK(fit.rate_residual_norm < 1e-6);
}

TEST_CASE("fit on Poisson-sampled sweeps") {
  LinkBudget truth = budget(0, 580.0, 5.5e-9);
  truth.p_bsm_hz = 3.7;
  truth.v0 = 0.8;
  truth.receiver_loss_db = 5.2;
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<SweepSample> data;
    for (const auto& p : predict_rate_visibility(truth, grid(0, 60, 5))) {
      const double T = 1e6 / std::max(p.rate_hz, 1e-12) * 1e-3;  // ~1000 events per point
      const double mean = p.rate_hz * T;
      const auto n = static_cast<double>(std::poisson_distribution<long>(mean)(rng));
      const double pc = 0.5 * (1.0 + p.visibility);
      const auto c = static_cast<double>(
          std::binomial_distribution<long>(static_cast<long>(n), pc)(rng));
      const double v = (2.0 * c - n) / n;
      const double sv = std::sqrt(4.0 * c * (n - c) / (n * n * n));
      data.push_back({p.attenuation_db, n / T, v, std::sqrt(n) / T, sv});
    }
    LinkBudget fixed = truth;
    fixed.p_bsm_hz = 1.0;
    fixed.v0 = 1.0;
    const BudgetFit fit = fit_budget(data, fixed);
    CHECK(fit.budget.p_bsm_hz == doctest::Approx(truth.p_bsm_hz).epsilon(0.1));
    CHECK(fit.budget.v0 == doctest::Approx(truth.v0).epsilon(0.1));
  }
}

TEST_CASE("degenerate designs are flagged") {
  LinkBudget truth = budget(0);
  truth.p_bsm_hz = 1.0;
  std::vector<SweepSample> tail;
  for (const auto& p : predict_rate_visibility(truth, grid(120, 150, 10))) {
    tail.push_back({p.attenuation_db, p.rate_hz, p.visibility, 0.0, 0.0});
  }
  const BudgetFit fit = fit_budget(tail, truth);
  CHECK_FALSE(fit.ok);
  CHECK_FALSE(fit.flags.empty());

  CHECK_THROWS_AS(fit_budget(std::span<const SweepSample>(tail.data(), 3), truth), ValidationError);
}

}  // TEST_SUITE
