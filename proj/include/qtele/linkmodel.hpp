#pragma once

// Analytic rate / visibility / SNR model of a teleportation link dominated by
// Bob's dark counts at high attenuation.

#include <optional>
#include <ratio>
#include <span>
#include <string>
#include <vector>

namespace qtele {

struct ClassicalBounds {
  using fidelity = std::ratio<2, 3>;
  using visibility = std::ratio_subtract<std::ratio_multiply<std::ratio<2>, fidelity>,
                                         std::ratio<1>>;
  static_assert(std::ratio_equal_v<visibility, std::ratio<1, 3>>);

  static constexpr double f_cl = static_cast<double>(fidelity::num) / fidelity::den;
  static constexpr double v_cl = static_cast<double>(visibility::num) / visibility::den;
};

struct LinkBudget {
  double attenuation_db = 0.0;
  double n_hz = 400.0;      ///< Bob's dark-count rate
  double tau_s = 3e-9;      ///< effective coincidence acceptance
  double p_bsm_hz = 1.0;    ///< Alice-side heralded three-fold rate
  double v0 = 1.0;          ///< visibility of the genuine events
  double s2_frac = 0.0;     ///< multi-pair fraction of the genuine rate
  double v2 = 0.0;          ///< visibility of the multi-pair events
  /// Loss after the link that the attenuation figure leaves out (Bob's
  /// detector efficiency); 0 by default.
  double receiver_loss_db = 0.0;

  /// 10^(-(attenuation_db + receiver_loss_db)/10).
  double eta() const;
  /// Throws ValidationError when a field is out of range.
  void validate() const;
};

struct SnrResult {
  double value = 0.0;
  bool unbounded = false;  ///< n or tau was zero; value is +inf
};

/// eta / (n tau).
SnrResult snr(const LinkBudget& budget);

struct LinkPoint {
  double attenuation_db = 0.0;
  double rate_hz = 0.0;
  double visibility = 0.0;
  SnrResult snr;
};

/// rate = p (eta (1 + s2) + n tau); V = p eta (v0 + v2 s2) / rate.
std::vector<LinkPoint> predict_rate_visibility(const LinkBudget& budget,
                                               std::span<const double> attenuation_db);

/// Attenuation (dB) where the predicted visibility falls to 1/3, found by
/// bisection on [0, max_db]. Empty if it never does on that interval.
std::optional<double> visibility_crossover_db(const LinkBudget& budget,
                                              double max_db = 200.0);

/// n tau / (3 v0 - 1) for s2 = 0; empty when v0 <= 1/3.
std::optional<double> crossover_eta_closed_form(const LinkBudget& budget);

struct SweepSample {
  double attenuation_db = 0.0;
  double rate_hz = 0.0;
  double visibility = 0.0;
  /// Standard errors used as fit weights. When zero the rate residual is taken
  /// relative to the rate and the visibility residuals are unweighted.
  double rate_sigma_hz = 0.0;
  double visibility_sigma = 0.0;
};

struct BudgetFit {
  LinkBudget budget;
  double rate_residual_norm = 0.0;
  double visibility_residual_norm = 0.0;
  bool ok = false;
  std::vector<std::string> flags;
};

/// Weighted least-squares estimate of p_bsm_hz, s2_frac and v0 with n_hz,
/// tau_s, v2 and receiver_loss_db taken from `fixed`. Needs at least four
/// points. Unidentifiable parameters are flagged rather than thrown.
BudgetFit fit_budget(std::span<const SweepSample> sweep, const LinkBudget& fixed);

}  // namespace qtele
