#pragma once

// Pulse-by-pulse Monte-Carlo of the teleportation setup: SPDC emission, the
// beam-splitter Bell-state measurement, link loss, threshold detectors with
// dark counts and timing jitter, feed-forward and Bob's basis measurement.

#include <array>
#include <cstdint>
#include <vector>

#include "qtele/detectors.hpp"
#include "qtele/fock.hpp"
#include "qtele/qstate.hpp"

namespace qtele {

struct DetectorSpec {
  double efficiency = 0.5;
  double dark_rate_hz = 300.0;
};

/// Which part of the time axis ends up in the tag stream.
enum class TagScope {
  /// Every pulse slot is materialized.
  Full,
  /// Only slots within `coverage_ps` of a slot holding a Bob click (photon or
  /// dark). Every four-fold group with a window up to `coverage_ps` lies
  /// entirely inside such a neighbourhood, so coincidence statistics match
  /// the full stream exactly while the rest of the timeline is skipped.
  BobWindows,
};

std::array<DetectorSpec, kDetectorCount> default_detector_table();

struct ExperimentConfig {
  fock::SourceParams source{};
  int n_max = fock::kDefaultNMax;
  double attenuation_db = 0.0;  ///< Alice -> Bob link
  std::int64_t rep_period_ps = 12500;
  std::uint64_t pulses = 1'000'000;
  std::array<DetectorSpec, kDetectorCount> detector_table =
      default_detector_table();
  double jitter_sigma_ps = 500.0;
  std::int64_t tag_resolution_ps = 156;
  bool feed_forward = true;
  /// Fiber delay of photon 2. Bob's channels are delay-compensated in the
  /// tag stream, so this only enters the time-axis bookkeeping.
  std::int64_t ff_delay_ps = 250000;
  PureState charlie_state = PureState::H();
  Basis bob_basis = Basis::HV;
  double drift_angle_rad = 0.0;
  Vector3 drift_axis = Vector3(1.0, 1.0, 1.0).normalized();
  std::uint64_t seed = 1;
  TagScope tag_scope = TagScope::BobWindows;
  std::int64_t coverage_ps = 30000;

  /// 10^(-attenuation_db/10).
  double eta() const;
  double duration_ps() const;

  /// Throws ConfigError for any out-of-range field.
  void validate() const;
};

struct TimeTag {
  DetectorId detector = DetectorId::D1;
  std::int64_t time_ps = 0;

  friend bool operator==(const TimeTag&, const TimeTag&) = default;
  /// Time first, then detector id.
  friend auto operator<=>(const TimeTag& a, const TimeTag& b) {
    if (auto c = a.time_ps <=> b.time_ps; c != 0) return c;
    return index(a.detector) <=> index(b.detector);
  }
};

/// Genuine four-folds (no dark clicks involved) of one BSM outcome.
struct CountRecord {
  Basis basis = Basis::HV;
  BsmOutcome bsm = BsmOutcome::PsiMinus;
  std::uint64_t n_plus = 0;   ///< D5
  std::uint64_t n_minus = 0;  ///< D6
};

/// BSM classification of every pulse in which the trigger and exactly one of
/// Bob's detectors fired from real photons, indexed by BsmOutcome.
struct BsmTally {
  std::array<std::uint64_t, 3> by_outcome{};
  std::uint64_t total() const {
    return by_outcome[0] + by_outcome[1] + by_outcome[2];
  }
};

struct RunStats {
  std::uint64_t materialized_slots = 0;
  std::uint64_t active_slots = 0;
  double duration_s = 0.0;
};

struct RunResult {
  std::vector<TimeTag> tags;         ///< sorted by (time, detector)
  std::vector<CountRecord> counts;   ///< PsiMinus then PsiPlus
  BsmTally tally;
  RunStats stats;
};

/// Runs the configured number of pulses. The result depends only on the
/// configuration (seed included), not on `threads`.
RunResult run(const ExperimentConfig& config, unsigned threads = 1);

/// PsiMinus -> rho, PsiPlus -> sigma3 rho sigma3. Inconclusive is a LogicError.
DensityMatrix apply_feed_forward(const DensityMatrix& rho, BsmOutcome outcome);

/// Slow polarization drift of photon 2: rotation generated by
/// drift_axis.sigma with angle drift_angle_rad * sin(2 pi t / T_run).
Matrix2c drift_rotation(std::int64_t time_ps, const ExperimentConfig& config);

struct ThreeFoldYield {
  /// P(trigger click and a PsiMinus or PsiPlus pattern) per pulse, dark
  /// clicks ignored.
  double per_pulse = 0.0;
  /// The part of per_pulse where the pulse also sends a photon towards Bob.
  double partnered = 0.0;
};

/// Exact over the truncated Fock state of `config`.
ThreeFoldYield three_fold_yield(const ExperimentConfig& config);

/// g = sqrt(rate / (rep_rate * two_fold_efficiency)); throws CalibrationError
/// when g^2 exceeds the small-gain bound.
double calibrate_g(double target_pair_rate_hz, double rep_rate_hz,
                   double assumed_two_fold_efficiency);

}  // namespace qtele
