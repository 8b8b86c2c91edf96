#pragma once

// Four-fold coincidence extraction from a time-sorted tag stream.
//
// Grouping is greedy with consume-once semantics: the earliest unconsumed tag
// is the anchor and its group is every tag in [anchor, anchor + tau]. A group
// is a candidate when it holds a trigger, a Bob click (D5/D6) and a BSM pair
// that classifies as PsiMinus or PsiPlus. Candidates are consumed; the clean
// ones become events, the rest are counted as ambiguous and dropped. A
// non-candidate group only releases its anchor.

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "qtele/detectors.hpp"
#include "qtele/experiment.hpp"
#include "qtele/qstate.hpp"

namespace qtele {

struct FourfoldEvent {
  ClickPattern bsm_pattern;
  BsmOutcome outcome = BsmOutcome::Inconclusive;
  DetectorId bob_detector = DetectorId::D5;
  std::int64_t trig_time_ps = 0;
  std::int64_t epoch_time_ps = 0;  ///< earliest tag of the group

  bool operator==(const FourfoldEvent&) const = default;
};

struct FourfoldResult {
  std::vector<FourfoldEvent> events;
  std::uint64_t ambiguous = 0;
};

/// Push-based form of `find_fourfolds`. Holds only the tags of the current
/// window.
class FourfoldFinder {
 public:
  /// Throws ValidationError for tau_ps <= 0.
  explicit FourfoldFinder(std::int64_t tau_ps);

  /// Throws ValidationError if `tag` is earlier than the previous one.
  void push(const TimeTag& tag);

  /// Flushes the remaining window; the finder can not be pushed to afterwards.
  FourfoldResult finish();

  std::size_t window_size() const { return window_.size(); }
  std::size_t max_window_size() const { return max_window_; }

 private:
  void settle(std::optional<std::int64_t> now);

  std::int64_t tau_;
  std::deque<TimeTag> window_;
  std::optional<TimeTag> last_;
  std::size_t max_window_ = 0;
  bool finished_ = false;
  FourfoldResult result_;
};

FourfoldResult find_fourfolds(std::span<const TimeTag> tags, std::int64_t tau_ps);

/// One row of a coincidence-window sweep. `correct` counts Bob clicks on the
/// detector that Charlie's state should fire.
struct WindowSweepRow {
  std::int64_t tau_ps = 0;
  std::uint64_t n_events = 0;
  std::uint64_t n_correct = 0;
  std::uint64_t n_wrong = 0;
  std::uint64_t n_ambiguous = 0;
  /// Unset when there were no events.
  std::optional<double> visibility;
  std::optional<double> visibility_sigma;
  /// (V - 1/3)/sigma_V; +/-inf when sigma_V is zero.
  std::optional<double> sigma_violation;
};

/// Sets visibility, its sigma and the sigma violation from the counts.
void fill_statistics(WindowSweepRow& row);

/// Charlie's state must be one of the two states of `bob_basis`; otherwise
/// ValidationError. Windows are processed concurrently when threads > 1.
std::vector<WindowSweepRow> window_sweep(std::span<const TimeTag> tags,
                                         std::span<const std::int64_t> taus_ps,
                                         const PureState& charlie_state,
                                         Basis bob_basis, unsigned threads = 1);

/// sigma of (a - b)/(a + b) under independent Poisson counts.
double visibility_sigma(double correct, double wrong);

/// Four-fold accidental rate for an Alice-side three-fold rate and Bob's
/// singles: three_fold * (bob_dark * tau + bob_photons_per_pulse * floor(tau / T)).
/// The second term covers Bob clicks from neighbouring pulses.
double accidental_rate(double three_fold_hz, double bob_dark_hz,
                       double bob_photons_per_pulse, std::int64_t tau_ps,
                       std::int64_t rep_period_ps);

/// Length of the time interval over which an uncorrelated Bob click joins a
/// given three-fold under anchor-relative windows: 2 tau minus the mean
/// spread of three jittered tags, 3 sigma / sqrt(pi).
double dark_acceptance_s(std::int64_t tau_ps, double jitter_sigma_ps);

}  // namespace qtele
