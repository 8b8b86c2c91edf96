#pragma once

// Multi-run protocols built on the pulse engine: six-state tomography,
// attenuation sweeps and window sweeps. Every run draws its seed from the
// base seed and a label naming the run, so results do not depend on the
// order or grouping of runs.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qtele/coincidence.hpp"
#include "qtele/experiment.hpp"
#include "qtele/linkmodel.hpp"
#include "qtele/tomography.hpp"

namespace qtele {

std::uint64_t run_seed(std::uint64_t seed, std::string_view label);

/// One Monte-Carlo run analysed with find_fourfolds.
struct MeasuredRun {
  Basis basis = Basis::HV;
  std::uint64_t n_plus = 0;   ///< clean four-folds with D5
  std::uint64_t n_minus = 0;  ///< clean four-folds with D6
  std::uint64_t ambiguous = 0;
  std::array<std::uint64_t, 2> by_outcome{};  ///< PsiMinus, PsiPlus
  double duration_s = 0.0;
  RunResult raw;  ///< tags kept only on request
};

MeasuredRun measure(const ExperimentConfig& config, std::int64_t window_ps,
                    unsigned threads = 1, bool keep_tags = false);

struct StateReport {
  std::string name;
  PureState state = PureState::H();
  TomographyCounts counts;
  MleResult mle;
  double fidelity = 0.0;
  std::uint64_t events = 0;
  std::uint64_t ambiguous = 0;
  std::vector<MeasuredRun> runs;  ///< one per basis, in `bases` order
};

/// Runs `state` once per basis with config.pulses pulses each and
/// reconstructs the output state.
StateReport tomograph_state(const ExperimentConfig& base, std::string_view state_name,
                            std::span<const Basis> bases, std::int64_t window_ps,
                            unsigned threads = 1, bool keep_tags = false);

struct ProtocolReport {
  std::vector<StateReport> states;
  double average_fidelity = 0.0;
  std::uint64_t total_events = 0;
};

ProtocolReport run_protocol(const ExperimentConfig& base,
                            std::span<const std::string> state_names,
                            std::span<const Basis> bases, std::int64_t window_ps,
                            unsigned threads = 1, bool keep_tags = false);

/// Process reconstruction from the H, V, P, R entries of a report. Throws
/// ValidationError if one is missing.
ProcessReconstruction process_from_report(const ProtocolReport& report);

/// Basis in which `state` is the + or - eigenstate; empty otherwise.
std::optional<Basis> eigenbasis(const PureState& state);

struct AttenuationPoint {
  double attenuation_db = 0.0;
  std::uint64_t pulses_per_state = 0;
  double duration_s = 0.0;
  std::uint64_t n_events = 0;
  std::uint64_t n_correct = 0;
  std::uint64_t n_wrong = 0;
  double rate_hz = 0.0;
  double rate_sigma_hz = 0.0;
  std::optional<double> visibility;
  std::optional<double> visibility_sigma;
  double snr = 0.0;
};

/// Pulses per state at `db`: pulses * 10^(min(db, knee)/10). A knee of 0
/// keeps the pulse count fixed.
std::uint64_t scaled_pulses(std::uint64_t pulses, double db, double knee_db);

/// Upper bound on the pulses of a single sweep run. Larger points are split
/// into several runs whose counts are pooled.
inline constexpr std::uint64_t kMaxPulsesPerRun = 500'000'000'000;

/// Every state is measured in its own eigenbasis; correct/wrong counts are
/// pooled over the states.
AttenuationPoint attenuation_point(const ExperimentConfig& base, double db,
                                   std::span<const std::string> state_names,
                                   std::int64_t window_ps, double knee_db,
                                   unsigned threads = 1);

/// Link budget implied by a configuration: Bob's summed dark rate, the dark
/// acceptance width of the window, and as receiver loss Bob's mean detector
/// efficiency times the share of three-folds that carry a photon for Bob,
/// pooled over `state_names` (or config.charlie_state when empty). Signal
/// parameters keep their defaults.
LinkBudget budget_from_config(const ExperimentConfig& config, std::int64_t window_ps,
                              std::span<const std::string> state_names = {});

/// Runs config (with its charlie_state and bob_basis) and sweeps the analysis
/// window over the resulting tag stream. Runs longer than kMaxPulsesPerRun
/// are split into independently seeded parts whose counts are pooled.
std::vector<WindowSweepRow> window_sweep_run(const ExperimentConfig& config,
                                             std::span<const std::int64_t> taus_ps,
                                             unsigned threads = 1);

}  // namespace qtele
