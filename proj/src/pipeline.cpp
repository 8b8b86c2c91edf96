#include "qtele/pipeline.hpp"

#include <cmath>
#include <cstdio>

#include "qtele/config.hpp"
#include "qtele/errors.hpp"

namespace qtele {

std::uint64_t run_seed(std::uint64_t seed, std::string_view label) {
  std::uint64_t x = seed ^ fnv1a64(label);
  // SplitMix64 finalizer.
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

MeasuredRun measure(const ExperimentConfig& config, std::int64_t window_ps,
                    unsigned threads, bool keep_tags) {
  MeasuredRun m;
  m.basis = config.bob_basis;
  m.raw = run(config, threads);
  const auto ff = find_fourfolds(m.raw.tags, window_ps);
  for (const auto& e : ff.events) {
    (e.bob_detector == DetectorId::D5 ? m.n_plus : m.n_minus) += 1;
    m.by_outcome[e.outcome == BsmOutcome::PsiPlus ? 1 : 0] += 1;
  }
  m.ambiguous = ff.ambiguous;
  m.duration_s = m.raw.stats.duration_s;
  if (!keep_tags) {
    m.raw.tags.clear();
    m.raw.tags.shrink_to_fit();
  }
  return m;
}

StateReport tomograph_state(const ExperimentConfig& base, std::string_view state_name,
                            std::span<const Basis> bases, std::int64_t window_ps,
                            unsigned threads, bool keep_tags) {
  StateReport r;
  r.name = std::string(state_name);
  r.state = PureState::named(state_name);
  for (Basis b : bases) {
    ExperimentConfig c = base;
    c.charlie_state = r.state;
    c.bob_basis = b;
    c.seed = run_seed(base.seed, "state=" + r.name + "|basis=" + std::string(basis_name(b)));
    MeasuredRun m = measure(c, window_ps, threads, keep_tags);
    r.counts[b][0] += m.n_plus;
    r.counts[b][1] += m.n_minus;
    r.events += m.n_plus + m.n_minus;
    r.ambiguous += m.ambiguous;
    r.runs.push_back(std::move(m));
  }
  if (r.events > 0) {
    r.mle = mle_state(r.counts);
    r.fidelity = fidelity(r.state, r.mle.rho);
  }
  return r;
}

ProtocolReport run_protocol(const ExperimentConfig& base,
                            std::span<const std::string> state_names,
                            std::span<const Basis> bases, std::int64_t window_ps,
                            unsigned threads, bool keep_tags) {
  ProtocolReport p;
  double sum = 0.0;
  for (const auto& name : state_names) {
    p.states.push_back(tomograph_state(base, name, bases, window_ps, threads, keep_tags));
    sum += p.states.back().fidelity;
    p.total_events += p.states.back().events;
  }
  if (!p.states.empty()) p.average_fidelity = sum / static_cast<double>(p.states.size());
  return p;
}

ProcessReconstruction process_from_report(const ProtocolReport& report) {
  std::array<std::optional<DensityMatrix>, 4> out;
  const auto& probes = probe_states();
  for (const auto& s : report.states) {
    for (std::size_t k = 0; k < 4; ++k) {
      if (s.state.same_ray(probes[k]) && s.events > 0) out[k] = s.mle.rho;
    }
  }
  static constexpr const char* kNames[] = {"H", "V", "P", "R"};
  for (std::size_t k = 0; k < 4; ++k) {
    if (!out[k]) {
      throw ValidationError(std::string("process reconstruction: probe ") + kNames[k] +
                            " missing or without events");
    }
  }
  const std::array<DensityMatrix, 4> outputs{*out[0], *out[1], *out[2], *out[3]};
  return process_from_pairs(std::span<const PureState, 4>(probes),
                            std::span<const DensityMatrix, 4>(outputs));
}

std::optional<Basis> eigenbasis(const PureState& state) {
  for (Basis b : kAllBases) {
    const auto [plus, minus] = basis_states(b);
    if (state.same_ray(plus) || state.same_ray(minus)) return b;
  }
  return std::nullopt;
}

std::uint64_t scaled_pulses(std::uint64_t pulses, double db, double knee_db) {
  if (!(knee_db > 0.0)) return pulses;
  const double scale = std::pow(10.0, std::min(db, knee_db) / 10.0);
  const double n = std::round(static_cast<double>(pulses) * scale);
  if (!(n < 9.0e18)) throw ConfigError("scaled pulse count overflows");
  return static_cast<std::uint64_t>(n);
}

AttenuationPoint attenuation_point(const ExperimentConfig& base, double db,
                                   std::span<const std::string> state_names,
                                   std::int64_t window_ps, double knee_db,
                                   unsigned threads) {
  if (state_names.empty()) throw ConfigError("attenuation sweep needs at least one state");
  AttenuationPoint pt;
  pt.attenuation_db = db;
  pt.pulses_per_state = scaled_pulses(base.pulses, db, knee_db);
  char db_label[32];
  std::snprintf(db_label, sizeof db_label, "%.6g", db);
  for (const auto& name : state_names) {
    ExperimentConfig c = base;
    c.attenuation_db = db;
    c.pulses = pt.pulses_per_state;
    c.charlie_state = PureState::named(name);
    const auto basis = eigenbasis(c.charlie_state);
    if (!basis) throw ConfigError("state " + name + " is not a basis state");
    c.bob_basis = *basis;
    const bool plus_correct = c.charlie_state.same_ray(basis_states(*basis).first);
    // Long points are split into independent runs so the tag buffer stays
    // bounded; each part gets its own seed label.
    const std::uint64_t parts =
        (pt.pulses_per_state + kMaxPulsesPerRun - 1) / kMaxPulsesPerRun;
    for (std::uint64_t k = 0; k < parts; ++k) {
      c.pulses = pt.pulses_per_state / parts + (k < pt.pulses_per_state % parts ? 1 : 0);
      std::string label = std::string("att=") + db_label + "|state=" + name;
      if (parts > 1) label += "|part=" + std::to_string(k);
      c.seed = run_seed(base.seed, label);
      const MeasuredRun m = measure(c, window_ps, threads);
      pt.n_correct += plus_correct ? m.n_plus : m.n_minus;
      pt.n_wrong += plus_correct ? m.n_minus : m.n_plus;
      pt.duration_s += m.duration_s;
    }
  }
  pt.n_events = pt.n_correct + pt.n_wrong;
  const double n = static_cast<double>(pt.n_events);
  pt.rate_hz = n / pt.duration_s;
  // A zero count still carries an upper-bound sized error.
  pt.rate_sigma_hz = std::sqrt(std::max(n, 1.0)) / pt.duration_s;
  if (pt.n_events > 0) {
    const double a = static_cast<double>(pt.n_correct);
    const double b = static_cast<double>(pt.n_wrong);
    pt.visibility = (a - b) / (a + b);
    pt.visibility_sigma = visibility_sigma(a, b);
  }
  // Nominal window and link-only attenuation, as in the SNR definition.
  const auto& t = base.detector_table;
  LinkBudget lb;
  lb.attenuation_db = db;
  lb.n_hz = t[index(DetectorId::D5)].dark_rate_hz + t[index(DetectorId::D6)].dark_rate_hz;
  lb.tau_s = static_cast<double>(window_ps) * 1e-12;
  pt.snr = snr(lb).value;
  return pt;
}

LinkBudget budget_from_config(const ExperimentConfig& config, std::int64_t window_ps,
                              std::span<const std::string> state_names) {
  LinkBudget b;
  b.attenuation_db = config.attenuation_db;
  const auto& t = config.detector_table;
  b.n_hz = t[index(DetectorId::D5)].dark_rate_hz + t[index(DetectorId::D6)].dark_rate_hz;
  b.tau_s = dark_acceptance_s(window_ps, config.jitter_sigma_ps);
  // Three-folds without a photon for Bob still collect accidentals, so they
  // count towards the rate but act as loss for the signal.
  ThreeFoldYield pooled;
  auto add = [&](const ExperimentConfig& c) {
    const auto y = three_fold_yield(c);
    pooled.per_pulse += y.per_pulse;
    pooled.partnered += y.partnered;
  };
  if (state_names.empty()) {
    add(config);
  } else {
    for (const auto& name : state_names) {
      ExperimentConfig c = config;
      c.charlie_state = PureState::named(name);
      add(c);
    }
  }
  const double partner =
      pooled.per_pulse > 0.0 ? pooled.partnered / pooled.per_pulse : 1.0;
  const double eff =
      0.5 * (t[index(DetectorId::D5)].efficiency + t[index(DetectorId::D6)].efficiency) *
      partner;
  b.receiver_loss_db = eff > 0.0 ? -10.0 * std::log10(eff) : 0.0;
  return b;
}

std::vector<WindowSweepRow> window_sweep_run(const ExperimentConfig& config,
                                             std::span<const std::int64_t> taus_ps,
                                             unsigned threads) {
  const std::uint64_t parts = (config.pulses + kMaxPulsesPerRun - 1) / kMaxPulsesPerRun;
  if (parts <= 1) {
    const RunResult r = run(config, threads);
    return window_sweep(r.tags, taus_ps, config.charlie_state, config.bob_basis, threads);
  }
  std::vector<WindowSweepRow> pooled;
  for (std::uint64_t k = 0; k < parts; ++k) {
    ExperimentConfig c = config;
    c.pulses = config.pulses / parts + (k < config.pulses % parts ? 1 : 0);
    c.seed = run_seed(config.seed, "part=" + std::to_string(k));
    const RunResult r = run(c, threads);
    auto rows = window_sweep(r.tags, taus_ps, c.charlie_state, c.bob_basis, threads);
    if (pooled.empty()) {
      pooled = std::move(rows);
      continue;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      pooled[i].n_events += rows[i].n_events;
      pooled[i].n_correct += rows[i].n_correct;
      pooled[i].n_wrong += rows[i].n_wrong;
      pooled[i].n_ambiguous += rows[i].n_ambiguous;
    }
  }
  for (auto& row : pooled) fill_statistics(row);
  return pooled;
}

}  // namespace qtele
