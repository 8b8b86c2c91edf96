#include "qtele/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <thread>

#include "qtele/errors.hpp"
#include "sampling.hpp"

namespace qtele {

namespace {

using detail::Rng;
using detail::uniform01;

constexpr std::uint64_t kStreamFullBlock = 1;
constexpr std::uint64_t kStreamActiveBlock = 2;
constexpr std::uint64_t kStreamCluster = 3;
constexpr std::uint64_t kFullBlockSlots = 1ULL << 16;
constexpr std::uint64_t kActiveBlockSlots = 1ULL << 22;
constexpr std::uint64_t kClusterGroupSlots = 1ULL << 24;

struct PortOutcome {
  std::uint8_t plus = 0;
  std::uint8_t minus = 0;
};

struct PortDistribution {
  std::vector<PortOutcome> outcomes;
  detail::Categorical pick;
};

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// Photon-number distribution over Bob's (+, -) detector ports after the
// polarization operation `m` (m(k, p): amplitude for polarization p -> port k).
PortDistribution port_distribution(const std::vector<fock::BobAmplitude>& bob,
                                   const Matrix2c& m) {
  std::map<std::pair<int, int>, Complex> amps;
  for (const auto& b : bob) {
    std::map<std::pair<int, int>, Complex> poly{{{0, 0}, 1.0}};
    auto multiply = [&](int pol) {
      std::map<std::pair<int, int>, Complex> next;
      for (const auto& [mono, c] : poly) {
        next[{mono.first + 1, mono.second}] += c * m(0, pol);
        next[{mono.first, mono.second + 1}] += c * m(1, pol);
      }
      poly = std::move(next);
    };
    for (int i = 0; i < b.n_h; ++i) multiply(0);
    for (int i = 0; i < b.n_v; ++i) multiply(1);
    const double in_norm = factorial(b.n_h) * factorial(b.n_v);
    for (const auto& [mono, c] : poly) {
      const double out_norm = factorial(mono.first) * factorial(mono.second);
      amps[mono] += b.amplitude * c * std::sqrt(out_norm / in_norm);
    }
  }
  PortDistribution d;
  std::vector<double> w;
  for (const auto& [mono, a] : amps) {
    d.outcomes.push_back({static_cast<std::uint8_t>(mono.first),
                          static_cast<std::uint8_t>(mono.second)});
    w.push_back(std::norm(a));
  }
  d.pick = detail::Categorical(w);
  return d;
}

std::int64_t quantize(double t_ps, std::int64_t res) {
  if (!(t_ps > 0.0)) return 0;
  const auto n = std::llround(t_ps / static_cast<double>(res));
  return static_cast<std::int64_t>(n) * res;
}

struct Accumulator {
  std::vector<TimeTag> tags;
  std::array<std::array<std::uint64_t, 2>, 2> counts{};  // [outcome][+/-]
  BsmTally tally;
  std::uint64_t materialized = 0;
  std::uint64_t active = 0;

  void merge(Accumulator&& o) {
    tags.insert(tags.end(), o.tags.begin(), o.tags.end());
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) counts[i][j] += o.counts[i][j];
    for (int i = 0; i < 3; ++i) tally.by_outcome[i] += o.tally.by_outcome[i];
    materialized += o.materialized;
    active += o.active;
  }
};

// Everything about a single pulse that does not change during a run.
class PulseModel {
 public:
  explicit PulseModel(const ExperimentConfig& cfg) : cfg_(cfg) {
    const auto state = fock::beam_splitter(
        fock::spdc_state(cfg.source, cfg.charlie_state, cfg.n_max));
    branches_ = fock::branch_on_non_bob(state);

    const auto& t = cfg.detector_table;
    eta_ = cfg.eta();
    eff_plus_ = t[index(DetectorId::D5)].efficiency;
    eff_minus_ = t[index(DetectorId::D6)].efficiency;
    eff_bob_max_ = std::max(eff_plus_, eff_minus_);
    envelope_ = eta_ * eff_bob_max_;
    slot_s_ = static_cast<double>(cfg.rep_period_ps) * 1e-12;

    std::vector<double> all, nonvac, active, inactive, lit;
    for (std::size_t i = 0; i < branches_.size(); ++i) {
      const auto& b = branches_[i];
      int n_bob = -1;
      for (const auto& ba : b.bob) {
        const int n = ba.n_h + ba.n_v;
        if (n_bob >= 0 && n != n_bob && std::norm(ba.amplitude) > 0.0) {
          throw LogicError("pulse model: bob photon number not fixed by herald");
        }
        n_bob = std::max(n_bob, n);
      }
      bob_photons_.push_back(std::max(n_bob, 0));
      det_photons_.push_back(fock::detector_photons(state.layout(), b.herald));
      const bool empty = fock::total_photons(b.herald) == 0 && n_bob <= 0;
      if (empty) vacuum_ = i;
      const double w_act = detail::any_of(bob_photons_.back(), envelope_);
      all.push_back(b.probability);
      nonvac.push_back(empty ? 0.0 : b.probability);
      active.push_back(b.probability * w_act);
      inactive.push_back(b.probability * (1.0 - w_act));
      lit.push_back(fock::total_photons(b.herald) == 0 ? 0.0 : inactive.back());
    }
    pick_nonvac_ = detail::Categorical(nonvac);
    pick_active_ = detail::Categorical(active);
    pick_inactive_ = detail::Categorical(inactive);
    pick_inactive_lit_ = detail::Categorical(lit);
    p_inactive_lit_ = pick_inactive_.empty()
                          ? 0.0
                          : pick_inactive_lit_.total() / pick_inactive_.total();
    p_photons_ = pick_nonvac_.total();
    p_bob_photon_ = pick_active_.total();

    for (auto d : kAllDetectors) {
      dark_mean_[index(d)] = t[index(d)].dark_rate_hz * slot_s_;
    }
    const auto [plus, minus] = basis_states(cfg.bob_basis);
    basis_adjoint_.row(0) = plus.ket().adjoint();
    basis_adjoint_.row(1) = minus.ket().adjoint();

    if (cfg.drift_angle_rad == 0.0) {
      for (int ff = 0; ff < 2; ++ff) {
        const Matrix2c m = measurement_matrix(ff == 1, 0);
        auto& cache = ports_[ff];
        for (std::size_t i = 0; i < branches_.size(); ++i) {
          cache.push_back(bob_photons_[i] > 0
                              ? port_distribution(branches_[i].bob, m)
                              : PortDistribution{});
        }
      }
    }
  }

  const ExperimentConfig& cfg() const { return cfg_; }
  double p_photons() const { return p_photons_; }
  double p_bob_photon() const { return p_bob_photon_; }
  double dark_mean(DetectorId d) const { return dark_mean_[index(d)]; }

  double dark_mean_total(bool bob_only) const {
    double s = 0.0;
    for (auto d : kAllDetectors) {
      const bool is_bob = d == DetectorId::D5 || d == DetectorId::D6;
      if (!bob_only || is_bob) s += dark_mean_[index(d)];
    }
    return s;
  }

  std::int64_t epoch_ps(std::uint64_t slot) const {
    return static_cast<std::int64_t>(slot) * cfg_.rep_period_ps +
           cfg_.rep_period_ps / 2;
  }

  enum class BobMode { None, Full, Envelope };

  // Photon content of one slot; returns whether Bob saw exactly one genuine
  // click (for bookkeeping) and emits all photon tags.
  void photons(std::uint64_t slot, std::size_t branch, BobMode bob_mode,
               Rng& rng, Accumulator& acc) const {
    const auto& dp = det_photons_[branch];
    const auto& t = cfg_.detector_table;
    const std::int64_t epoch = epoch_ps(slot);
    ClickPattern pattern;
    bool trig = false;
    for (std::size_t k = 0; k < 5; ++k) {
      if (dp[k] == 0) continue;
      const DetectorId d = k < 4 ? static_cast<DetectorId>(k) : DetectorId::Trig;
      if (uniform01(rng) < detail::any_of(dp[k], t[index(d)].efficiency)) {
        if (k < 4) pattern.set(d); else trig = true;
        emit(d, epoch, rng, acc);
      }
    }

    bool plus = false;
    bool minus = false;
    const BsmOutcome outcome = classify_pattern(pattern);
    if (bob_mode != BobMode::None && bob_photons_[branch] > 0) {
      const bool flip = cfg_.feed_forward && outcome == BsmOutcome::PsiPlus;
      PortOutcome po;
      if (cfg_.drift_angle_rad == 0.0) {
        const auto& pd = ports_[flip ? 1 : 0][branch];
        po = pd.outcomes[pd.pick(rng)];
      } else {
        const auto pd = port_distribution(branches_[branch].bob,
                                          measurement_matrix(flip, epoch));
        po = pd.outcomes[pd.pick(rng)];
      }
      if (bob_mode == BobMode::Full) {
        plus = uniform01(rng) < detail::any_of(po.plus, eta_ * eff_plus_);
        minus = uniform01(rng) < detail::any_of(po.minus, eta_ * eff_minus_);
      } else {
        surviving_clicks(po, rng, plus, minus);
      }
      if (plus) emit(DetectorId::D5, epoch, rng, acc);
      if (minus) emit(DetectorId::D6, epoch, rng, acc);
    }

    if (trig && plus != minus) {
      acc.tally.by_outcome[static_cast<std::size_t>(outcome)] += 1;
      if (outcome != BsmOutcome::Inconclusive) {
        acc.counts[static_cast<std::size_t>(outcome)][plus ? 0 : 1] += 1;
      }
    }
  }

  void darks(std::uint64_t slot, DetectorId d, std::uint64_t n, Rng& rng,
             Accumulator& acc) const {
    const double start = static_cast<double>(slot) *
                         static_cast<double>(cfg_.rep_period_ps);
    for (std::uint64_t i = 0; i < n; ++i) {
      const double t = start + uniform01(rng) * static_cast<double>(cfg_.rep_period_ps);
      acc.tags.push_back({d, quantize(t, cfg_.tag_resolution_ps)});
    }
  }

  // At least one dark click among `ds`, spread in proportion to their rates.
  void forced_darks(std::uint64_t slot, std::span<const DetectorId> ds,
                    Rng& rng, Accumulator& acc) const {
    double total = 0.0;
    std::vector<double> w;
    for (auto d : ds) {
      w.push_back(dark_mean(d));
      total += w.back();
    }
    const auto n = detail::zero_truncated_poisson(total, rng);
    detail::Categorical pick(w);
    for (std::uint64_t i = 0; i < n; ++i) {
      darks(slot, ds[pick(rng)], 1, rng, acc);
    }
  }

  std::size_t pick_nonvac(Rng& rng) const { return pick_nonvac_(rng); }
  std::size_t pick_active(Rng& rng) const { return pick_active_(rng); }
  std::size_t pick_inactive(Rng& rng) const { return pick_inactive_(rng); }
  /// Inactive branch given that Alice's side holds at least one photon.
  std::size_t pick_inactive_lit(Rng& rng) const { return pick_inactive_lit_(rng); }
  /// P(Alice's side holds a photon | no Bob photon survives).
  double p_inactive_lit() const { return p_inactive_lit_; }
  std::size_t vacuum() const { return vacuum_; }

 private:
  Matrix2c measurement_matrix(bool flip, std::int64_t time_ps) const {
    Matrix2c u = drift_rotation(time_ps, cfg_);
    if (flip) u = pauli(3) * u;
    return basis_adjoint_ * u;
  }

  void emit(DetectorId d, std::int64_t epoch, Rng& rng, Accumulator& acc) const {
    double t = static_cast<double>(epoch);
    if (cfg_.jitter_sigma_ps > 0.0) {
      t += std::normal_distribution<double>(0.0, cfg_.jitter_sigma_ps)(rng);
    }
    acc.tags.push_back({d, quantize(t, cfg_.tag_resolution_ps)});
  }

  // Bob's photons after the link, given that at least one survives the
  // envelope efficiency eta * max(eff); each survivor is then accepted by its
  // own detector with eff / max(eff).
  void surviving_clicks(const PortOutcome& po, Rng& rng, bool& plus,
                        bool& minus) const {
    const int n = po.plus + po.minus;
    const double q = envelope_;
    std::vector<double> w(static_cast<std::size_t>(n) + 1, 0.0);
    for (int s = 1; s <= n; ++s) {
      w[static_cast<std::size_t>(s)] =
          factorial(n) / (factorial(s) * factorial(n - s)) * std::pow(q, s) *
          std::pow(1.0 - q, n - s);
    }
    const int s = static_cast<int>(detail::Categorical(w)(rng));
    int rem_plus = po.plus;
    int rem_total = n;
    int s_plus = 0;
    for (int i = 0; i < s; ++i) {
      if (uniform01(rng) * rem_total < rem_plus) {
        ++s_plus;
        --rem_plus;
      }
      --rem_total;
    }
    const int s_minus = s - s_plus;
    plus = uniform01(rng) < detail::any_of(s_plus, eff_plus_ / eff_bob_max_);
    minus = uniform01(rng) < detail::any_of(s_minus, eff_minus_ / eff_bob_max_);
  }

  const ExperimentConfig& cfg_;
  std::vector<fock::Branch> branches_;
  std::vector<std::array<std::uint8_t, 5>> det_photons_;
  std::vector<int> bob_photons_;
  std::size_t vacuum_ = std::numeric_limits<std::size_t>::max();
  detail::Categorical pick_nonvac_, pick_active_, pick_inactive_,
      pick_inactive_lit_;
  double p_inactive_lit_ = 0.0;
  double p_photons_ = 0.0;
  double p_bob_photon_ = 0.0;
  double eta_ = 1.0;
  double eff_plus_ = 0.0, eff_minus_ = 0.0, eff_bob_max_ = 0.0;
  double envelope_ = 0.0;
  double slot_s_ = 0.0;
  std::array<double, kDetectorCount> dark_mean_{};
  Matrix2c basis_adjoint_;
  std::array<std::vector<PortDistribution>, 2> ports_;
};

// Skips to the next slot in which an event of per-slot probability p occurs.
std::uint64_t next_event(std::uint64_t from, double p, Rng& rng) {
  if (p >= 1.0) return from;
  if (!(p > 0.0)) return std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t skip = std::geometric_distribution<std::uint64_t>(p)(rng);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max();
  return skip > limit - from ? limit : from + skip;
}

// Given that A (probability pa) or D (probability pd) happened, decides which.
std::pair<bool, bool> union_case(double pa, double pd, Rng& rng) {
  const double both = pa * pd;
  const double only_a = pa - both;
  const double only_d = pd - both;
  const double u = uniform01(rng) * (only_a + only_d + both);
  if (u < only_a) return {true, false};
  if (u < only_a + only_d) return {false, true};
  return {true, true};
}

template <typename Fn>
std::vector<Accumulator> parallel_chunks(std::size_t n_items, unsigned threads,
                                         Fn&& fn) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(threads, n_items));
  std::vector<Accumulator> parts(workers);
  auto body = [&](std::size_t w) {
    const std::size_t lo = n_items * w / workers;
    const std::size_t hi = n_items * (w + 1) / workers;
    for (std::size_t i = lo; i < hi; ++i) fn(i, parts[w]);
  };
  if (workers == 1) {
    body(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body, w);
  }
  return parts;
}

Accumulator run_full(const PulseModel& model, unsigned threads) {
  const auto& cfg = model.cfg();
  const std::uint64_t blocks = (cfg.pulses + kFullBlockSlots - 1) / kFullBlockSlots;
  const double p_dark = -std::expm1(-model.dark_mean_total(false));
  const double p_photons = model.p_photons();
  const double p_any = p_photons + p_dark - p_photons * p_dark;
  static constexpr std::array<DetectorId, kDetectorCount> kAll = kAllDetectors;

  auto parts = parallel_chunks(blocks, threads, [&](std::size_t b, Accumulator& acc) {
    Rng rng(detail::derive_seed(cfg.seed, kStreamFullBlock, b));
    const std::uint64_t lo = b * kFullBlockSlots;
    const std::uint64_t hi = std::min(cfg.pulses, lo + kFullBlockSlots);
    acc.materialized += hi - lo;
    for (std::uint64_t k = next_event(lo, p_any, rng); k < hi;
         k = next_event(k + 1, p_any, rng)) {
      const auto [photons, dark] = union_case(p_photons, p_dark, rng);
      ++acc.active;
      if (photons) {
        model.photons(k, model.pick_nonvac(rng), PulseModel::BobMode::Full, rng,
                      acc);
      }
      if (dark) model.forced_darks(k, kAll, rng, acc);
    }
  });
  Accumulator total;
  for (auto& p : parts) total.merge(std::move(p));
  return total;
}

struct ActiveSlot {
  std::uint64_t slot;
  bool photon;  // at least one Bob photon survives the envelope efficiency
  bool dark;    // at least one Bob dark click
};

Accumulator run_bob_windows(const PulseModel& model, unsigned threads) {
  const auto& cfg = model.cfg();
  const double p_dark = -std::expm1(-model.dark_mean_total(true));
  const double p_photon = model.p_bob_photon();
  const double p_active = p_photon + p_dark - p_photon * p_dark;

  // Pass 1: which slots hold a Bob click candidate.
  const std::uint64_t blocks =
      (cfg.pulses + kActiveBlockSlots - 1) / kActiveBlockSlots;
  std::vector<std::vector<ActiveSlot>> per_block(blocks);
  {
    std::vector<std::jthread> pool;
    const unsigned workers =
        static_cast<unsigned>(std::max<std::uint64_t>(1, std::min<std::uint64_t>(threads, blocks)));
    auto body = [&](unsigned w) {
      for (std::uint64_t b = w; b < blocks; b += workers) {
        Rng rng(detail::derive_seed(cfg.seed, kStreamActiveBlock, b));
        const std::uint64_t lo = b * kActiveBlockSlots;
        const std::uint64_t hi = std::min(cfg.pulses, lo + kActiveBlockSlots);
        for (std::uint64_t k = next_event(lo, p_active, rng); k < hi;
             k = next_event(k + 1, p_active, rng)) {
          const auto [photon, dark] = union_case(p_photon, p_dark, rng);
          per_block[b].push_back({k, photon, dark});
        }
      }
    };
    if (workers == 1) {
      body(0);
    } else {
      for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body, w);
    }
  }
  std::vector<ActiveSlot> active;
  for (auto& v : per_block) active.insert(active.end(), v.begin(), v.end());
  per_block.clear();

  // Pass 2: merge neighbourhoods into clusters.
  const double reach = static_cast<double>(cfg.coverage_ps) +
                       10.0 * cfg.jitter_sigma_ps +
                       2.0 * static_cast<double>(cfg.tag_resolution_ps);
  const auto halo = static_cast<std::uint64_t>(
      std::ceil(reach / static_cast<double>(cfg.rep_period_ps)));
  struct Cluster {
    std::uint64_t first, last;
    std::size_t active_begin, active_end;
  };
  std::vector<Cluster> clusters;
  for (std::size_t i = 0; i < active.size(); ++i) {
    const std::uint64_t k = active[i].slot;
    const std::uint64_t lo = k > halo ? k - halo : 0;
    const std::uint64_t hi = std::min(cfg.pulses - 1, k + halo);
    if (!clusters.empty() && lo <= clusters.back().last + 1) {
      clusters.back().last = std::max(clusters.back().last, hi);
      clusters.back().active_end = i + 1;
    } else {
      clusters.push_back({lo, hi, i, i + 1});
    }
  }

  static constexpr std::array<DetectorId, 2> kBob{DetectorId::D5, DetectorId::D6};
  static constexpr std::array<DetectorId, 5> kAlice{
      DetectorId::D1, DetectorId::D2, DetectorId::D3, DetectorId::D4,
      DetectorId::Trig};
  double alice_dark = 0.0;
  for (auto d : kAlice) alice_dark += model.dark_mean(d);
  const double p_alice_dark = -std::expm1(-alice_dark);
  const double p_lit = model.p_inactive_lit();
  const double p_quiet = (1.0 - p_lit) * (1.0 - p_alice_dark);

  // Clusters are grouped by the slot range they start in; each group draws
  // from one generator so seeding cost is shared and results do not depend
  // on the number of workers.
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const std::uint64_t key = clusters[c].first / kClusterGroupSlots;
    if (groups.empty() || clusters[groups.back().first].first / kClusterGroupSlots != key) {
      groups.push_back({c, c + 1});
    } else {
      groups.back().second = c + 1;
    }
  }

  auto parts = parallel_chunks(groups.size(), threads, [&](std::size_t g, Accumulator& acc) {
    Rng rng(detail::derive_seed(cfg.seed, kStreamCluster,
                                clusters[groups[g].first].first / kClusterGroupSlots));
    for (std::size_t c = groups[g].first; c < groups[g].second; ++c) {
      const Cluster& cl = clusters[c];
      std::size_t next_active = cl.active_begin;
      for (std::uint64_t k = cl.first; k <= cl.last; ++k) {
        ++acc.materialized;
        if (next_active < cl.active_end && active[next_active].slot == k) {
          const ActiveSlot& a = active[next_active++];
          ++acc.active;
          if (a.photon) {
            model.photons(k, model.pick_active(rng), PulseModel::BobMode::Envelope,
                          rng, acc);
          } else {
            model.photons(k, model.pick_inactive(rng), PulseModel::BobMode::None,
                          rng, acc);
          }
          if (uniform01(rng) < p_alice_dark) model.forced_darks(k, kAlice, rng, acc);
          if (a.dark) model.forced_darks(k, kBob, rng, acc);
          continue;
        }
        if (uniform01(rng) < p_quiet) continue;
        const auto [lit, dark] = union_case(p_lit, p_alice_dark, rng);
        if (lit) {
          model.photons(k, model.pick_inactive_lit(rng), PulseModel::BobMode::None,
                        rng, acc);
        }
        if (dark) model.forced_darks(k, kAlice, rng, acc);
      }
    }
  });
  Accumulator total;
  for (auto& p : parts) total.merge(std::move(p));
  return total;
}

}  // namespace

std::array<DetectorSpec, kDetectorCount> default_detector_table() {
  std::array<DetectorSpec, kDetectorCount> t{};
  for (auto& d : t) d = DetectorSpec{0.5, 300.0};
  t[index(DetectorId::D5)].dark_rate_hz = 180.0;
  t[index(DetectorId::D6)].dark_rate_hz = 400.0;
  return t;
}

double ExperimentConfig::eta() const {
  return std::pow(10.0, -attenuation_db / 10.0);
}

double ExperimentConfig::duration_ps() const {
  return static_cast<double>(pulses) * static_cast<double>(rep_period_ps);
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  source.validate();
  if (n_max < 2 || n_max > fock::kLargestNMax) fail("n_max must lie in [2, 6]");
  if (source.g1 > 0.0 && source.g2 > 0.0 && n_max < 4) {
    fail("n_max too small to hold one pair from each source");
  }
  if (!(attenuation_db >= 0.0) || !std::isfinite(attenuation_db)) {
    fail("attenuation_db must be a finite value >= 0");
  }
  if (rep_period_ps <= 0) fail("rep_period_ps must be > 0");
  if (pulses == 0) fail("pulses must be > 0");
  for (auto d : kAllDetectors) {
    const auto& s = detector_table[index(d)];
    if (!(s.efficiency >= 0.0 && s.efficiency <= 1.0)) {
      fail("efficiency of " + std::string(detector_name(d)) + " outside [0, 1]");
    }
    if (!(s.dark_rate_hz >= 0.0) || !std::isfinite(s.dark_rate_hz)) {
      fail("dark_rate_hz of " + std::string(detector_name(d)) + " must be >= 0");
    }
  }
  if (!(jitter_sigma_ps >= 0.0) || !std::isfinite(jitter_sigma_ps)) {
    fail("jitter_sigma_ps must be >= 0");
  }
  if (tag_resolution_ps <= 0) fail("tag_resolution_ps must be > 0");
  if (ff_delay_ps < 0) fail("ff_delay_ps must be >= 0");
  if (!(drift_angle_rad >= 0.0) || !std::isfinite(drift_angle_rad)) {
    fail("drift_angle_rad must be >= 0");
  }
  if (!(drift_axis.norm() > 0.0) || !drift_axis.allFinite()) {
    fail("drift_axis must be a non-zero vector");
  }
  if (coverage_ps < 0) fail("coverage_ps must be >= 0");
  constexpr auto kMax = std::numeric_limits<std::int64_t>::max();
  const auto slots_limit =
      static_cast<std::uint64_t>((kMax - ff_delay_ps) / rep_period_ps) - 2;
  if (pulses > slots_limit) fail("run exceeds the 2^63 ps time axis");
}

RunResult run(const ExperimentConfig& config, unsigned threads) {
  config.validate();
  const PulseModel model(config);
  Accumulator acc = config.tag_scope == TagScope::Full
                        ? run_full(model, threads)
                        : run_bob_windows(model, threads);
  std::sort(acc.tags.begin(), acc.tags.end());

  RunResult out;
  out.tags = std::move(acc.tags);
  for (std::size_t o = 0; o < 2; ++o) {
    out.counts.push_back(CountRecord{config.bob_basis, static_cast<BsmOutcome>(o),
                                     acc.counts[o][0], acc.counts[o][1]});
  }
  out.tally = acc.tally;
  out.stats.materialized_slots = acc.materialized;
  out.stats.active_slots = acc.active;
  out.stats.duration_s = config.duration_ps() * 1e-12;
  return out;
}

DensityMatrix apply_feed_forward(const DensityMatrix& rho, BsmOutcome outcome) {
  switch (outcome) {
    case BsmOutcome::PsiMinus:
      return rho;
    case BsmOutcome::PsiPlus:
      return DensityMatrix(pauli(3) * rho.matrix() * pauli(3));
    case BsmOutcome::Inconclusive:
      break;
  }
  throw LogicError("apply_feed_forward: no correction for an inconclusive BSM");
}

Matrix2c drift_rotation(std::int64_t time_ps, const ExperimentConfig& config) {
  if (!(config.drift_angle_rad >= 0.0)) {
    throw ConfigError("drift_angle_rad must be >= 0");
  }
  if (config.drift_angle_rad == 0.0) return Matrix2c::Identity();
  const double period = config.duration_ps();
  const double theta =
      config.drift_angle_rad *
      std::sin(2.0 * std::numbers::pi * static_cast<double>(time_ps) / period);
  return rotation(config.drift_axis, theta);
}

ThreeFoldYield three_fold_yield(const ExperimentConfig& config) {
  config.validate();
  const auto state = fock::beam_splitter(
      fock::spdc_state(config.source, config.charlie_state, config.n_max));
  const auto& t = config.detector_table;
  ThreeFoldYield y;
  for (const auto& b : fock::branch_on_non_bob(state)) {
    const auto dp = fock::detector_photons(state.layout(), b.herald);
    std::array<double, 4> click{};
    for (std::size_t k = 0; k < 4; ++k) {
      click[k] = detail::any_of(dp[k], t[k].efficiency);
    }
    double valid = 0.0;
    for (unsigned mask = 0; mask < 16; ++mask) {
      ClickPattern pattern;
      double p = 1.0;
      for (std::size_t k = 0; k < 4; ++k) {
        const bool on = (mask >> k) & 1U;
        if (on) pattern.set(static_cast<DetectorId>(k));
        p *= on ? click[k] : 1.0 - click[k];
      }
      if (classify_pattern(pattern) != BsmOutcome::Inconclusive) valid += p;
    }
    const double w = b.probability * valid *
                     detail::any_of(dp[4], t[index(DetectorId::Trig)].efficiency);
    y.per_pulse += w;
    bool bob = false;
    for (const auto& ba : b.bob) {
      if (ba.n_h + ba.n_v > 0 && std::norm(ba.amplitude) > 0.0) bob = true;
    }
    if (bob) y.partnered += w;
  }
  return y;
}

double calibrate_g(double target_pair_rate_hz, double rep_rate_hz,
                   double assumed_two_fold_efficiency) {
  if (!(target_pair_rate_hz > 0.0) || !(rep_rate_hz > 0.0) ||
      !(assumed_two_fold_efficiency > 0.0)) {
    throw CalibrationError("calibrate_g: all inputs must be > 0");
  }
  const double g2 =
      target_pair_rate_hz / (rep_rate_hz * assumed_two_fold_efficiency);
  if (g2 > fock::SourceParams::kMaxGainSquared * (1.0 + 1e-12)) {
    throw CalibrationError(
        "calibrate_g: pair probability per pulse " + std::to_string(g2) +
        " exceeds the small-gain bound g^2 <= 0.2; raise the assumed "
        "efficiency or lower the target rate");
  }
  return std::sqrt(g2);
}

}  // namespace qtele
