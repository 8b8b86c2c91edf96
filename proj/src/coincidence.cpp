#include "qtele/coincidence.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include "qtele/errors.hpp"

namespace qtele {

namespace {

struct GroupScan {
  std::size_t size = 0;  // tags in [anchor, anchor + tau]
  std::array<int, kDetectorCount> hits{};
  std::int64_t trig_time = 0;
};

}  // namespace

FourfoldFinder::FourfoldFinder(std::int64_t tau_ps) : tau_(tau_ps) {
  if (tau_ps <= 0) throw ValidationError("coincidence window must be > 0 ps");
}

void FourfoldFinder::push(const TimeTag& tag) {
  if (finished_) throw LogicError("FourfoldFinder: push after finish");
  if (last_ && tag < *last_) {
    throw ValidationError("tag stream is not sorted by (time, detector)");
  }
  last_ = tag;
  settle(tag.time_ps);
  window_.push_back(tag);
  max_window_ = std::max(max_window_, window_.size());
}

FourfoldResult FourfoldFinder::finish() {
  if (!finished_) {
    settle(std::nullopt);
    finished_ = true;
  }
  return std::move(result_);
}

// Resolves every anchor whose window closed before `now` (all of them when
// `now` is empty).
void FourfoldFinder::settle(std::optional<std::int64_t> now) {
  while (!window_.empty()) {
    const std::int64_t anchor = window_.front().time_ps;
    const std::int64_t close =
        anchor > std::numeric_limits<std::int64_t>::max() - tau_
            ? std::numeric_limits<std::int64_t>::max()
            : anchor + tau_;
    if (now && *now <= close) return;

    GroupScan g;
    for (const auto& t : window_) {
      if (t.time_ps > close) break;
      ++g.size;
      if (t.detector == DetectorId::Trig && g.hits[index(t.detector)] == 0) {
        g.trig_time = t.time_ps;
      }
      ++g.hits[index(t.detector)];
    }

    ClickPattern pattern;
    int bsm_tags = 0;
    for (std::size_t d = 0; d < 4; ++d) {
      if (g.hits[d] > 0) pattern.set(static_cast<DetectorId>(d));
      bsm_tags += g.hits[d];
    }
    const int trig = g.hits[index(DetectorId::Trig)];
    const int plus = g.hits[index(DetectorId::D5)];
    const int minus = g.hits[index(DetectorId::D6)];

    bool has_pair = false;
    for (std::size_t i = 0; i < 4 && !has_pair; ++i) {
      for (std::size_t j = i + 1; j < 4 && !has_pair; ++j) {
        if (pattern.has(static_cast<DetectorId>(i)) &&
            pattern.has(static_cast<DetectorId>(j))) {
          const auto o = classify_pattern(ClickPattern::of(
              {static_cast<DetectorId>(i), static_cast<DetectorId>(j)}));
          has_pair = o != BsmOutcome::Inconclusive;
        }
      }
    }

    if (trig == 0 || plus + minus == 0 || !has_pair) {
      window_.pop_front();
      continue;
    }

    const bool clean = trig == 1 && plus + minus == 1 && bsm_tags == 2;
    if (clean) {
      FourfoldEvent ev;
      ev.bsm_pattern = pattern;
      ev.outcome = classify_pattern(pattern);
      ev.bob_detector = plus == 1 ? DetectorId::D5 : DetectorId::D6;
      ev.trig_time_ps = g.trig_time;
      ev.epoch_time_ps = anchor;
      result_.events.push_back(ev);
    } else {
      ++result_.ambiguous;
    }
    window_.erase(window_.begin(),
                  window_.begin() + static_cast<std::ptrdiff_t>(g.size));
  }
}

FourfoldResult find_fourfolds(std::span<const TimeTag> tags, std::int64_t tau_ps) {
  FourfoldFinder finder(tau_ps);
  for (const auto& t : tags) finder.push(t);
  return finder.finish();
}

double visibility_sigma(double correct, double wrong) {
  const double n = correct + wrong;
  if (!(n > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(4.0 * correct * wrong / (n * n * n));
}

void fill_statistics(WindowSweepRow& r) {
  r.visibility.reset();
  r.visibility_sigma.reset();
  r.sigma_violation.reset();
  if (r.n_events == 0) return;
  const double a = static_cast<double>(r.n_correct);
  const double b = static_cast<double>(r.n_wrong);
  const double v = (a - b) / (a + b);
  const double s = visibility_sigma(a, b);
  r.visibility = v;
  r.visibility_sigma = s;
  const double excess = v - 1.0 / 3.0;
  r.sigma_violation = s > 0.0 ? excess / s
                              : std::copysign(std::numeric_limits<double>::infinity(),
                                              excess);
}

std::vector<WindowSweepRow> window_sweep(std::span<const TimeTag> tags,
                                         std::span<const std::int64_t> taus_ps,
                                         const PureState& charlie_state,
                                         Basis bob_basis, unsigned threads) {
  const auto [plus_state, minus_state] = basis_states(bob_basis);
  DetectorId correct;
  if (charlie_state.same_ray(plus_state)) {
    correct = DetectorId::D5;
  } else if (charlie_state.same_ray(minus_state)) {
    correct = DetectorId::D6;
  } else {
    throw ValidationError(
        "window_sweep: Charlie's state is not an eigenstate of Bob's basis");
  }
  for (auto tau : taus_ps) {
    if (tau <= 0) throw ValidationError("window_sweep: window must be > 0 ps");
  }
  for (std::size_t i = 1; i < tags.size(); ++i) {
    if (tags[i] < tags[i - 1]) {
      throw ValidationError("tag stream is not sorted by (time, detector)");
    }
  }

  std::vector<WindowSweepRow> rows(taus_ps.size());
  auto one = [&](std::size_t i) {
    const auto res = find_fourfolds(tags, taus_ps[i]);
    WindowSweepRow& r = rows[i];
    r.tau_ps = taus_ps[i];
    r.n_events = res.events.size();
    r.n_ambiguous = res.ambiguous;
    for (const auto& e : res.events) {
      (e.bob_detector == correct ? r.n_correct : r.n_wrong) += 1;
    }
    fill_statistics(r);
  };
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(threads, rows.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < rows.size(); ++i) one(i);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < rows.size(); i += workers) one(i);
      });
    }
  }
  return rows;
}

double accidental_rate(double three_fold_hz, double bob_dark_hz,
                       double bob_photons_per_pulse, std::int64_t tau_ps,
                       std::int64_t rep_period_ps) {
  if (three_fold_hz < 0.0 || bob_dark_hz < 0.0 || bob_photons_per_pulse < 0.0 ||
      tau_ps < 0 || rep_period_ps <= 0) {
    throw ValidationError("accidental_rate: rates and window must be >= 0");
  }
  const double tau_s = static_cast<double>(tau_ps) * 1e-12;
  const double neighbours = static_cast<double>(tau_ps / rep_period_ps);
  return three_fold_hz * (bob_dark_hz * tau_s + bob_photons_per_pulse * neighbours);
}

double dark_acceptance_s(std::int64_t tau_ps, double jitter_sigma_ps) {
  const double spread = 3.0 * jitter_sigma_ps / std::sqrt(std::numbers::pi);
  return std::max(0.0, 2.0 * static_cast<double>(tau_ps) - spread) * 1e-12;
}

}  // namespace qtele
