#include <doctest.h>

#include <algorithm>
#include <random>

#include "qtele/coincidence.hpp"
#include "qtele/errors.hpp"

using namespace qtele;
using D = DetectorId;

namespace {

std::vector<TimeTag> sorted(std::vector<TimeTag> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// Planted four-folds every `spacing` ps plus uniform single clicks.
struct Synthetic {
  std::vector<TimeTag> tags;
  std::vector<std::int64_t> planted;  // trigger times
};

Synthetic synthetic(int events, double noise_per_ps, std::int64_t spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Synthetic s;
  const std::int64_t spacing = 1'000'000;
  std::uniform_int_distribution<std::int64_t> jitter(0, spread);
  for (int k = 0; k < events; ++k) {
    const std::int64_t t0 = (k + 1) * spacing;
    const bool minus = rng() & 1;
    s.tags.push_back({minus ? D::D1 : D::D3, t0 + jitter(rng)});
    s.tags.push_back({minus ? D::D4 : D::D4, t0 + jitter(rng)});
    s.tags.push_back({D::Trig, t0 + jitter(rng)});
    s.tags.push_back({(rng() & 1) ? D::D5 : D::D6, t0 + jitter(rng)});
    s.planted.push_back(t0);
  }
  const std::int64_t span = (events + 1) * spacing;
  std::poisson_distribution<int> pn(noise_per_ps * static_cast<double>(span));
  std::uniform_int_distribution<std::int64_t> where(0, span);
  const int n = pn(rng);
  for (int k = 0; k < n; ++k) s.tags.push_back({kAllDetectors[rng() % 7], where(rng)});
  s.tags = sorted(std::move(s.tags));
  return s;
}

// Most tags in any closed interval of length tau.
std::size_t densest(const std::vector<TimeTag>& tags, std::int64_t tau) {
  std::size_t best = 0, lo = 0;
  for (std::size_t hi = 0; hi < tags.size(); ++hi) {
    while (tags[hi].time_ps - tags[lo].time_ps > tau) ++lo;
    best = std::max(best, hi - lo + 1);
  }
  return best;
}

}  // namespace

TEST_SUITE("coincidence") {

TEST_CASE("worked examples") {
  const auto tags = sorted({{D::D1, 0}, {D::D4, 2000}, {D::Trig, 1000}, {D::D5, 2500}});
  const auto r = find_fourfolds(tags, 3000);
  REQUIRE(r.events.size() == 1);
  CHECK(r.events[0].outcome == BsmOutcome::PsiMinus);
  CHECK(r.events[0].bob_detector == D::D5);
  CHECK(r.events[0].trig_time_ps == 1000);
  CHECK(r.events[0].epoch_time_ps == 0);
  CHECK(r.events[0].bsm_pattern == ClickPattern::of({D::D1, D::D4}));
  CHECK(find_fourfolds(tags, 1000).events.empty());

  // Bob's click one pulse period later.
  const auto shifted = sorted({{D::D1, 0}, {D::D4, 2000}, {D::Trig, 1000}, {D::D5, 12500}});
  CHECK(find_fourfolds(shifted, 13000).events.size() == 1);
  CHECK(find_fourfolds(shifted, 12000).events.empty());
}

TEST_CASE("ambiguous groups are dropped and consumed") {
  // Two triggers in one group.
  auto a = sorted({{D::D1, 0}, {D::D4, 100}, {D::Trig, 200}, {D::Trig, 300}, {D::D6, 400}});
  auto r = find_fourfolds(a, 3000);
  CHECK(r.events.empty());
  CHECK(r.ambiguous == 1);
  // Both Bob detectors fired.
  a = sorted({{D::D2, 0}, {D::D3, 100}, {D::Trig, 200}, {D::D5, 300}, {D::D6, 400}});
  r = find_fourfolds(a, 3000);
  CHECK(r.events.empty());
  CHECK(r.ambiguous == 1);
  // A lone click before a clean group only releases its anchor.
  a = sorted({{D::D5, 0}, {D::D1, 3500}, {D::D2, 3600}, {D::Trig, 3700}, {D::D6, 3800}});
  r = find_fourfolds(a, 3000);
  REQUIRE(r.events.size() == 1);
  CHECK(r.events[0].outcome == BsmOutcome::PsiPlus);
  CHECK(r.events[0].bob_detector == D::D6);
  CHECK(r.ambiguous == 0);
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(FourfoldFinder(0), ValidationError);
  const std::vector<TimeTag> unsorted{{D::D1, 10}, {D::D2, 5}};
  CHECK_THROWS_AS(find_fourfolds(unsorted, 1000), ValidationError);
  const std::vector<std::int64_t> taus{0};
  CHECK_THROWS_AS(window_sweep({}, taus, PureState::P(), Basis::PM), ValidationError);
  const std::vector<std::int64_t> ok{1000};
  CHECK_THROWS_AS(window_sweep({}, ok, PureState::P(), Basis::HV), ValidationError);
}

TEST_CASE("planted events are all recovered under sparse noise") {
  const auto s = synthetic(2000, 1e-9, 2000, 1);
  const auto r = find_fourfolds(s.tags, 3000);
  CHECK(r.events.size() == s.planted.size());
  std::size_t hit = 0;
  for (const auto& e : r.events) {
    if (std::binary_search(s.planted.begin(), s.planted.end(), e.epoch_time_ps / 1'000'000 * 1'000'000)) ++hit;
  }
  CHECK(hit == s.planted.size());
}

TEST_CASE("idempotence, event monotonicity and bounded memory") {
  const auto s = synthetic(3000, 2e-6, 2500, 2);
  const auto a = find_fourfolds(s.tags, 4000);
  const auto b = find_fourfolds(s.tags, 4000);
  CHECK(a.events == b.events);
  CHECK(a.ambiguous == b.ambiguous);

  // With surplus clicks around, a wider window can turn a clean group into an
  // ambiguous one, so only the candidate count is monotone there.
  std::size_t prev = 0;
  for (std::int64_t tau : {2500, 3000, 5000, 8000, 13000, 20000}) {
    FourfoldFinder f(tau);
    for (const auto& t : s.tags) f.push(t);
    const auto r = f.finish();
    const std::size_t candidates = r.events.size() + r.ambiguous;
    CHECK(candidates >= prev);
    prev = candidates;
    CHECK(f.max_window_size() <= densest(s.tags, tau) + 1);
  }

  const auto clean = synthetic(3000, 0.0, 6000, 4);
  prev = 0;
  for (std::int64_t tau : {1000, 2000, 3000, 4000, 5000, 6000, 8000}) {
    const auto n = find_fourfolds(clean.tags, tau).events.size();
    CHECK(n >= prev);
    prev = n;
  }
  CHECK(prev == clean.planted.size());
}

TEST_CASE("window sweep visibilities") {
  // Noise-free planted events with the right Bob detector only.
  std::vector<TimeTag> tags;
  for (int k = 0; k < 200; ++k) {
    const std::int64_t t0 = k * 100'000;
    tags.insert(tags.end(), {{D::D1, t0}, {D::Trig, t0 + 300}, {D::D4, t0 + 400}, {D::D5, t0 + 900}});
  }
  const std::vector<std::int64_t> taus{500, 1000, 3000};
  const auto rows = window_sweep(tags, taus, PureState::P(), Basis::PM);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].n_events == 0);
  CHECK_FALSE(rows[0].visibility.has_value());
  CHECK_FALSE(rows[0].sigma_violation.has_value());
  for (std::size_t i : {1u, 2u}) {
    CHECK(rows[i].n_events == 200);
    CHECK(*rows[i].visibility == 1.0);
    CHECK(std::isinf(*rows[i].sigma_violation));
  }
  // Charlie in the minus state: every click is now wrong.
  const auto m = window_sweep(tags, taus, PureState::M(), Basis::PM);
  CHECK(*m[2].visibility == -1.0);

  // Uncorrelated clicks on every detector.
  std::mt19937_64 rng(6);
  std::vector<TimeTag> dark;
  std::uniform_int_distribution<std::int64_t> where(0, 2'000'000'000);
  for (int k = 0; k < 200000; ++k) dark.push_back({kAllDetectors[rng() % 7], where(rng)});
  dark = sorted(std::move(dark));
  const std::vector<std::int64_t> wide{20000};
  const auto d = window_sweep(dark, wide, PureState::H(), Basis::HV, 2);
  REQUIRE(d[0].n_events > 100);
  CHECK(std::abs(*d[0].visibility) < 3.0 * *d[0].visibility_sigma);
}

TEST_CASE("sweeps do not depend on the thread count") {
  const auto s = synthetic(1000, 5e-6, 2500, 3);
  std::vector<std::int64_t> taus;
  for (std::int64_t t = 1000; t <= 29000; t += 1000) taus.push_back(t);
  const auto a = window_sweep(s.tags, taus, PureState::H(), Basis::HV, 1);
  const auto b = window_sweep(s.tags, taus, PureState::H(), Basis::HV, 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].n_correct == b[i].n_correct);
    CHECK(a[i].n_wrong == b[i].n_wrong);
    CHECK(a[i].n_ambiguous == b[i].n_ambiguous);
  }
}

TEST_CASE("statistical helpers") {
  CHECK(accidental_rate(1.0, 400.0, 0.0, 3000, 12500) == doctest::Approx(1.2e-6));
  CHECK(accidental_rate(5.0, 400.0, 0.0, 0, 12500) == 0.0);
  CHECK(accidental_rate(1.0, 400.0, 0.0, 6000, 12500) ==
        doctest::Approx(2.0 * accidental_rate(1.0, 400.0, 0.0, 3000, 12500)));
  // One neighbouring pulse inside the window.
  CHECK(accidental_rate(2.0, 0.0, 1e-3, 13000, 12500) == doctest::Approx(2e-3));
  CHECK_THROWS_AS(accidental_rate(-1.0, 400.0, 0.0, 3000, 12500), ValidationError);

  // Error propagation for V = (a - b)/(a + b): dV/da = 2b/(a+b)^2, dV/db = -2a/(a+b)^2.
  const double a = 70, b = 30, n = a + b;
  const double expect = std::sqrt(a * std::pow(2 * b / (n * n), 2) + b * std::pow(2 * a / (n * n), 2));
  CHECK(visibility_sigma(a, b) == doctest::Approx(expect));

  CHECK(dark_acceptance_s(3000, 0.0) == doctest::Approx(6e-9));
  CHECK(dark_acceptance_s(3000, 500.0) ==
        doctest::Approx((6000.0 - 1500.0 / std::sqrt(M_PI)) * 1e-12));
  CHECK(dark_acceptance_s(100, 1000.0) == 0.0);
}

}  // TEST_SUITE
