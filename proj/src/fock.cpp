#include "qtele/fock.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "qtele/errors.hpp"
#include "sampling.hpp"

namespace qtele::fock {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

void accumulate(FockState::Amplitudes& into, const Occupation& occ, Complex a) {
  auto [it, inserted] = into.try_emplace(occ, a);
  if (!inserted) it->second += a;
}

FockState::Amplitudes pruned(FockState::Amplitudes amps) {
  std::erase_if(amps, [](const auto& kv) {
    return std::abs(kv.second) < kPruneThreshold;
  });
  return amps;
}

// Applies  coeff * prod_k a'(modes[k])  to every term of `state`.
void add_created(FockState::Amplitudes& out, const FockState& state,
                 std::initializer_list<std::size_t> modes, Complex coeff) {
  for (const auto& [occ, amp] : state.amplitudes()) {
    Occupation next = occ;
    double factor = 1.0;
    for (std::size_t m : modes) {
      next[m] = static_cast<std::uint8_t>(next[m] + 1);
      factor *= std::sqrt(static_cast<double>(next[m]));
    }
    if (total_photons(next) > state.n_max()) continue;
    accumulate(out, next, amp * coeff * factor);
  }
}

}  // namespace

std::size_t mode_count(Layout layout) {
  return layout == Layout::Source ? 9 : 11;
}

std::size_t bob_h_mode(Layout layout) {
  return layout == Layout::Source ? std::size_t{src::bobH} : std::size_t{det::bobH};
}

std::size_t bob_v_mode(Layout layout) {
  return layout == Layout::Source ? std::size_t{src::bobV} : std::size_t{det::bobV};
}

int total_photons(const Occupation& occ) {
  return std::accumulate(occ.begin(), occ.end(), 0);
}

FockState::FockState(Layout layout, int n_max, Amplitudes amplitudes)
    : layout_(layout), n_max_(n_max), amplitudes_(std::move(amplitudes)) {
  if (n_max_ < 0 || n_max_ > 2 * kLargestNMax) {
    throw ValidationError("FockState: truncation out of range");
  }
  const std::size_t modes = mode_count(layout_);
  for (const auto& [occ, amp] : amplitudes_) {
    if (total_photons(occ) > n_max_) {
      throw ValidationError("FockState: occupation exceeds truncation");
    }
    for (std::size_t m = modes; m < kMaxModes; ++m) {
      if (occ[m] != 0) throw ValidationError("FockState: mode outside layout");
    }
    if (!std::isfinite(amp.real()) || !std::isfinite(amp.imag())) {
      throw ValidationError("FockState: non-finite amplitude");
    }
  }
}

FockState FockState::vacuum(Layout layout, int n_max) {
  return basis(layout, n_max, Occupation{});
}

FockState FockState::basis(Layout layout, int n_max, const Occupation& occ) {
  return FockState(layout, n_max, Amplitudes{{occ, Complex(1.0, 0.0)}});
}

Complex FockState::amplitude(const Occupation& occ) const {
  auto it = amplitudes_.find(occ);
  return it == amplitudes_.end() ? Complex{} : it->second;
}

double FockState::norm_squared() const {
  double n = 0.0;
  for (const auto& kv : amplitudes_) n += std::norm(kv.second);
  return n;
}

FockState FockState::normalized() const {
  const double n = std::sqrt(norm_squared());
  if (!(n > 0.0)) throw LogicError("FockState: cannot normalize an empty state");
  Amplitudes out;
  for (const auto& [occ, amp] : amplitudes_) out.emplace(occ, amp / n);
  return FockState(layout_, n_max_, std::move(out));
}

FockState FockState::created(std::size_t mode) const {
  if (mode >= mode_count(layout_)) throw ValidationError("created: bad mode");
  Amplitudes out;
  add_created(out, *this, {mode}, 1.0);
  return FockState(layout_, n_max_, std::move(out));
}

std::string FockState::to_text() const {
  std::ostringstream os;
  const std::size_t modes = mode_count(layout_);
  char buf[64];
  for (const auto& [occ, amp] : amplitudes_) {
    for (std::size_t m = 0; m < modes; ++m) {
      os << static_cast<int>(occ[m]) << ' ';
    }
    std::snprintf(buf, sizeof buf, "%.17g %.17g", amp.real(), amp.imag());
    os << buf << '\n';
  }
  return os.str();
}

void SourceParams::validate() const {
  auto check_gain = [](double g, const char* name) {
    if (!(g >= 0.0) || !(g * g <= kMaxGainSquared)) {
      throw ConfigError(std::string(name) +
                        " outside the small-gain range 0 <= g, g^2 <= 0.2");
    }
  };
  check_gain(g1, "g1");
  check_gain(g2, "g2");
  if (!(xi >= 0.0 && xi <= 1.0)) {
    throw ConfigError("xi must lie in [0, 1]");
  }
}

FockState spdc_state(const SourceParams& params, const PureState& input,
                     int n_max) {
  params.validate();
  if (n_max < 2 || n_max > kLargestNMax) {
    throw ConfigError("spdc_state: n_max must lie in [2, 6]");
  }
  if (params.g1 > 0.0 && params.g2 > 0.0 && n_max < 4) {
    throw ConfigError(
        "spdc_state: n_max too small to hold one pair from each source");
  }

  const Complex s_in = std::sqrt(params.xi);
  const Complex s_out = std::sqrt(1.0 - params.xi);
  const Complex alpha = input.alpha();
  const Complex beta = input.beta();

  auto apply_pair = [&](const FockState& s) {
    FockState::Amplitudes out;
    if (params.g1 > 0.0) {
      add_created(out, s, {src::aH, src::bobV}, params.g1 * kInvSqrt2);
      add_created(out, s, {src::aV, src::bobH}, -params.g1 * kInvSqrt2);
    }
    if (params.g2 > 0.0) {
      add_created(out, s, {src::bH, src::trig}, params.g2 * alpha * s_in);
      add_created(out, s, {src::bV, src::trig}, params.g2 * beta * s_in);
      add_created(out, s, {src::bpH, src::trig}, params.g2 * alpha * s_out);
      add_created(out, s, {src::bpV, src::trig}, params.g2 * beta * s_out);
    }
    return out;
  };

  FockState term = FockState::vacuum(Layout::Source, n_max);
  FockState::Amplitudes sum = term.amplitudes();
  for (int k = 1; 2 * k <= n_max; ++k) {
    FockState::Amplitudes next = apply_pair(term);
    for (auto& kv : next) kv.second /= static_cast<double>(k);
    term = FockState(Layout::Source, n_max, pruned(std::move(next)));
    for (const auto& [occ, amp] : term.amplitudes()) accumulate(sum, occ, amp);
  }
  return FockState(Layout::Source, n_max, pruned(std::move(sum))).normalized();
}

FockState transform_modes(const FockState& state, Layout out_layout,
                          const ModeImage& image) {
  const std::size_t in_modes = mode_count(state.layout());
  if (image.size() != in_modes) {
    throw ValidationError("transform_modes: image size does not match layout");
  }
  FockState::Amplitudes out;
  for (const auto& [occ, amp] : state.amplitudes()) {
    // Expand prod_i (sum_j u_ij b_j')^{n_i} as a polynomial in the outputs.
    std::map<Occupation, Complex> poly{{Occupation{}, Complex(1.0, 0.0)}};
    double in_norm = 1.0;
    for (std::size_t i = 0; i < in_modes; ++i) {
      in_norm *= factorial(occ[i]);
      for (int r = 0; r < occ[i]; ++r) {
        std::map<Occupation, Complex> next;
        for (const auto& [mono, c] : poly) {
          for (const auto& [j, u] : image[i]) {
            Occupation m = mono;
            m[j] = static_cast<std::uint8_t>(m[j] + 1);
            auto [it, inserted] = next.try_emplace(m, c * u);
            if (!inserted) it->second += c * u;
          }
        }
        poly = std::move(next);
      }
    }
    for (const auto& [mono, c] : poly) {
      double out_norm = 1.0;
      for (auto n : mono) out_norm *= factorial(n);
      accumulate(out, mono, amp * c * std::sqrt(out_norm / in_norm));
    }
  }
  return FockState(out_layout, state.n_max(), pruned(std::move(out)));
}

FockState beam_splitter(const FockState& state) {
  if (state.layout() != Layout::Source) {
    throw ValidationError("beam_splitter: expects a source-layout state");
  }
  const Complex h = kInvSqrt2;
  ModeImage image(mode_count(Layout::Source));
  image[src::aH] = {{det::cH, h}, {det::dH, h}};
  image[src::aV] = {{det::cV, h}, {det::dV, h}};
  image[src::bH] = {{det::cH, h}, {det::dH, -h}};
  image[src::bV] = {{det::cV, h}, {det::dV, -h}};
  image[src::bpH] = {{det::cpH, h}, {det::dpH, -h}};
  image[src::bpV] = {{det::cpV, h}, {det::dpV, -h}};
  image[src::bobH] = {{det::bobH, 1.0}};
  image[src::bobV] = {{det::bobV, 1.0}};
  image[src::trig] = {{det::trig, 1.0}};
  return transform_modes(state, Layout::Detection, image);
}

std::array<std::uint8_t, 5> detector_photons(Layout layout,
                                             const Occupation& occ) {
  std::array<std::uint8_t, 5> d{};
  auto sum = [](int a, int b) { return static_cast<std::uint8_t>(a + b); };
  if (layout == Layout::Detection) {
    d[0] = sum(occ[det::cH], occ[det::cpH]);
    d[1] = sum(occ[det::cV], occ[det::cpV]);
    d[2] = sum(occ[det::dH], occ[det::dpH]);
    d[3] = sum(occ[det::dV], occ[det::dpV]);
    d[4] = occ[det::trig];
  } else {
    // Before the beam splitter there is no port information; report the
    // input modes in the same slots so single-mode tests stay readable.
    d[0] = sum(occ[src::aH], occ[src::bH] + occ[src::bpH]);
    d[1] = sum(occ[src::aV], occ[src::bV] + occ[src::bpV]);
    d[4] = occ[src::trig];
  }
  return d;
}

std::vector<Branch> branch_on_non_bob(const FockState& state) {
  const std::size_t bh = bob_h_mode(state.layout());
  const std::size_t bv = bob_v_mode(state.layout());
  std::map<Occupation, Branch> groups;
  for (const auto& [occ, amp] : state.amplitudes()) {
    Occupation herald = occ;
    herald[bh] = 0;
    herald[bv] = 0;
    Branch& b = groups[herald];
    b.herald = herald;
    b.probability += std::norm(amp);
    b.bob.push_back({occ[bh], occ[bv], amp});
  }
  std::vector<Branch> out;
  out.reserve(groups.size());
  for (auto& [herald, b] : groups) {
    if (b.probability > 0.0) {
      const double n = std::sqrt(b.probability);
      for (auto& ba : b.bob) ba.amplitude /= n;
    }
    out.push_back(std::move(b));
  }
  return out;
}

FockSample measure_fock(const FockState& state, std::mt19937_64& rng) {
  const auto branches = branch_on_non_bob(state);
  std::vector<double> w;
  w.reserve(branches.size());
  for (const auto& b : branches) w.push_back(b.probability);
  detail::Categorical pick(w);
  if (pick.empty()) throw LogicError("measure_fock: state has zero norm");
  const Branch& b = branches[pick(rng)];

  FockState::Amplitudes bob;
  const std::size_t bh = bob_h_mode(state.layout());
  const std::size_t bv = bob_v_mode(state.layout());
  for (const auto& ba : b.bob) {
    Occupation occ{};
    occ[bh] = ba.n_h;
    occ[bv] = ba.n_v;
    bob.emplace(occ, ba.amplitude);
  }
  return FockSample{b.herald, detector_photons(state.layout(), b.herald),
                    FockState(state.layout(), state.n_max(), std::move(bob))};
}

}  // namespace qtele::fock
