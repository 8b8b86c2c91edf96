#pragma once

// Truncated multi-mode Fock-space engine for the Bell-state measurement.
//
// Two fixed mode layouts are used. The source layout holds the freshly
// emitted photons:
//
//   a_H a_V | b_H b_V | b'_H b'_V | bob_H bob_V | trig
//
// where a carries photon 1, b the part of photon 3 that overlaps photon 1 in
// time and b' the orthogonal (distinguishable) remainder. The beam splitter
// maps onto the detection layout:
//
//   c_H c_V d_H d_V | c'_H c'_V d'_H d'_V | bob_H bob_V | trig
//
// in which primed outputs share the physical detectors of their unprimed
// partners but never interfere with them.

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "qtele/detectors.hpp"
#include "qtele/qstate.hpp"

namespace qtele::fock {

enum class Layout : std::uint8_t { Source, Detection };

inline constexpr std::size_t kMaxModes = 11;

namespace src {
enum Mode : std::size_t { aH, aV, bH, bV, bpH, bpV, bobH, bobV, trig };
}
namespace det {
enum Mode : std::size_t { cH, cV, dH, dV, cpH, cpV, dpH, dpV, bobH, bobV, trig };
}

std::size_t mode_count(Layout layout);
std::size_t bob_h_mode(Layout layout);
std::size_t bob_v_mode(Layout layout);

/// Photon numbers per mode; entries past `mode_count(layout)` stay zero.
using Occupation = std::array<std::uint8_t, kMaxModes>;

int total_photons(const Occupation& occ);

inline constexpr int kDefaultNMax = 4;
inline constexpr int kLargestNMax = 6;
inline constexpr double kPruneThreshold = 1e-12;

/// Sparse superposition over occupation vectors, ordered lexicographically in
/// the layout's mode order. Immutable once built.
class FockState {
 public:
  using Amplitudes = std::map<Occupation, Complex>;

  /// Throws ValidationError if an occupation exceeds `n_max` photons or uses
  /// modes outside the layout.
  FockState(Layout layout, int n_max, Amplitudes amplitudes);

  static FockState vacuum(Layout layout, int n_max);

  /// State with a single occupation vector of amplitude 1.
  static FockState basis(Layout layout, int n_max, const Occupation& occ);

  Layout layout() const { return layout_; }
  int n_max() const { return n_max_; }
  const Amplitudes& amplitudes() const { return amplitudes_; }
  Complex amplitude(const Occupation& occ) const;

  double norm_squared() const;

  /// Throws LogicError on an empty state.
  FockState normalized() const;

  /// Creation operator on `mode`; occupations that would exceed n_max are
  /// dropped.
  FockState created(std::size_t mode) const;

  /// One line per occupation vector: "n1 n2 ... re im".
  std::string to_text() const;

 private:
  Layout layout_;
  int n_max_;
  Amplitudes amplitudes_;
};

/// Interaction strengths of the entangled-pair source (g1) and the heralded
/// source (g2), and the temporal overlap xi of photons 1 and 3.
struct SourceParams {
  double g1 = 0.1;
  double g2 = 0.1;
  double xi = 1.0;

  static constexpr double kMaxGainSquared = 0.2;

  /// Throws ConfigError outside g >= 0, g^2 <= 0.2, 0 <= xi <= 1.
  void validate() const;
};

/// Normalized, truncated expansion of exp(g1 K1' + g2 K2')|0>, with
/// K1' = (a_H' bob_V' - a_V' bob_H')/sqrt2 and
/// K2' = (alpha c_H' + beta c_V') trig' where c' = sqrt(xi) b' + sqrt(1-xi) b''.
FockState spdc_state(const SourceParams& params, const PureState& input,
                     int n_max = kDefaultNMax);

/// 50:50 fiber beam splitter: a -> (c + d)/sqrt2, b -> (c - d)/sqrt2 and the
/// same for b' onto the primed outputs. Takes a source-layout state and
/// returns a detection-layout state.
FockState beam_splitter(const FockState& state);

/// Linear map on creation operators: input mode i goes to
/// sum_j image[i][j].second * out(image[i][j].first)'.
using ModeImage = std::vector<std::vector<std::pair<std::size_t, Complex>>>;
FockState transform_modes(const FockState& state, Layout out_layout,
                          const ModeImage& image);

/// Photons reaching each BSM detector and the trigger, in the order
/// D1, D2, D3, D4, Trig. Primed modes land on the same detector as unprimed.
std::array<std::uint8_t, 5> detector_photons(Layout layout,
                                             const Occupation& occ);

struct BobAmplitude {
  std::uint8_t n_h = 0;
  std::uint8_t n_v = 0;
  Complex amplitude;
};

/// All amplitude sharing one occupation of the non-bob modes.
struct Branch {
  Occupation herald{};  ///< bob entries are zero
  double probability = 0.0;
  std::vector<BobAmplitude> bob;  ///< normalized conditional bob state
};

/// Splits the state by its non-bob occupation; probabilities sum to the
/// squared norm. Ordered like the occupation vectors.
std::vector<Branch> branch_on_non_bob(const FockState& state);

struct FockSample {
  Occupation herald{};
  std::array<std::uint8_t, 5> detector_photons{};
  FockState bob_state;  ///< same layout, non-bob modes empty
};

/// Samples the non-bob occupation with its marginal probability and returns
/// the conditional bob-mode state. Throws LogicError on an empty state.
FockSample measure_fock(const FockState& state, std::mt19937_64& rng);

}  // namespace qtele::fock
