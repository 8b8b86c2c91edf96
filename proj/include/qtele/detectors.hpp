#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string_view>

namespace qtele {

/// Physical detectors. D1..D4 resolve the Bell-state measurement (D1 = port
/// c/H, D2 = c/V, D3 = d/H, D4 = d/V), D5/D6 are Bob's +/- eigenstate
/// detectors and Trig heralds photon 4. The numeric value is the wire id.
enum class DetectorId : std::uint8_t { D1 = 0, D2, D3, D4, D5, D6, Trig };

inline constexpr std::size_t kDetectorCount = 7;
inline constexpr std::array<DetectorId, kDetectorCount> kAllDetectors{
    DetectorId::D1, DetectorId::D2, DetectorId::D3,  DetectorId::D4,
    DetectorId::D5, DetectorId::D6, DetectorId::Trig};

constexpr std::size_t index(DetectorId d) { return static_cast<std::size_t>(d); }

std::string_view detector_name(DetectorId d);

/// Accepts "D1".."D6", "TRIG" or the numeric wire id.
std::optional<DetectorId> parse_detector(std::string_view text);

/// Set of Bell-state-measurement detectors that fired.
struct ClickPattern {
  std::uint8_t mask = 0;

  static ClickPattern of(std::initializer_list<DetectorId> ds);

  bool has(DetectorId d) const {
    return index(d) < 4 && ((mask >> index(d)) & 1u) != 0;
  }
  void set(DetectorId d) {
    if (index(d) < 4) mask = static_cast<std::uint8_t>(mask | (1u << index(d)));
  }
  int size() const { return __builtin_popcount(mask); }
  bool operator==(const ClickPattern&) const = default;
};

enum class BsmOutcome { PsiMinus, PsiPlus, Inconclusive };

std::string_view outcome_name(BsmOutcome o);

/// {D1,D4} or {D2,D3} -> PsiMinus; {D1,D2} or {D3,D4} -> PsiPlus; anything
/// else -> Inconclusive.
BsmOutcome classify_pattern(ClickPattern pattern);

}  // namespace qtele
