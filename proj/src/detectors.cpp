#include "qtele/detectors.hpp"

namespace qtele {

namespace {

constexpr std::array<std::string_view, kDetectorCount> kNames{
    "D1", "D2", "D3", "D4", "D5", "D6", "TRIG"};

constexpr std::uint8_t bit(DetectorId d) {
  return static_cast<std::uint8_t>(1u << index(d));
}

}  // namespace

std::string_view detector_name(DetectorId d) { return kNames[index(d)]; }

std::optional<DetectorId> parse_detector(std::string_view text) {
  for (std::size_t i = 0; i < kDetectorCount; ++i) {
    if (text == kNames[i]) return static_cast<DetectorId>(i);
  }
  if (text.size() == 1 && text[0] >= '0' && text[0] <= '6') {
    return static_cast<DetectorId>(text[0] - '0');
  }
  return std::nullopt;
}

ClickPattern ClickPattern::of(std::initializer_list<DetectorId> ds) {
  ClickPattern p;
  for (auto d : ds) p.set(d);
  return p;
}

std::string_view outcome_name(BsmOutcome o) {
  switch (o) {
    case BsmOutcome::PsiMinus:
      return "PsiMinus";
    case BsmOutcome::PsiPlus:
      return "PsiPlus";
    case BsmOutcome::Inconclusive:
      return "Inconclusive";
  }
  return "?";
}

BsmOutcome classify_pattern(ClickPattern pattern) {
  using D = DetectorId;
  const std::uint8_t m = pattern.mask & 0x0f;
  if (m == (bit(D::D1) | bit(D::D4)) || m == (bit(D::D2) | bit(D::D3))) {
    return BsmOutcome::PsiMinus;
  }
  if (m == (bit(D::D1) | bit(D::D2)) || m == (bit(D::D3) | bit(D::D4))) {
    return BsmOutcome::PsiPlus;
  }
  return BsmOutcome::Inconclusive;
}

}  // namespace qtele
