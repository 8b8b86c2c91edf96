#pragma once

// Flat key=value run configuration.
//
//   # comment
//   g1 = 0.106
//   efficiency.D5 = 0.3
//   charlie_states = H,V,P,M,R,L
//
// Experiment keys mirror ExperimentConfig field names; detector-table entries
// are addressed as efficiency.<DET> and dark_rate_hz.<DET>, and the bare keys
// `efficiency` / `dark_rate_hz` set all seven detectors. Everything else is a
// run key read by the command that needs it.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qtele/experiment.hpp"

namespace qtele {

class Manifest {
 public:
  Manifest() = default;

  /// Parses a config file body. Later keys override earlier ones. Throws
  /// ConfigError on syntax errors or unknown keys.
  static Manifest parse(std::istream& in, std::string_view source = "config");

  /// Sets one key; throws ConfigError for unknown keys or bad values.
  void set(std::string_view key, std::string_view value);

  /// Experiment fields assembled from the keys (not validated).
  ExperimentConfig experiment() const;

  bool has(std::string_view key) const;
  std::string get(std::string_view key, std::string_view fallback) const;
  double get_double(std::string_view key, double fallback) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  std::vector<std::string> get_list(std::string_view key,
                                    std::string_view fallback) const;

  /// Sorted key=value lines of every explicitly set key except `threads`.
  std::string canonical_text() const;
  /// FNV-1a 64 of canonical_text(), as 16 hex digits.
  std::string hash() const;

  static bool is_known_key(std::string_view key);

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

double parse_double(std::string_view key, std::string_view text);
std::int64_t parse_int(std::string_view key, std::string_view text);
bool parse_bool(std::string_view key, std::string_view text);
std::vector<std::string> split_list(std::string_view text);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace qtele
