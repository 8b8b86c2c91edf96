#include "qtele/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <set>

#include "qtele/errors.hpp"

namespace qtele {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

const std::set<std::string, std::less<>>& experiment_keys() {
  static const std::set<std::string, std::less<>> keys = [] {
    std::set<std::string, std::less<>> k{
        "g1", "g2", "xi", "n_max", "attenuation_db", "rep_period_ps", "pulses",
        "efficiency", "dark_rate_hz", "jitter_sigma_ps", "tag_resolution_ps",
        "feed_forward", "ff_delay_ps", "charlie_state", "bob_basis",
        "drift_angle_rad", "drift_axis", "seed", "tag_scope", "coverage_ps"};
    for (auto d : kAllDetectors) {
      k.insert("efficiency." + std::string(detector_name(d)));
      k.insert("dark_rate_hz." + std::string(detector_name(d)));
    }
    return k;
  }();
  return keys;
}

const std::set<std::string, std::less<>>& run_keys() {
  static const std::set<std::string, std::less<>> keys{
      "threads", "window_ps", "charlie_states", "bob_bases", "emit_tags",
      "tags_csv", "att_start_db", "att_stop_db", "att_step_db",
      "pulse_scaling_knee_db", "taus_ps", "tau_start_ps", "tau_stop_ps",
      "tau_step_ps", "counts", "ideal_state", "probe_H", "probe_V", "probe_P",
      "probe_R", "sweep", "p_bsm_hz", "v0", "s2_frac", "v2", "n_hz", "tau_s",
      "receiver_loss_db", "predict", "ellipsoid_points"};
  return keys;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double parse_double(std::string_view key, std::string_view text) {
  text = trim(text);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size() || !std::isfinite(v)) {
    throw ConfigError(std::string(key) + ": expected a number, got '" +
                      std::string(text) + "'");
  }
  return v;
}

std::int64_t parse_int(std::string_view key, std::string_view text) {
  text = trim(text);
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec == std::errc{} && p == text.data() + text.size()) return v;
  // Accept integral values written in floating notation, e.g. 1e12.
  const double d = parse_double(key, text);
  if (d != std::floor(d) || std::abs(d) > 9.2e18) {
    throw ConfigError(std::string(key) + ": expected an integer, got '" +
                      std::string(text) + "'");
  }
  return static_cast<std::int64_t>(d);
}

bool parse_bool(std::string_view key, std::string_view text) {
  text = trim(text);
  if (text == "1" || text == "true" || text == "on" || text == "yes") return true;
  if (text == "0" || text == "false" || text == "off" || text == "no") return false;
  throw ConfigError(std::string(key) + ": expected true/false, got '" +
                    std::string(text) + "'");
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = trim(text.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

bool Manifest::is_known_key(std::string_view key) {
  return experiment_keys().contains(key) || run_keys().contains(key);
}

Manifest Manifest::parse(std::istream& in, std::string_view source) {
  Manifest m;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) {
      s = s.substr(0, hash);
    }
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(source) + ":" + std::to_string(line_no) +
                        ": expected key = value");
    }
    m.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return m;
}

void Manifest::set(std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  if (!is_known_key(key)) {
    throw ConfigError("unknown configuration key '" + std::string(key) + "'");
  }
  // Parse eagerly so errors point at the offending key.
  Manifest probe;
  probe.values_.emplace(std::string(key), std::string(value));
  if (experiment_keys().contains(key)) (void)probe.experiment();
  if (key == "efficiency" || key == "dark_rate_hz") {
    std::erase_if(values_, [&](const auto& kv) {
      return kv.first.starts_with(std::string(key) + ".");
    });
  }
  values_.insert_or_assign(std::string(key), std::string(value));
}

bool Manifest::has(std::string_view key) const { return values_.contains(key); }

std::string Manifest::get(std::string_view key, std::string_view fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? std::string(fallback) : it->second;
}

double Manifest::get_double(std::string_view key, double fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_double(key, it->second);
}

std::int64_t Manifest::get_int(std::string_view key, std::int64_t fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_int(key, it->second);
}

bool Manifest::get_bool(std::string_view key, bool fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : parse_bool(key, it->second);
}

std::vector<std::string> Manifest::get_list(std::string_view key,
                                            std::string_view fallback) const {
  return split_list(get(key, fallback));
}

ExperimentConfig Manifest::experiment() const {
  ExperimentConfig c;
  auto num = [&](const char* k, double& field) {
    if (auto it = values_.find(k); it != values_.end()) field = parse_double(k, it->second);
  };
  auto integer = [&](const char* k, auto& field) {
    if (auto it = values_.find(k); it != values_.end()) {
      const auto v = parse_int(k, it->second);
      using T = std::remove_reference_t<decltype(field)>;
      if (std::is_unsigned_v<T> && v < 0) {
        throw ConfigError(std::string(k) + " must be >= 0");
      }
      field = static_cast<T>(v);
    }
  };
  num("g1", c.source.g1);
  num("g2", c.source.g2);
  num("xi", c.source.xi);
  integer("n_max", c.n_max);
  num("attenuation_db", c.attenuation_db);
  integer("rep_period_ps", c.rep_period_ps);
  integer("pulses", c.pulses);
  num("jitter_sigma_ps", c.jitter_sigma_ps);
  integer("tag_resolution_ps", c.tag_resolution_ps);
  integer("ff_delay_ps", c.ff_delay_ps);
  num("drift_angle_rad", c.drift_angle_rad);
  integer("seed", c.seed);
  integer("coverage_ps", c.coverage_ps);
  if (auto it = values_.find("feed_forward"); it != values_.end()) {
    c.feed_forward = parse_bool("feed_forward", it->second);
  }
  if (auto it = values_.find("efficiency"); it != values_.end()) {
    const double e = parse_double("efficiency", it->second);
    for (auto& d : c.detector_table) d.efficiency = e;
  }
  if (auto it = values_.find("dark_rate_hz"); it != values_.end()) {
    const double r = parse_double("dark_rate_hz", it->second);
    for (auto& d : c.detector_table) d.dark_rate_hz = r;
  }
  for (auto d : kAllDetectors) {
    const std::string name(detector_name(d));
    num(("efficiency." + name).c_str(), c.detector_table[index(d)].efficiency);
    num(("dark_rate_hz." + name).c_str(), c.detector_table[index(d)].dark_rate_hz);
  }
  if (auto it = values_.find("charlie_state"); it != values_.end()) {
    try {
      c.charlie_state = PureState::named(it->second);
    } catch (const std::exception&) {
      throw ConfigError("charlie_state: expected one of H,V,P,M,R,L");
    }
  }
  if (auto it = values_.find("bob_basis"); it != values_.end()) {
    try {
      c.bob_basis = parse_basis(it->second);
    } catch (const std::exception&) {
      throw ConfigError("bob_basis: expected HV, PM or RL");
    }
  }
  if (auto it = values_.find("drift_axis"); it != values_.end()) {
    const auto parts = split_list(it->second);
    if (parts.size() != 3) throw ConfigError("drift_axis: expected x,y,z");
    Vector3 axis;
    for (int i = 0; i < 3; ++i) axis(i) = parse_double("drift_axis", parts[static_cast<std::size_t>(i)]);
    if (!(axis.norm() > 0.0)) throw ConfigError("drift_axis must be non-zero");
    c.drift_axis = axis.normalized();
  }
  if (auto it = values_.find("tag_scope"); it != values_.end()) {
    if (it->second == "full") {
      c.tag_scope = TagScope::Full;
    } else if (it->second == "bob_windows") {
      c.tag_scope = TagScope::BobWindows;
    } else {
      throw ConfigError("tag_scope: expected full or bob_windows");
    }
  }
  return c;
}

std::string Manifest::canonical_text() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    // The worker count never changes results, so it stays out of the hash.
    if (k == "threads") continue;
    out += k + "=" + v + "\n";
  }
  return out;
}

std::string Manifest::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_text())));
  return buf;
}

}  // namespace qtele
