#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qtele/config.hpp"
#include "qtele/errors.hpp"
#include "qtele/pipeline.hpp"
#include "qtele/tagio.hpp"
#include "qtele/version.hpp"

namespace qtele::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "nan"; }

Json json_number(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

Json json_number(const std::optional<double>& v) {
  return v ? json_number(*v) : Json(nullptr);
}

// Files written by the current command; removed again if the command fails.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void open(const std::string& name, std::ofstream& os, bool binary = false) {
    fs::create_directories(dir_);
    const fs::path p = dir_ / name;
    os.open(p, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    written_.push_back(p);
  }

  void commit() { written_.clear(); }

  ~Outputs() {
    std::error_code ec;
    for (const auto& p : written_) fs::remove(p, ec);
  }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
};

struct Context {
  Manifest manifest;
  fs::path out_dir = ".";
  std::string comment;  // leading line of every text output
  Json meta;
  unsigned threads = 1;
};

void write_header(std::ostream& os, const Context& ctx) { os << ctx.comment << '\n'; }

void write_json(Outputs& outs, const std::string& name, const Json& j) {
  std::ofstream os;
  outs.open(name, os);
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("write failed: " + name);
}

std::vector<Basis> bases_of(const Manifest& m) {
  std::vector<Basis> out;
  for (const auto& s : m.get_list("bob_bases", "HV,PM,RL")) {
    try {
      out.push_back(parse_basis(s));
    } catch (const std::exception&) {
      throw ConfigError("bob_bases: unknown basis '" + s + "'");
    }
  }
  if (out.empty()) throw ConfigError("bob_bases must not be empty");
  return out;
}

std::vector<std::string> states_of(const Manifest& m, std::string_view fallback) {
  auto names = m.get_list("charlie_states", fallback);
  if (names.empty()) throw ConfigError("charlie_states must not be empty");
  for (const auto& n : names) {
    try {
      (void)PureState::named(n);
    } catch (const std::exception&) {
      throw ConfigError("charlie_states: unknown state '" + n + "'");
    }
  }
  return names;
}

std::int64_t window_of(const Manifest& m) {
  const auto w = m.get_int("window_ps", 3000);
  if (w <= 0) throw ConfigError("window_ps must be > 0");
  return w;
}

Json matrix_json(const Matrix2c& m) {
  Json re = Json::array(), im = Json::array();
  for (int i = 0; i < 2; ++i) {
    Json r = Json::array(), c = Json::array();
    for (int j = 0; j < 2; ++j) {
      r.push_back(m(i, j).real());
      c.push_back(m(i, j).imag());
    }
    re.push_back(r);
    im.push_back(c);
  }
  return Json{{"real", re}, {"imag", im}};
}

Json matrix_json(const Matrix4c& m) {
  Json re = Json::array(), im = Json::array();
  for (int i = 0; i < 4; ++i) {
    Json r = Json::array(), c = Json::array();
    for (int j = 0; j < 4; ++j) {
      r.push_back(m(i, j).real());
      c.push_back(m(i, j).imag());
    }
    re.push_back(r);
    im.push_back(c);
  }
  return Json{{"real", re}, {"imag", im}};
}

Json vector_json(const Vector3& v) { return Json::array({v(0), v(1), v(2)}); }

// ---------------------------------------------------------------- simulate

int cmd_simulate(Context& ctx, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentConfig cfg = ctx.manifest.experiment();
  cfg.validate();
  const auto states = states_of(ctx.manifest, "H,V,P,M,R,L");
  const auto bases = bases_of(ctx.manifest);
  const auto window = window_of(ctx.manifest);
  const bool emit_tags = ctx.manifest.get_bool("emit_tags", false);
  const bool tags_csv = ctx.manifest.get_bool("tags_csv", false);

  const ProtocolReport rep =
      run_protocol(cfg, states, bases, window, ctx.threads, emit_tags);

  Outputs outs(ctx.out_dir);
  {
    std::ofstream os;
    outs.open("counts.csv", os);
    write_header(os, ctx);
    os << "state,basis,n_plus,n_minus,ambiguous,psi_minus,psi_plus\n";
    for (const auto& s : rep.states) {
      for (const auto& r : s.runs) {
        os << s.name << ',' << basis_name(r.basis) << ',' << r.n_plus << ','
           << r.n_minus << ',' << r.ambiguous << ',' << r.by_outcome[0] << ','
           << r.by_outcome[1] << '\n';
      }
    }
  }
  for (const auto& s : rep.states) {
    std::ofstream os;
    outs.open("tomo_" + s.name + ".csv", os);
    write_header(os, ctx);
    write_counts_csv(os, s.counts);
  }
  if (emit_tags) {
    for (const auto& s : rep.states) {
      for (const auto& r : s.runs) {
        const std::string stem = "tags_" + s.name + "_" + std::string(basis_name(r.basis));
        std::ofstream bin;
        outs.open(stem + ".qtt", bin, true);
        write_qtt(bin, r.raw.tags, static_cast<std::uint32_t>(cfg.tag_resolution_ps));
        if (tags_csv) {
          std::ofstream os;
          outs.open(stem + ".csv", os);
          write_header(os, ctx);
          write_tag_csv(os, r.raw.tags);
        }
      }
    }
  }

  Json per_state = Json::object();
  double vis_sum = 0.0;
  int vis_n = 0;
  for (const auto& s : rep.states) {
    Json j;
    j["fidelity"] = s.events > 0 ? Json(s.fidelity) : Json(nullptr);
    j["four_folds"] = s.events;
    j["ambiguous"] = s.ambiguous;
    if (s.events > 0) {
      j["bloch"] = vector_json(bloch_vector(s.mle.rho));
      j["purity"] = purity(s.mle.rho);
      j["mle_converged"] = s.mle.converged;
    }
    // Visibility in the basis where the state is an eigenstate, if measured.
    if (auto eb = eigenbasis(s.state)) {
      const auto& c = s.counts[*eb];
      const double a = static_cast<double>(c[0]), b = static_cast<double>(c[1]);
      if (a + b > 0) {
        const bool plus = s.state.same_ray(basis_states(*eb).first);
        const double v = (plus ? a - b : b - a) / (a + b);
        j["visibility"] = v;
        j["visibility_sigma"] = json_number(visibility_sigma(a, b));
        vis_sum += v;
        ++vis_n;
      }
    }
    per_state[s.name] = j;
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Json summary;
  summary["meta"] = ctx.meta;
  summary["window_ps"] = window;
  summary["states"] = per_state;
  summary["average_fidelity"] = rep.average_fidelity;
  summary["average_visibility"] = vis_n > 0 ? Json(vis_sum / vis_n) : Json(nullptr);
  summary["total_four_folds"] = rep.total_events;
  summary["seed"] = cfg.seed;
  summary["wall_time_s"] = wall;
  write_json(outs, "summary.json", summary);
  outs.commit();
  out << "average fidelity " << fmt(rep.average_fidelity) << " over "
      << rep.total_events << " four-folds\n";
  return kOk;
}

// -------------------------------------------------------------- tomography

TomographyCounts load_counts(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + what + " file '" + path + "'");
  return read_counts_csv(in);
}

Json state_json(const MleResult& r) {
  Json j;
  j["rho"] = matrix_json(r.rho.matrix());
  j["bloch"] = vector_json(bloch_vector(r.rho));
  j["purity"] = purity(r.rho);
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["log_likelihood"] = r.log_likelihood;
  return j;
}

int cmd_tomo_state(Context& ctx, std::ostream& out) {
  if (!ctx.manifest.has("counts")) throw UsageError("tomo-state needs --counts FILE");
  const auto counts = load_counts(ctx.manifest.get("counts", ""), "counts");
  const MleResult r = mle_state(counts);
  Json j;
  j["meta"] = ctx.meta;
  j["state"] = state_json(r);
  if (ctx.manifest.has("ideal_state")) {
    const auto name = ctx.manifest.get("ideal_state", "");
    j["ideal_state"] = name;
    j["fidelity"] = fidelity(PureState::named(name), r.rho);
  }
  Outputs outs(ctx.out_dir);
  write_json(outs, "state.json", j);
  outs.commit();
  out << (r.converged ? "converged" : "NOT converged") << " after " << r.iterations
      << " iterations\n";
  return kOk;
}

int cmd_tomo_process(Context& ctx, std::ostream& out) {
  static constexpr const char* kProbes[] = {"H", "V", "P", "R"};
  std::array<DensityMatrix, 4> outputs{DensityMatrix::maximally_mixed(),
                                       DensityMatrix::maximally_mixed(),
                                       DensityMatrix::maximally_mixed(),
                                       DensityMatrix::maximally_mixed()};
  Json probes = Json::object();
  for (std::size_t k = 0; k < 4; ++k) {
    const std::string key = std::string("probe_") + kProbes[k];
    if (!ctx.manifest.has(key)) {
      throw UsageError(std::string("missing probe ") + kProbes[k] + " (--" + key + " FILE)");
    }
    const auto path = ctx.manifest.get(key, "");
    const MleResult r = mle_state(load_counts(path, std::string("probe ") + kProbes[k]));
    outputs[k] = r.rho;
    probes[kProbes[k]] = state_json(r);
  }
  const auto rec = process_from_pairs(std::span<const PureState, 4>(probe_states()),
                                      std::span<const DensityMatrix, 4>(outputs));
  const auto map = bloch_map(rec.projected);
  const double f = process_fidelity(rec.projected, ProcessMatrix::identity());
  const auto n_points = ctx.manifest.get_int("ellipsoid_points", 1024);
  if (n_points <= 0) throw ConfigError("ellipsoid_points must be > 0");

  Json j;
  j["meta"] = ctx.meta;
  j["probe_set"] = Json::array({"H", "V", "P", "R"});
  j["feed_forward"] = ctx.manifest.get_bool("feed_forward", true);
  j["chi_raw"] = matrix_json(rec.raw);
  j["chi_projected"] = matrix_json(rec.projected.chi());
  j["process_fidelity"] = f;
  Json M = Json::array();
  for (int i = 0; i < 3; ++i) M.push_back(Json::array({map.M(i, 0), map.M(i, 1), map.M(i, 2)}));
  j["bloch_map"] = Json{{"M", M}, {"c", vector_json(map.c)}};
  j["probes"] = probes;

  Outputs outs(ctx.out_dir);
  write_json(outs, "chi.json", j);
  {
    std::ofstream os;
    outs.open("ellipsoid.csv", os);
    write_header(os, ctx);
    os << "x,y,z\n";
    for (const auto& p : deformed_sphere(map, static_cast<std::size_t>(n_points))) {
      os << fmt(p(0)) << ',' << fmt(p(1)) << ',' << fmt(p(2)) << '\n';
    }
  }
  outs.commit();
  out << "process fidelity " << fmt(f) << '\n';
  return kOk;
}

// ------------------------------------------------------------------ sweeps

std::vector<double> attenuation_grid(const Manifest& m) {
  const double a = m.get_double("att_start_db", 0.0);
  const double b = m.get_double("att_stop_db", 60.0);
  const double s = m.get_double("att_step_db", 5.0);
  if (!(s > 0.0)) throw ConfigError("att_step_db must be > 0");
  if (!(a >= 0.0) || !(b >= a)) throw ConfigError("attenuation range must satisfy 0 <= start <= stop");
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((b - a) / s + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * s);
  return out;
}

LinkBudget fixed_budget(const Context& ctx, const ExperimentConfig& cfg, std::int64_t window,
                        std::span<const std::string> states) {
  LinkBudget b = budget_from_config(cfg, window, states);
  const auto& m = ctx.manifest;
  b.n_hz = m.get_double("n_hz", b.n_hz);
  b.tau_s = m.get_double("tau_s", b.tau_s);
  b.receiver_loss_db = m.get_double("receiver_loss_db", b.receiver_loss_db);
  b.v2 = m.get_double("v2", b.v2);
  return b;
}

Json fit_json(const BudgetFit& fit) {
  Json j;
  j["ok"] = fit.ok;
  j["p_bsm_hz"] = fit.budget.p_bsm_hz;
  j["v0"] = fit.budget.v0;
  j["s2_frac"] = fit.budget.s2_frac;
  j["v2"] = fit.budget.v2;
  j["n_hz"] = fit.budget.n_hz;
  j["tau_s"] = fit.budget.tau_s;
  j["receiver_loss_db"] = fit.budget.receiver_loss_db;
  j["rate_residual_norm"] = fit.rate_residual_norm;
  j["visibility_residual_norm"] = fit.visibility_residual_norm;
  j["flags"] = fit.flags;
  return j;
}

int cmd_sweep_attenuation(Context& ctx, std::ostream& out) {
  const ExperimentConfig cfg = ctx.manifest.experiment();
  cfg.validate();
  const auto states = states_of(ctx.manifest, "P,M");
  const auto window = window_of(ctx.manifest);
  const double knee = ctx.manifest.get_double("pulse_scaling_knee_db", 0.0);
  const bool predict = ctx.manifest.get_bool("predict", false);

  std::vector<AttenuationPoint> pts;
  for (double db : attenuation_grid(ctx.manifest)) {
    pts.push_back(attenuation_point(cfg, db, states, window, knee, ctx.threads));
  }

  std::optional<BudgetFit> fit;
  std::vector<LinkPoint> model;
  if (predict) {
    std::vector<SweepSample> samples;
    for (const auto& p : pts) {
      if (!p.visibility) continue;
      samples.push_back({p.attenuation_db, p.rate_hz, *p.visibility, p.rate_sigma_hz,
                         *p.visibility_sigma});
    }
    if (samples.size() < 4) throw std::runtime_error("predict: fewer than four usable sweep points");
    fit = fit_budget(samples, fixed_budget(ctx, cfg, window, states));
    std::vector<double> dbs;
    for (const auto& p : pts) dbs.push_back(p.attenuation_db);
    model = predict_rate_visibility(fit->budget, dbs);
  }

  Outputs outs(ctx.out_dir);
  {
    std::ofstream os;
    outs.open("attenuation_sweep.csv", os);
    write_header(os, ctx);
    os << "attenuation_db,rate_hz,visibility,snr,n_events,rate_sigma_hz,visibility_sigma";
    if (predict) os << ",model_rate_hz,model_visibility";
    os << '\n';
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto& p = pts[i];
      os << fmt(p.attenuation_db) << ',' << fmt(p.rate_hz) << ',' << fmt(p.visibility) << ','
         << fmt(p.snr) << ',' << p.n_events << ',' << fmt(p.rate_sigma_hz) << ','
         << fmt(p.visibility_sigma);
      if (predict) os << ',' << fmt(model[i].rate_hz) << ',' << fmt(model[i].visibility);
      os << '\n';
    }
  }
  if (fit) {
    Json j;
    j["meta"] = ctx.meta;
    j["fit"] = fit_json(*fit);
    write_json(outs, "fit.json", j);
  }
  outs.commit();
  out << "wrote " << pts.size() << " attenuation points\n";
  return kOk;
}

std::vector<std::int64_t> tau_grid(const Manifest& m) {
  std::vector<std::int64_t> out;
  if (m.has("taus_ps")) {
    for (const auto& s : m.get_list("taus_ps", "")) out.push_back(parse_int("taus_ps", s));
  } else {
    const auto a = m.get_int("tau_start_ps", 1000);
    const auto b = m.get_int("tau_stop_ps", 29000);
    const auto s = m.get_int("tau_step_ps", 1000);
    if (s <= 0 || a <= 0 || b < a) throw ConfigError("window range must satisfy 0 < start <= stop, step > 0");
    for (auto t = a; t <= b; t += s) out.push_back(t);
  }
  if (out.empty()) throw ConfigError("window list must not be empty");
  for (auto t : out) {
    if (t <= 0) throw ConfigError("windows must be > 0 ps");
  }
  return out;
}

int cmd_sweep_window(Context& ctx, std::ostream& out) {
  const ExperimentConfig cfg = ctx.manifest.experiment();
  cfg.validate();
  const auto taus = tau_grid(ctx.manifest);
  for (auto t : taus) {
    if (t < cfg.tag_resolution_ps) throw ConfigError("windows must be >= tag_resolution_ps");
    if (cfg.tag_scope == TagScope::BobWindows && t > cfg.coverage_ps) {
      throw ConfigError("window exceeds coverage_ps of the sparse tag stream");
    }
  }
  const auto rows = window_sweep_run(cfg, taus, ctx.threads);
  Outputs outs(ctx.out_dir);
  {
    std::ofstream os;
    outs.open("window_sweep.csv", os);
    write_header(os, ctx);
    os << "tau_ps,n_events,visibility,sigma_violation,n_correct,n_wrong,visibility_sigma,ambiguous\n";
    for (const auto& r : rows) {
      os << r.tau_ps << ',' << r.n_events << ',' << fmt(r.visibility) << ','
         << fmt(r.sigma_violation) << ',' << r.n_correct << ',' << r.n_wrong << ','
         << fmt(r.visibility_sigma) << ',' << r.n_ambiguous << '\n';
    }
  }
  outs.commit();
  out << "wrote " << rows.size() << " window rows\n";
  return kOk;
}

LinkBudget budget_from_keys(const Manifest& m) {
  LinkBudget b;
  b.n_hz = m.get_double("n_hz", b.n_hz);
  b.tau_s = m.get_double("tau_s", b.tau_s);
  b.p_bsm_hz = m.get_double("p_bsm_hz", b.p_bsm_hz);
  b.v0 = m.get_double("v0", b.v0);
  b.s2_frac = m.get_double("s2_frac", b.s2_frac);
  b.v2 = m.get_double("v2", b.v2);
  b.receiver_loss_db = m.get_double("receiver_loss_db", b.receiver_loss_db);
  try {
    b.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  return b;
}

int cmd_predict(Context& ctx, std::ostream& out) {
  const LinkBudget b = budget_from_keys(ctx.manifest);
  const auto dbs = attenuation_grid(ctx.manifest);
  const auto pts = predict_rate_visibility(b, dbs);
  Outputs outs(ctx.out_dir);
  {
    std::ofstream os;
    outs.open("predict.csv", os);
    write_header(os, ctx);
    os << "attenuation_db,rate_hz,visibility,snr\n";
    for (const auto& p : pts) {
      os << fmt(p.attenuation_db) << ',' << fmt(p.rate_hz) << ',' << fmt(p.visibility) << ','
         << fmt(p.snr.value) << '\n';
    }
  }
  outs.commit();
  if (auto x = visibility_crossover_db(b)) out << "visibility reaches 1/3 at " << fmt(*x) << " dB\n";
  return kOk;
}

std::vector<SweepSample> read_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open sweep file '" + path + "'");
  std::string line;
  std::vector<std::string> header;
  std::vector<SweepSample> out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto cells = split_list(line);
    if (header.empty()) {
      header = cells;
      continue;
    }
    auto col = [&](std::string_view name) -> std::optional<double> {
      for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) {
        if (header[i] == name) {
          if (cells[i] == "nan") return std::nullopt;
          return parse_double(name, cells[i]);
        }
      }
      return std::nullopt;
    };
    const auto db = col("attenuation_db"), rate = col("rate_hz"), vis = col("visibility");
    if (!db || !rate) throw ValidationError("sweep csv needs attenuation_db and rate_hz columns");
    if (!vis) continue;
    out.push_back({*db, *rate, *vis, col("rate_sigma_hz").value_or(0.0),
                   col("visibility_sigma").value_or(0.0)});
  }
  return out;
}

int cmd_fit(Context& ctx, std::ostream& out) {
  if (!ctx.manifest.has("sweep")) throw UsageError("fit needs --sweep FILE");
  const auto samples = read_sweep_csv(ctx.manifest.get("sweep", ""));
  LinkBudget fixed = budget_from_keys(ctx.manifest);
  if (!ctx.manifest.has("n_hz") || !ctx.manifest.has("tau_s")) {
    // Fall back to the values implied by the experiment keys.
    const ExperimentConfig cfg = ctx.manifest.experiment();
    fixed = fixed_budget(ctx, cfg, window_of(ctx.manifest),
                         states_of(ctx.manifest, "P,M"));
  }
  const BudgetFit fit = fit_budget(samples, fixed);
  Json j;
  j["meta"] = ctx.meta;
  j["fit"] = fit_json(fit);
  Outputs outs(ctx.out_dir);
  write_json(outs, "fit.json", j);
  outs.commit();
  out << "p_bsm_hz " << fmt(fit.budget.p_bsm_hz) << " v0 " << fmt(fit.budget.v0)
      << " s2_frac " << fmt(fit.budget.s2_frac) << (fit.ok ? "" : " (flagged)") << '\n';
  return kOk;
}

// Turns "--key value" / "--key=value" pairs into manifest overrides.
void apply_overrides(Manifest& m, const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string a = args[i];
    if (!a.starts_with("--")) throw UsageError("unexpected argument '" + a + "'");
    a = a.substr(2);
    std::string value;
    if (const auto eq = a.find('='); eq != std::string::npos) {
      value = a.substr(eq + 1);
      a = a.substr(0, eq);
    } else {
      if (i + 1 >= args.size()) throw UsageError("option --" + a + " needs a value");
      value = args[++i];
    }
    m.set(a, value);
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Teleportation link simulator and analysis toolkit", std::string(kToolName)};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version_string()));

  std::string config_path;
  std::string out_dir = ".";
  struct Command {
    const char* name;
    const char* help;
    int (*fn)(Context&, std::ostream&);
    CLI::App* app = nullptr;
  };
  std::vector<Command> commands{
      {"simulate", "run the six-state protocol and reconstruct every output state", cmd_simulate},
      {"tomo-state", "maximum-likelihood state from a counts file", cmd_tomo_state},
      {"tomo-process", "process matrix from the H, V, P, R probe counts", cmd_tomo_process},
      {"sweep-attenuation", "rate and visibility versus link attenuation", cmd_sweep_attenuation},
      {"sweep-window", "visibility versus coincidence window on one tag stream", cmd_sweep_window},
      {"predict", "analytic rate, visibility and SNR curves", cmd_predict},
      {"fit", "fit the analytic model to an attenuation sweep", cmd_fit},
  };
  for (auto& c : commands) {
    c.app = app.add_subcommand(c.name, c.help);
    c.app->allow_extras();
    c.app->add_option("-c,--config", config_path, "key = value configuration file");
    c.app->add_option("-o,--out", out_dir, "output directory");
    c.app->footer("Any configuration key can be overridden with --key value.");
  }

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return kOk;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help();
      return kOk;
    } catch (const CLI::CallForVersion&) {
      out << version_string() << '\n';
      return kOk;
    } catch (const CLI::ParseError& e) {
      throw UsageError(e.what());
    }

    const Command* cmd = nullptr;
    for (const auto& c : commands) {
      if (c.app->parsed()) cmd = &c;
    }
    Context ctx;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw UsageError("cannot open config file '" + config_path + "'");
      ctx.manifest = Manifest::parse(in, config_path);
    }
    apply_overrides(ctx.manifest, cmd->app->remaining());
    ctx.out_dir = out_dir;
    const auto threads = ctx.manifest.get_int("threads", 1);
    if (threads < 1 || threads > 1024) throw ConfigError("threads must lie in [1, 1024]");
    ctx.threads = static_cast<unsigned>(threads);
    const auto seed = ctx.manifest.experiment().seed;
    ctx.comment = "# " + std::string(kToolName) + " " + std::string(version_string()) +
                  " seed=" + std::to_string(seed) + " config=" + ctx.manifest.hash();
    ctx.meta = Json{{"tool", kToolName},
                    {"version", version_string()},
                    {"command", cmd->name},
                    {"seed", seed},
                    {"config_hash", ctx.manifest.hash()}};
    return cmd->fn(ctx, out);
  } catch (const UsageError& e) {
    err << kToolName << ": " << e.what() << '\n';
    return kUsageError;
  } catch (const ConfigError& e) {
    err << kToolName << ": configuration error: " << e.what() << '\n';
    return kUsageError;
  } catch (const CalibrationError& e) {
    err << kToolName << ": calibration error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ValidationError& e) {
    err << kToolName << ": invalid input: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << kToolName << ": error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace qtele::cli
