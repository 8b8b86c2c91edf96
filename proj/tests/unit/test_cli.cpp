#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result qtele_run(std::vector<std::string> args) {
  args.insert(args.begin(), "qtele");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = qtele::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("qtele_cli_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const char* kIdeal =
    "efficiency = 1\n"
    "dark_rate_hz = 0\n"
    "g1 = 0.1\n"
    "g2 = 0.1\n"
    "xi = 1\n"
    "pulses = 3e6\n"
    "seed = 5\n";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage and configuration errors exit with 2") {
  CHECK(qtele_run({}).code == 2);
  CHECK(qtele_run({"frobnicate"}).code == 2);
  CHECK(qtele_run({"simulate", "--pulses", "0"}).code == 2);
  CHECK(qtele_run({"simulate", "--no_such_key", "1"}).code == 2);
  CHECK(qtele_run({"simulate", "--config", "/nonexistent/file"}).code == 2);
  const auto r = qtele_run({"simulate", "--g1", "0.9"});
  CHECK(r.code == 2);
  CHECK(r.err.find("g1") != std::string::npos);
  CHECK(qtele_run({"--help"}).code == 0);
}

TEST_CASE("tomo-process names a missing probe") {
  TempDir tmp;
  write(tmp.path / "h.csv", "basis,n_plus,n_minus\nHV,100,0\nPM,50,50\nRL,50,50\n");
  const auto r = qtele_run({"tomo-process", "-o", tmp.path.string(), "--probe_H",
                            (tmp.path / "h.csv").string(), "--probe_V", (tmp.path / "h.csv").string(),
                            "--probe_R", (tmp.path / "h.csv").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("probe P") != std::string::npos);
  CHECK_FALSE(fs::exists(tmp.path / "chi.json"));
}

TEST_CASE("tomo-process on identity data") {
  TempDir tmp;
  const std::pair<const char*, const char*> probes[] = {
      {"H", "HV,1000,0\nPM,500,500\nRL,500,500\n"},
      {"V", "HV,0,1000\nPM,500,500\nRL,500,500\n"},
      {"P", "HV,500,500\nPM,1000,0\nRL,500,500\n"},
      {"R", "HV,500,500\nPM,500,500\nRL,1000,0\n"}};
  std::vector<std::string> args{"tomo-process", "-o", tmp.path.string()};
  for (auto [name, body] : probes) {
    const fs::path p = tmp.path / (std::string(name) + ".csv");
    write(p, std::string("basis,n_plus,n_minus\n") + body);
    args.push_back(std::string("--probe_") + name);
    args.push_back(p.string());
  }
  REQUIRE(qtele_run(args).code == 0);
  const auto chi = nlohmann::json::parse(slurp(tmp.path / "chi.json"));
  CHECK(chi["process_fidelity"].get<double>() >= 0.999);
  CHECK(chi["chi_raw"]["real"].size() == 4);
  const std::string cloud = slurp(tmp.path / "ellipsoid.csv");
  CHECK(cloud.rfind("# qtele ", 0) == 0);
  CHECK(std::count(cloud.begin(), cloud.end(), '\n') == 1024 + 2);
}

TEST_CASE("predict with no dark counts keeps the visibility at v0") {
  TempDir tmp;
  REQUIRE(qtele_run({"predict", "-o", tmp.path.string(), "--n_hz", "0", "--v0", "0.9"}).code == 0);
  std::istringstream csv(slurp(tmp.path / "predict.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line.rfind("# qtele ", 0) == 0);
  std::getline(csv, line);
  CHECK(line == "attenuation_db,rate_hz,visibility,snr");
  int rows = 0;
  while (std::getline(csv, line)) {
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1), c3 = line.find(',', c2 + 1);
    CHECK(line.substr(c2 + 1, c3 - c2 - 1) == "0.9");
    CHECK(line.substr(c3 + 1) == "inf");
    ++rows;
  }
  CHECK(rows == 13);
}

TEST_CASE("simulate writes counts, per-state tomography and a summary") {
  TempDir tmp;
  write(tmp.path / "run.cfg", kIdeal);
  const auto r = qtele_run({"simulate", "-c", (tmp.path / "run.cfg").string(), "-o",
                            (tmp.path / "out").string(), "--charlie_states", "H,P", "--emit_tags",
                            "true"});
  REQUIRE(r.code == 0);
  const auto summary = nlohmann::json::parse(slurp(tmp.path / "out" / "summary.json"));
  CHECK(summary["average_fidelity"].get<double>() >= 0.99);
  CHECK(summary["seed"].get<int>() == 5);
  CHECK(summary["states"].contains("P"));
  for (const char* f : {"counts.csv", "tomo_H.csv", "tomo_P.csv", "tags_P_RL.qtt"}) {
    CHECK(fs::exists(tmp.path / "out" / f));
  }
  CHECK(slurp(tmp.path / "out" / "tags_P_RL.qtt").rfind("QTT1", 0) == 0);

  // The per-state counts feed straight into tomo-state.
  REQUIRE(qtele_run({"tomo-state", "-o", (tmp.path / "out").string(), "--counts",
                     (tmp.path / "out" / "tomo_P.csv").string(), "--ideal_state", "P"})
              .code == 0);
  const auto st = nlohmann::json::parse(slurp(tmp.path / "out" / "state.json"));
  CHECK(st["fidelity"].get<double>() >= 0.99);
}

TEST_CASE("failed runs leave no partial output") {
  TempDir tmp;
  write(tmp.path / "blocker", "not a directory");
  const auto r = qtele_run({"predict", "-o", (tmp.path / "blocker" / "sub").string()});
  CHECK(r.code == 1);
  CHECK(fs::is_regular_file(tmp.path / "blocker"));
}

TEST_CASE("sweep commands and fit") {
  TempDir tmp;
  write(tmp.path / "run.cfg", std::string(kIdeal) + "dark_rate_hz.D5 = 2e5\ndark_rate_hz.D6 = 2e5\n");
  const std::string cfg = (tmp.path / "run.cfg").string();
  REQUIRE(qtele_run({"sweep-window", "-c", cfg, "-o", tmp.path.string(), "--charlie_state", "P",
                     "--bob_basis", "PM", "--taus_ps", "1000,3000,13000"})
              .code == 0);
  const std::string ws = slurp(tmp.path / "window_sweep.csv");
  CHECK(ws.find("\ntau_ps,n_events,visibility,sigma_violation,") != std::string::npos);
  CHECK(qtele_run({"sweep-window", "-c", cfg, "-o", tmp.path.string(), "--charlie_state", "P",
                   "--bob_basis", "HV"})
            .code == 2);

  REQUIRE(qtele_run({"sweep-attenuation", "-c", cfg, "-o", tmp.path.string(), "--att_start_db", "0",
                     "--att_stop_db", "15", "--att_step_db", "5", "--pulse_scaling_knee_db", "15",
                     "--predict", "true"})
              .code == 0);
  const std::string as = slurp(tmp.path / "attenuation_sweep.csv");
  CHECK(as.find("\nattenuation_db,rate_hz,visibility,snr,") != std::string::npos);
  CHECK(as.find("model_rate_hz") != std::string::npos);
  CHECK(fs::exists(tmp.path / "fit.json"));

  const auto fit = qtele_run({"fit", "-c", cfg, "-o", (tmp.path / "f").string(), "--sweep",
                              (tmp.path / "attenuation_sweep.csv").string()});
  CHECK(fit.code == 0);
  CHECK(fs::exists(tmp.path / "f" / "fit.json"));
  CHECK(qtele_run({"sweep-attenuation", "--att_start_db", "10", "--att_stop_db", "5"}).code == 2);
}

TEST_CASE("outputs do not depend on the worker count") {
  TempDir tmp;
  write(tmp.path / "run.cfg", std::string(kIdeal) + "dark_rate_hz = 5e4\nattenuation_db = 3\n");
  const std::string cfg = (tmp.path / "run.cfg").string();
  for (const char* t : {"1", "3"}) {
    REQUIRE(qtele_run({"simulate", "-c", cfg, "-o", (tmp.path / t).string(), "--threads", t,
                       "--charlie_states", "P", "--emit_tags", "true"})
                .code == 0);
  }
  for (const char* f : {"counts.csv", "tomo_P.csv", "tags_P_PM.qtt"}) {
    CHECK(slurp(tmp.path / "1" / f) == slurp(tmp.path / "3" / f));
  }
}

}  // TEST_SUITE
