#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cli.hpp"
#include "qtele/config.hpp"
#include "qtele/errors.hpp"
#include "qtele/linkmodel.hpp"
#include "qtele/pipeline.hpp"
#include "qtele/tagio.hpp"
#include "qtele/tomography.hpp"
#include "qtele/version.hpp"

namespace py = pybind11;
using namespace qtele;

namespace {

// Keyword arguments become manifest keys, so Python accepts exactly what a
// config file accepts.
Manifest manifest_of(const py::dict& kwargs) {
  Manifest m;
  for (const auto& [k, v] : kwargs) {
    std::string text;
    if (py::isinstance<py::bool_>(v)) {
      text = v.cast<bool>() ? "true" : "false";
    } else if (py::isinstance<py::list>(v) || py::isinstance<py::tuple>(v)) {
      for (const auto& item : v) {
        if (!text.empty()) text += ",";
        text += py::str(item).cast<std::string>();
      }
    } else {
      text = py::str(v).cast<std::string>();
    }
    m.set(k.cast<std::string>(), text);
  }
  return m;
}

TomographyCounts counts_of(const std::map<std::string, std::pair<std::uint64_t, std::uint64_t>>& in) {
  TomographyCounts c;
  for (const auto& [name, n] : in) c[parse_basis(name)] = {n.first, n.second};
  return c;
}

std::vector<TimeTag> tags_of(const std::vector<std::pair<std::string, std::int64_t>>& in) {
  std::vector<TimeTag> tags;
  tags.reserve(in.size());
  for (const auto& [name, t] : in) {
    const auto d = parse_detector(name);
    if (!d) throw ValidationError("unknown detector " + name);
    tags.push_back({*d, t});
  }
  return tags;
}

py::dict budget_dict(const LinkBudget& b) {
  py::dict d;
  d["attenuation_db"] = b.attenuation_db;
  d["n_hz"] = b.n_hz;
  d["tau_s"] = b.tau_s;
  d["p_bsm_hz"] = b.p_bsm_hz;
  d["v0"] = b.v0;
  d["s2_frac"] = b.s2_frac;
  d["v2"] = b.v2;
  d["receiver_loss_db"] = b.receiver_loss_db;
  return d;
}

}  // namespace

PYBIND11_MODULE(_qtele, m) {
  m.doc() = "Photonic teleportation simulator";
  m.attr("__version__") = std::string(version_string());

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CalibrationError>(m, "CalibrationError", PyExc_ValueError);

  m.def("state", [](const std::string& name) { return PureState::named(name).ket(); },
        py::arg("name"), "Ket (alpha, beta) of one of H, V, P, M, R, L.");
  m.def(
      "fidelity",
      [](const std::string& name, const Matrix2c& rho) {
        return fidelity(PureState::named(name), DensityMatrix(rho));
      },
      py::arg("state"), py::arg("rho"));
  m.def(
      "trace_distance",
      [](const Matrix2c& a, const Matrix2c& b) {
        return trace_distance(DensityMatrix(a), DensityMatrix(b));
      },
      py::arg("a"), py::arg("b"));

  py::class_<LinkBudget>(m, "LinkBudget")
      .def(py::init([](const py::kwargs& kw) {
        LinkBudget b;
        py::object o = py::cast(&b, py::return_value_policy::reference);
        for (const auto& [k, v] : kw) py::setattr(o, k, v);
        return b;
      }))
      .def_readwrite("attenuation_db", &LinkBudget::attenuation_db)
      .def_readwrite("n_hz", &LinkBudget::n_hz)
      .def_readwrite("tau_s", &LinkBudget::tau_s)
      .def_readwrite("p_bsm_hz", &LinkBudget::p_bsm_hz)
      .def_readwrite("v0", &LinkBudget::v0)
      .def_readwrite("s2_frac", &LinkBudget::s2_frac)
      .def_readwrite("v2", &LinkBudget::v2)
      .def_readwrite("receiver_loss_db", &LinkBudget::receiver_loss_db)
      .def("eta", &LinkBudget::eta)
      .def("to_dict", &budget_dict)
      .def("__repr__", [](const LinkBudget& b) {
        return "LinkBudget(" + py::repr(budget_dict(b)).cast<std::string>() + ")";
      });

  m.def(
      "snr",
      [](double attenuation_db, double n_hz, double tau_s) {
        LinkBudget b;
        b.attenuation_db = attenuation_db;
        b.n_hz = n_hz;
        b.tau_s = tau_s;
        return snr(b).value;
      },
      py::arg("attenuation_db"), py::arg("n_hz"), py::arg("tau_s"),
      "eta / (n tau); inf when n or tau is zero.");
  m.def(
      "predict",
      [](const LinkBudget& b, const std::vector<double>& dbs) {
        std::vector<std::tuple<double, double, double, double>> rows;
        for (const auto& p : predict_rate_visibility(b, dbs)) {
          rows.emplace_back(p.attenuation_db, p.rate_hz, p.visibility, p.snr.value);
        }
        return rows;
      },
      py::arg("budget"), py::arg("attenuation_db"),
      "Rows of (attenuation_db, rate_hz, visibility, snr).");
  m.def("crossover_db", [](const LinkBudget& b) { return visibility_crossover_db(b); },
        py::arg("budget"));
  m.def(
      "fit",
      [](const std::vector<std::tuple<double, double, double, double, double>>& rows,
         const LinkBudget& fixed) {
        std::vector<SweepSample> s;
        for (const auto& [db, r, v, sr, sv] : rows) s.push_back({db, r, v, sr, sv});
        const BudgetFit f = fit_budget(s, fixed);
        py::dict d;
        d["budget"] = f.budget;
        d["ok"] = f.ok;
        d["flags"] = f.flags;
        d["rate_residual_norm"] = f.rate_residual_norm;
        d["visibility_residual_norm"] = f.visibility_residual_norm;
        return d;
      },
      py::arg("samples"), py::arg("fixed"),
      "samples: (attenuation_db, rate_hz, visibility, rate_sigma_hz, visibility_sigma).");

  m.def(
      "mle_state",
      [](const std::map<std::string, std::pair<std::uint64_t, std::uint64_t>>& counts) {
        return mle_state(counts_of(counts)).rho.matrix();
      },
      py::arg("counts"), "counts: {'HV': (n_plus, n_minus), ...}; returns rho.");
  m.def(
      "process_matrix",
      [](const std::array<Matrix2c, 4>& outputs) {
        std::array<DensityMatrix, 4> rhos{DensityMatrix(outputs[0]), DensityMatrix(outputs[1]),
                                          DensityMatrix(outputs[2]), DensityMatrix(outputs[3])};
        const auto r = process_from_pairs(std::span<const PureState, 4>(probe_states()),
                                          std::span<const DensityMatrix, 4>(rhos));
        return r.projected.chi();
      },
      py::arg("outputs"), "chi from the output states of the H, V, P, R probes.");

  m.def(
      "find_fourfolds",
      [](const std::vector<std::pair<std::string, std::int64_t>>& tags, std::int64_t tau_ps) {
        const auto r = find_fourfolds(tags_of(tags), tau_ps);
        py::list events;
        for (const auto& e : r.events) {
          events.append(py::make_tuple(std::string(outcome_name(e.outcome)),
                                       std::string(detector_name(e.bob_detector)),
                                       e.epoch_time_ps));
        }
        py::dict d;
        d["events"] = events;
        d["ambiguous"] = r.ambiguous;
        return d;
      },
      py::arg("tags"), py::arg("tau_ps"),
      "tags: (detector, time_ps) sorted by time; events are (outcome, bob detector, time).");
  m.def(
      "read_tags",
      [](const std::string& path) {
        const auto f = read_tags(path);
        std::vector<std::pair<std::string, std::int64_t>> out;
        out.reserve(f.tags.size());
        for (const auto& t : f.tags) out.emplace_back(std::string(detector_name(t.detector)), t.time_ps);
        return out;
      },
      py::arg("path"));

  m.def(
      "teleport",
      [](const std::vector<std::string>& states, unsigned threads, const py::kwargs& kw) {
        const Manifest man = manifest_of(kw);
        const ExperimentConfig cfg = man.experiment();
        cfg.validate();
        const std::vector<Basis> bases{Basis::HV, Basis::PM, Basis::RL};
        ProtocolReport rep;
        {
          py::gil_scoped_release release;
          rep = run_protocol(cfg, states, bases, man.get_int("window_ps", 3000), threads);
        }
        py::dict out;
        for (const auto& s : rep.states) {
          py::dict d;
          d["fidelity"] = s.fidelity;
          d["events"] = s.events;
          d["ambiguous"] = s.ambiguous;
          d["rho"] = s.mle.rho.matrix();
          out[py::str(s.name)] = d;
        }
        py::dict r;
        r["states"] = out;
        r["average_fidelity"] = rep.average_fidelity;
        r["total_events"] = rep.total_events;
        return r;
      },
      py::arg("states") = std::vector<std::string>{"H", "V", "P", "M", "R", "L"},
      py::arg("threads") = 1u,
      "Six-state tomography run; configuration keys are passed as keywords.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> full{"qtele"};
        full.insert(full.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        for (const auto& a : full) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a qtele command in-process; returns (exit_code, stdout, stderr).");
}
