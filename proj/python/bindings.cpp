#include <sstream>

#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "qms/config.hpp"
#include "qms/dynamics.hpp"
#include "qms/io.hpp"
#include "qms/observables.hpp"
#include "qms/protocols.hpp"
#include "qms/run.hpp"

namespace py = pybind11;
using namespace qms;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Qubit-field lattice simulations";
  m.attr("__version__") = std::string(version());

  py::register_exception<IntegrationBlowup>(m, "IntegrationBlowup", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ConfigSyntaxError>(m, "ConfigSyntaxError", PyExc_ValueError);
  py::register_exception<TooFewCycles>(m, "TooFewCycles", PyExc_ValueError);
  py::register_exception<BracketInvalid>(m, "BracketInvalid", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def_static("reference", &ModelParams::reference)
      .def_readwrite("n_sites", &ModelParams::n_sites)
      .def_readwrite("s", &ModelParams::s)
      .def_readwrite("beta", &ModelParams::beta)
      .def_readwrite("epsilon", &ModelParams::epsilon)
      .def_readwrite("l", &ModelParams::l)
      .def_readwrite("gamma", &ModelParams::gamma)
      .def_readwrite("dt", &ModelParams::dt)
      .def_readwrite("noise_amp", &ModelParams::noise_amp)
      .def_readwrite("rng_seed", &ModelParams::rng_seed)
      .def_readwrite("frozen_v", &ModelParams::frozen_v)
      .def("validate", [](const ModelParams& p) { return validate(p); })
      .def(py::self == py::self)
      .def("__repr__", [](const ModelParams& p) {
        return "ModelParams(" + to_json(p).dump() + ")";
      });

  py::class_<SystemState>(m, "SystemState")
      .def(py::init<>())
      .def_readwrite("tau", &SystemState::tau)
      .def_readwrite("h_ext", &SystemState::h_ext)
      .def_property(
          "a", [](const SystemState& s) { return s.field.a; },
          [](SystemState& s, std::vector<double> a) { s.field.a = std::move(a); })
      .def_property(
          "v", [](const SystemState& s) { return s.field.v; },
          [](SystemState& s, std::vector<double> v) { s.field.v = std::move(v); })
      .def_property(
          "c0", [](const SystemState& s) { return s.qubits.c0; },
          [](SystemState& s, std::vector<complex> c) { s.qubits.c0 = std::move(c); })
      .def_property(
          "c1", [](const SystemState& s) { return s.qubits.c1; },
          [](SystemState& s, std::vector<complex> c) { s.qubits.c1 = std::move(c); })
      .def("__len__", &SystemState::size)
      .def(py::self == py::self);

  m.def("init_vacuum", &init_vacuum, py::arg("params"));
  m.def("init_kink", &init_kink, py::arg("params"), py::arg("center"), py::arg("width"));
  m.def("max_norm_drift", [](const SystemState& s) { return max_norm_drift(s.qubits); });
  m.def("rk4_step", &rk4_step, py::arg("state"), py::arg("params"));
  m.def(
      "evolve",
      [](const SystemState& st, const ModelParams& p, double duration, py::object h_ext) {
        FieldSchedule schedule;
        if (PyCallable_Check(h_ext.ptr())) {
          schedule = h_ext.cast<std::function<double(double)>>();
        } else {
          schedule = constant_field(h_ext.cast<double>());
        }
        return evolve(st, p, duration, schedule);
      },
      py::arg("state"), py::arg("params"), py::arg("duration"), py::arg("h_ext") = 0.0,
      "Advance by duration; h_ext is a number or a callable of tau.");
  m.def("rk4_linear_step_limit", &rk4_linear_step_limit);

  py::class_<EnergyBreakdown>(m, "EnergyBreakdown")
      .def_readonly("e_field", &EnergyBreakdown::e_field)
      .def_readonly("e_int", &EnergyBreakdown::e_int)
      .def_readonly("e_qubit", &EnergyBreakdown::e_qubit)
      .def_readonly("e_total", &EnergyBreakdown::e_total)
      .def_readonly("q_conserved", &EnergyBreakdown::q_conserved);

  py::class_<Soliton>(m, "Soliton")
      .def_readonly("position", &Soliton::position)
      .def_readonly("polarity", &Soliton::polarity)
      .def_readonly("peak_field", &Soliton::peak_field)
      .def_readonly("touches_boundary", &Soliton::touches_boundary);
  py::class_<SolitonCensus>(m, "SolitonCensus")
      .def_readonly("solitons", &SolitonCensus::solitons)
      .def_readonly("net_winding", &SolitonCensus::net_winding)
      .def("__len__", &SolitonCensus::size);

  m.def("energy_breakdown", &energy_breakdown, py::arg("state"), py::arg("params"));
  m.def("trapped_flux", &trapped_flux);
  m.def("net_winding", &net_winding);
  m.def("default_census_threshold", &default_census_threshold);
  m.def(
      "soliton_census",
      [](const SystemState& s, const ModelParams& p, double thr) {
        return soliton_census(s, p, thr > 0 ? thr : default_census_threshold(p));
      },
      py::arg("state"), py::arg("params"), py::arg("threshold") = 0.0);
  m.def(
      "soliton_number",
      [](const SystemState& s, const ModelParams& p, double thr) {
        return soliton_number(s, p, thr > 0 ? thr : default_census_threshold(p));
      },
      py::arg("state"), py::arg("params"), py::arg("threshold") = 0.0);
  m.def("occupation_profile", &occupation_profile);
  m.def("link_field", &link_field);

  py::class_<TransitionEvent>(m, "TransitionEvent")
      .def_readonly("tau", &TransitionEvent::tau)
      .def_readonly("h_ext", &TransitionEvent::h_ext)
      .def_readonly("winding_before", &TransitionEvent::winding_before)
      .def_readonly("winding_after", &TransitionEvent::winding_after)
      .def_readonly("phi_before", &TransitionEvent::phi_before)
      .def_readonly("phi_after", &TransitionEvent::phi_after);
  py::class_<SweepRow>(m, "SweepRow")
      .def_readonly("tau", &SweepRow::tau)
      .def_readonly("h_ext", &SweepRow::h_ext)
      .def_readonly("phi", &SweepRow::phi)
      .def_readonly("winding", &SweepRow::winding)
      .def_readonly("e_total", &SweepRow::e_total)
      .def_readonly("cycle", &SweepRow::cycle);
  py::class_<SweepRecord>(m, "SweepRecord")
      .def(py::init<>())
      .def_readonly("rows", &SweepRecord::rows)
      .def_readonly("events", &SweepRecord::events)
      .def("to_csv", [](const SweepRecord& r) { return rows_to_csv(r.rows); })
      .def("events_csv", [](const SweepRecord& r) { return events_to_csv(r.events); })
      .def_static("from_csv", [](const std::string& rows, const std::string& events) {
        return SweepRecord{rows_from_csv(rows), events_from_csv(events)};
      })
      .def(py::self == py::self);

  py::class_<RelaxOptions>(m, "RelaxOptions")
      .def(py::init<>())
      .def_readwrite("h_ext", &RelaxOptions::h_ext)
      .def_readwrite("max_tau", &RelaxOptions::max_tau)
      .def_readwrite("min_tau", &RelaxOptions::min_tau)
      .def_readwrite("window", &RelaxOptions::window)
      .def_readwrite("tol", &RelaxOptions::tol)
      .def_readwrite("sample_stride", &RelaxOptions::sample_stride)
      .def_readwrite("dwell_tau", &RelaxOptions::dwell_tau)
      .def_readwrite("census_threshold", &RelaxOptions::census_threshold)
      .def_readwrite("initial", &RelaxOptions::initial)
      .def_readwrite("keep_trace", &RelaxOptions::keep_trace);
  py::class_<RelaxationReport>(m, "RelaxationReport")
      .def_readonly("final_state", &RelaxationReport::final_state)
      .def_readonly("steady", &RelaxationReport::steady)
      .def_readonly("elapsed_tau", &RelaxationReport::elapsed_tau)
      .def_readonly("events", &RelaxationReport::events)
      .def_readonly("energy", &RelaxationReport::energy)
      .def_readonly("census", &RelaxationReport::census)
      .def_readonly("winding", &RelaxationReport::winding)
      .def_readonly("soliton_number", &RelaxationReport::soliton_number)
      .def_readonly("phi", &RelaxationReport::phi)
      .def_readonly("renormalizations", &RelaxationReport::renormalizations)
      .def_readonly("trace", &RelaxationReport::trace);
  m.def("relax_at_field", &relax_at_field, py::arg("params"), py::arg("options"),
        py::call_guard<py::gil_scoped_release>());

  py::class_<SweepProtocol>(m, "SweepProtocol")
      .def(py::init<>())
      .def_readwrite("h_max", &SweepProtocol::h_max)
      .def_readwrite("h_min", &SweepProtocol::h_min)
      .def_readwrite("rate", &SweepProtocol::rate)
      .def_readwrite("n_cycles", &SweepProtocol::n_cycles)
      .def_readwrite("settle_tau", &SweepProtocol::settle_tau)
      .def_readwrite("record_stride", &SweepProtocol::record_stride)
      .def_readwrite("target_winding", &SweepProtocol::target_winding)
      .def_readwrite("h_ceiling", &SweepProtocol::h_ceiling)
      .def_readwrite("dwell_tau", &SweepProtocol::dwell_tau)
      .def_readwrite("phase_stride", &SweepProtocol::phase_stride)
      .def_readwrite("first_direction", &SweepProtocol::first_direction)
      .def_readwrite("noise_sign", &SweepProtocol::noise_sign)
      .def_readwrite("match_tol", &SweepProtocol::match_tol)
      .def_readwrite("grid_points", &SweepProtocol::grid_points);

  py::class_<BranchCurve>(m, "BranchCurve")
      .def_readonly("h", &BranchCurve::h)
      .def_readonly("phi", &BranchCurve::phi)
      .def_readonly("winding", &BranchCurve::winding);
  py::class_<CycleLoop>(m, "CycleLoop")
      .def_readonly("cycle", &CycleLoop::cycle)
      .def_readonly("descending", &CycleLoop::descending)
      .def_readonly("ascending", &CycleLoop::ascending)
      .def_readonly("winding_at_zero_descending", &CycleLoop::winding_at_zero_descending)
      .def_readonly("winding_at_zero_ascending", &CycleLoop::winding_at_zero_ascending)
      .def_readonly("phi_start", &CycleLoop::phi_start)
      .def_readonly("phi_end", &CycleLoop::phi_end);
  py::class_<LoopSummary>(m, "LoopSummary")
      .def_readonly("cycles", &LoopSummary::cycles)
      .def_readonly("steady", &LoopSummary::steady)
      .def_readonly("converged", &LoopSummary::converged)
      .def_readonly("last_difference", &LoopSummary::last_difference)
      .def_readonly("h_max", &LoopSummary::h_max)
      .def_readonly("h_min", &LoopSummary::h_min);
  py::class_<SweepResult>(m, "SweepResult")
      .def_readonly("record", &SweepResult::record)
      .def_readonly("summary", &SweepResult::summary)
      .def_readonly("h_max", &SweepResult::h_max)
      .def_readonly("h_min", &SweepResult::h_min)
      .def_readonly("renormalizations", &SweepResult::renormalizations);

  m.def("virgin_then_cycle", &virgin_then_cycle, py::arg("params"), py::arg("protocol"),
        py::call_guard<py::gil_scoped_release>());
  m.def("steady_loop_extract", &steady_loop_extract, py::arg("record"), py::arg("match_tol"),
        py::arg("grid_points") = 201);
  m.def("critical_coupling_scan", &critical_coupling_scan, py::arg("params"), py::arg("h_ext"),
        py::arg("s_lo"), py::arg("s_hi"), py::arg("tol"), py::arg("relax"),
        py::call_guard<py::gil_scoped_release>());

  m.def(
      "validate_config",
      [](const std::string& text) {
        const auto cfg = parse_config(text);
        return std::string(to_string(cfg.protocol));
      },
      py::arg("text"), "Parse and validate config text; returns the protocol name.");
  m.def(
      "run_config",
      [](const std::string& path, std::optional<std::string> out_dir,
         std::optional<std::uint64_t> seed, bool quiet) {
        RunOverrides ov;
        ov.out_dir = out_dir;
        ov.seed = seed;
        ov.quiet = quiet;
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_file(path, std::nullopt, ov, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("path"), py::arg("out_dir") = std::nullopt, py::arg("seed") = std::nullopt,
      py::arg("quiet") = true, "Run a config file; returns (exit_code, stdout, stderr).");
}
