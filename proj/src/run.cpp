#include "qms/run.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "qms/io.hpp"

namespace qms {

using nlohmann::json;

std::size_t worker_limit() {
  const char* env = std::getenv("QMS_THREADS");
  if (!env || !*env) return std::max(1u, std::thread::hardware_concurrency());
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1)
    throw ConfigError({std::string("QMS_THREADS must be a positive integer, got '") + env + "'"});
  return static_cast<std::size_t>(v);
}

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json relax_json(const RelaxOptions& o) {
  return {{"h_ext", o.h_ext},         {"max_tau", o.max_tau},
          {"min_tau", o.min_tau},     {"window", o.window},
          {"tol", o.tol},             {"sample_stride", o.sample_stride},
          {"dwell_tau", o.dwell_tau}, {"census_threshold", o.census_threshold}};
}

json sweep_json(const SweepProtocol& s) {
  json j{{"h_max", s.h_max},
         {"h_min", s.h_min},
         {"rate", s.rate},
         {"n_cycles", s.n_cycles},
         {"settle_tau", s.settle_tau},
         {"record_stride", s.record_stride},
         {"h_ceiling", s.h_ceiling},
         {"dwell_tau", s.dwell_tau},
         {"phase_stride", s.phase_stride},
         {"census_threshold", s.census_threshold},
         {"first_direction", s.first_direction},
         {"noise_sign", s.noise_sign},
         {"match_tol", s.match_tol},
         {"grid_points", s.grid_points}};
  j["target_winding"] = s.target_winding ? json(*s.target_winding) : json(nullptr);
  if (s.target_winding) j["h_max"] = j["h_min"] = "auto";
  return j;
}

json energy_json(const EnergyBreakdown& e) {
  return {{"e_field", e.e_field}, {"e_int", e.e_int}, {"e_qubit", e.e_qubit},
          {"e_total", e.e_total}, {"q_conserved", e.q_conserved}};
}

std::string fixed(double x, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << x;
  return os.str();
}

void add_record(OutputSet& files, const std::vector<Format>& formats, const std::string& name,
                const SweepRecord& rec, json extra) {
  for (const Format f : formats) {
    if (f == Format::csv) {
      files.add(name + ".csv", rows_to_csv(rec.rows));
      files.add(name + ".events.csv", events_to_csv(rec.events));
    } else {
      json j = to_json(rec);
      for (auto& [k, v] : extra.items()) j[k] = v;
      files.add(name + ".json", j.dump(1) + "\n");
    }
  }
}

int run_relax(const RunConfig& cfg, OutputSet& files, json& meta_protocol, std::ostream& out) {
  RelaxOptions opt = cfg.relax.options;
  if (cfg.relax.kink_initial) {
    const double center = cfg.relax.kink_center >= 0.0
                              ? cfg.relax.kink_center
                              : 0.5 * static_cast<double>(cfg.model.n_sites - 1);
    const double width = cfg.relax.kink_width > 0.0
                             ? cfg.relax.kink_width
                             : cfg.model.beta / std::sqrt(cfg.model.frozen_v.value_or(1.0));
    opt.initial = init_kink(cfg.model, center, width);
  }
  const auto rep = relax_at_field(cfg.model, opt);

  meta_protocol = {{"kind", "relax"}, {"options", relax_json(cfg.relax.options)}};
  meta_protocol["options"]["initial"] = cfg.relax.kink_initial ? "kink" : "vacuum";
  json census = json::array();
  for (const auto& s : rep.census.solitons)
    census.push_back({{"position", s.position},
                      {"polarity", s.polarity},
                      {"peak_field", s.peak_field},
                      {"touches_boundary", s.touches_boundary}});
  json result{{"steady", rep.steady},
              {"elapsed_tau", rep.elapsed_tau},
              {"winding", rep.winding},
              {"soliton_number", rep.soliton_number},
              {"phi", rep.phi},
              {"renormalizations", rep.renormalizations},
              {"energy", energy_json(rep.energy)},
              {"census", census}};
  meta_protocol["result"] = result;

  for (const Format f : cfg.formats)
    if (f == Format::csv) files.add(cfg.name + ".state.csv", state_to_csv(rep.final_state));
  json state_extra;
  {
    json st;
    st["a"] = rep.final_state.field.a;
    st["v"] = rep.final_state.field.v;
    std::vector<double> c0r, c0i, c1r, c1i;
    for (std::size_t i = 0; i < rep.final_state.size(); ++i) {
      c0r.push_back(rep.final_state.qubits.c0[i].real());
      c0i.push_back(rep.final_state.qubits.c0[i].imag());
      c1r.push_back(rep.final_state.qubits.c1[i].real());
      c1i.push_back(rep.final_state.qubits.c1[i].imag());
    }
    st["c0_re"] = c0r;
    st["c0_im"] = c0i;
    st["c1_re"] = c1r;
    st["c1_im"] = c1i;
    state_extra["state"] = st;
  }
  add_record(files, cfg.formats, cfg.name, rep.trace, state_extra);

  out << "relax winding=" << rep.winding << " phi=" << fixed(rep.phi, 6)
      << " e_total=" << fixed(rep.energy.e_total, 6) << " solitons=" << rep.soliton_number
      << " steady=" << (rep.steady ? "yes" : "no") << " tau=" << fixed(rep.elapsed_tau, 2) << "\n";
  return kExitOk;
}

int run_sweep(const RunConfig& cfg, OutputSet& files, json& meta_protocol, std::ostream& out) {
  const auto res = virgin_then_cycle(cfg.model, cfg.sweep);
  const auto& sum = res.summary;
  const auto points = loop_points(sum);

  meta_protocol = {{"kind", "sweep"}, {"options", sweep_json(cfg.sweep)}};
  json result{{"h_max", res.h_max},
              {"h_min", res.h_min},
              {"cycles", sum.cycles.size()},
              {"converged", sum.converged},
              {"last_difference", sum.last_difference},
              {"renormalizations", res.renormalizations}};
  if (!sum.cycles.empty()) {
    result["winding_at_zero_descending"] = sum.steady.winding_at_zero_descending;
    result["winding_at_zero_ascending"] = sum.steady.winding_at_zero_ascending;
    result["loop_closure"] = std::abs(sum.steady.phi_end - sum.steady.phi_start);
  }
  json transitions = json::array();
  for (const auto& t : sum.transitions)
    transitions.push_back({{"cycle", t.cycle},
                           {"h_ext", t.h_ext},
                           {"winding_before", t.winding_before},
                           {"winding_after", t.winding_after}});
  result["transitions"] = transitions;
  meta_protocol["result"] = result;

  json loop_extra;
  for (const Format f : cfg.formats)
    if (f == Format::csv) files.add(cfg.name + ".loop.csv", loop_to_csv(points));
  json loop = json::array();
  for (const auto& p : points)
    loop.push_back({{"cycle", p.cycle}, {"branch", p.branch}, {"h_ext", p.h_ext},
                    {"phi", p.phi}, {"winding", p.winding}});
  loop_extra["loop"] = loop;
  add_record(files, cfg.formats, cfg.name, res.record, loop_extra);

  const auto& last = res.record.rows.back();
  out << "sweep winding=" << last.winding << " phi=" << fixed(last.phi, 6)
      << " e_total=" << fixed(last.e_total, 6) << " h_max=" << fixed(res.h_max, 6)
      << " converged=" << (sum.converged ? "yes" : "no") << "\n";
  return kExitOk;
}

int run_scan(const RunConfig& cfg, OutputSet& files, json& meta_protocol, std::ostream& out) {
  const auto& sc = cfg.scan;
  const auto s_star = critical_coupling_scan_many(cfg.model, sc.h_values, sc.s_lo, sc.s_hi,
                                                  sc.tol, sc.relax, worker_limit());
  std::vector<ScanPoint> points;
  for (std::size_t i = 0; i < s_star.size(); ++i) points.push_back({sc.h_values[i], s_star[i]});

  meta_protocol = {{"kind", "scan"},
                   {"options",
                    {{"h_ext", sc.h_values},
                     {"s_lo", sc.s_lo},
                     {"s_hi", sc.s_hi},
                     {"tol", sc.tol},
                     {"relax", relax_json(sc.relax)}}}};
  meta_protocol["result"] = {{"s_star", s_star}};

  for (const Format f : cfg.formats) {
    if (f == Format::csv) {
      files.add(cfg.name + ".csv", scan_to_csv(points));
    } else {
      json arr = json::array();
      for (const auto& p : points) arr.push_back({{"h_ext", p.h_ext}, {"s_star", p.s_star}});
      files.add(cfg.name + ".json", json{{"points", arr}}.dump(1) + "\n");
    }
  }

  out << "scan winding=0 points=" << points.size() << " s_star=";
  for (std::size_t i = 0; i < s_star.size(); ++i) out << (i ? "," : "") << fixed(s_star[i], 4);
  out << "\n";
  return kExitOk;
}

}  // namespace

int run(RunConfig cfg, const RunOverrides& ov, std::ostream& out, std::ostream& err) {
  if (ov.seed) cfg.model.rng_seed = *ov.seed;
  if (ov.format) cfg.formats = {*ov.format};
  if (ov.out_dir) cfg.out_dir = *ov.out_dir;

  OutputSet files(cfg.out_dir);
  json meta_protocol;
  int status = kExitOk;
  try {
    if (cfg.protocol == ProtocolKind::scan) worker_limit();
    switch (cfg.protocol) {
      case ProtocolKind::relax: status = run_relax(cfg, files, meta_protocol, out); break;
      case ProtocolKind::sweep: status = run_sweep(cfg, files, meta_protocol, out); break;
      case ProtocolKind::scan: status = run_scan(cfg, files, meta_protocol, out); break;
    }
  } catch (const IntegrationBlowup& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return kExitConfig;
  } catch (const BracketInvalid& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "configuration failure: " << e.what() << "\n";
    return kExitConfig;
  }

  if (!ov.quiet && meta_protocol.contains("result")) {
    const auto& r = meta_protocol["result"];
    if (r.contains("renormalizations") && r["renormalizations"].get<std::uint64_t>() > 0)
      err << "warning: qubit amplitudes renormalized on " << r["renormalizations"]
          << " steps (norm drift above " << kNormTol << ")\n";
  }

  files.add(cfg.name + ".meta.json",
            metadata(cfg.model, meta_protocol, utc_timestamp()).dump(1) + "\n");
  try {
    files.commit();
  } catch (const IoError& e) {
    err << "output failure: " << e.what() << "\n";
    return kExitConfig;
  }
  if (!ov.quiet)
    for (const auto& n : files.names()) err << "wrote " << (files.dir() / n).string() << "\n";
  return status;
}

int run_file(const std::string& path, std::optional<ProtocolKind> expected,
             const RunOverrides& ov, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = load_config(path);
  } catch (const ConfigSyntaxError& e) {
    err << path << ": syntax error at " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << path << ": " << e.what() << "\n";
    return kExitConfig;
  }
  if (expected && *expected != cfg.protocol) {
    err << path << ": config describes a " << to_string(cfg.protocol) << " run, not "
        << to_string(*expected) << "\n";
    return kExitConfig;
  }
  return run(std::move(cfg), ov, out, err);
}

int validate_file(const std::string& path, std::ostream& out, std::ostream& err) {
  try {
    const auto cfg = load_config(path);
    out << "valid " << to_string(cfg.protocol) << " config\n";
    return kExitOk;
  } catch (const ConfigSyntaxError& e) {
    err << path << ": syntax error at " << e.what() << "\n";
  } catch (const ConfigError& e) {
    err << path << ": " << e.what() << "\n";
  }
  return kExitConfig;
}

}  // namespace qms
