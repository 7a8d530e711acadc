#include "qms/protocols.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace qms {

SweepRow make_row(const SystemState& st, const ModelParams& p, int winding, int cycle) {
  const auto e = energy_breakdown(st, p);
  SweepRow r;
  r.tau = st.tau;
  r.h_ext = st.h_ext;
  r.phi = trapped_flux(st);
  r.winding = winding;
  r.e_field = e.e_field;
  r.e_int = e.e_int;
  r.e_qubit = e.e_qubit;
  r.e_total = e.e_total;
  r.q_conserved = e.q_conserved;
  r.max_excitation = max_excitation(st);
  r.cycle = cycle;
  return r;
}

std::optional<TransitionEvent> PhaseTracker::update(double tau, double h_ext, double phi,
                                                    int raw) {
  if (raw == settled_) {
    candidate_.reset();
    last_settled_phi_ = phi;
    return std::nullopt;
  }
  if (!candidate_ || *candidate_ != raw) {
    candidate_ = raw;
    candidate_tau_ = tau;
    candidate_h_ = h_ext;
    candidate_phi_ = phi;
  }
  if (tau - candidate_tau_ < dwell_) return std::nullopt;

  TransitionEvent ev{candidate_tau_, candidate_h_, settled_, raw, last_settled_phi_,
                     candidate_phi_};
  settled_ = raw;
  last_settled_phi_ = phi;
  candidate_.reset();
  return ev;
}

namespace {

double census_threshold(double requested, const ModelParams& p) {
  return requested > 0.0 ? requested : default_census_threshold(p);
}

}  // namespace

RelaxationReport relax_at_field(const ModelParams& params, const RelaxOptions& opt) {
  require_valid(params);
  if (!(opt.max_tau > 0.0)) throw std::invalid_argument("relax_at_field: max_tau must be > 0");
  if (opt.window == 0) throw std::invalid_argument("relax_at_field: window must be >= 1");
  if (opt.sample_stride == 0)
    throw std::invalid_argument("relax_at_field: sample_stride must be >= 1");

  SystemState st = opt.initial ? *opt.initial : init_vacuum(params);
  if (!is_consistent(st, params.n_sites))
    throw std::invalid_argument("relax_at_field: initial state does not match n_sites");
  st.h_ext = opt.h_ext;
  const double thr = census_threshold(opt.census_threshold, params);

  Evolver ev(params);
  PhaseTracker tracker(soliton_number(st, params, thr), opt.dwell_tau);
  RelaxationReport rep;
  std::vector<SteadySample> samples;
  const double tau0 = st.tau;
  const auto total = static_cast<std::uint64_t>(std::llround(opt.max_tau / params.dt));
  const auto field = constant_field(opt.h_ext);

  if (opt.keep_trace) rep.trace.rows.push_back(make_row(st, params, tracker.settled(), 0));
  std::uint64_t done = 0;
  while (done < total) {
    const std::uint64_t chunk = std::min(opt.sample_stride, total - done);
    ev.run_steps(st, chunk, field);
    done += chunk;

    const double phi = trapped_flux(st);
    if (auto e = tracker.update(st.tau, st.h_ext, phi, soliton_number(st, params, thr)))
      rep.events.push_back(*e);
    const auto energy = energy_breakdown(st, params);
    samples.push_back({energy.e_total, tracker.settled()});
    if (opt.keep_trace) rep.trace.rows.push_back(make_row(st, params, tracker.settled(), 0));

    const double elapsed = st.tau - tau0;
    if (elapsed + 0.5 * params.dt >= opt.min_tau && samples.size() >= opt.window &&
        is_steady(samples, opt.window, opt.tol)) {
      rep.steady = true;
      break;
    }
  }
  rep.trace.events = rep.events;

  rep.elapsed_tau = st.tau - tau0;
  rep.energy = energy_breakdown(st, params);
  rep.census = soliton_census(st, params, thr);
  rep.winding = net_winding(st);
  rep.soliton_number = tracker.settled();
  rep.phi = trapped_flux(st);
  rep.renormalizations = ev.renormalizations();
  rep.final_state = std::move(st);
  return rep;
}

std::vector<std::string> validate(const SweepProtocol& p) {
  std::vector<std::string> out;
  auto finite = [](double x) { return std::isfinite(x); };
  if (!p.target_winding) {
    if (!finite(p.h_max) || !finite(p.h_min)) {
      out.emplace_back("h_max and h_min must be finite");
    } else if (!(p.h_max > p.h_min)) {
      out.emplace_back("h_max must be > h_min");
    } else if (p.first_direction > 0 ? !(p.h_max > 0.0) : !(p.h_min < 0.0)) {
      out.emplace_back("the virgin ramp must move away from H = 0");
    }
  } else {
    if (*p.target_winding < 1) out.emplace_back("target_winding must be >= 1");
    if (!(p.h_ceiling > 0.0) || !finite(p.h_ceiling)) out.emplace_back("h_ceiling must be > 0");
  }
  if (!(p.rate > 0.0) || !finite(p.rate)) out.emplace_back("rate must be > 0");
  if (p.n_cycles < 1) out.emplace_back("n_cycles must be >= 1");
  if (!(p.settle_tau >= 0.0) || !finite(p.settle_tau)) out.emplace_back("settle_tau must be >= 0");
  if (p.record_stride == 0) out.emplace_back("record_stride must be >= 1");
  if (p.phase_stride == 0) out.emplace_back("phase_stride must be >= 1");
  if (!(p.dwell_tau >= 0.0) || !finite(p.dwell_tau)) out.emplace_back("dwell_tau must be >= 0");
  if (p.first_direction != 1 && p.first_direction != -1)
    out.emplace_back("first_direction must be +1 or -1");
  if (p.noise_sign != 1.0 && p.noise_sign != -1.0) out.emplace_back("noise_sign must be +1 or -1");
  if (!(p.match_tol > 0.0)) out.emplace_back("match_tol must be > 0");
  if (p.grid_points < 2) out.emplace_back("grid_points must be >= 2");
  return out;
}

SweepBlowup::SweepBlowup(const IntegrationBlowup& cause, int cycle, double h_ext)
    : IntegrationBlowup(cause), cycle_(cycle), h_ext_(h_ext) {
  std::ostringstream os;
  os.precision(17);
  os << cause.what() << " (cycle " << cycle << ", h_ext " << h_ext << ")";
  message_ = os.str();
}

namespace {

struct Branch {
  std::vector<const SweepRow*> rows;  // in sweep order
  bool descending = false;
};

// Winding at the first row that reaches h in sweep direction.
int winding_at(const Branch& b, double h) {
  for (const auto* r : b.rows)
    if (b.descending ? r->h_ext <= h : r->h_ext >= h) return r->winding;
  return b.rows.back()->winding;
}

double phi_at(const Branch& b, double h) {
  const auto& rs = b.rows;
  for (std::size_t i = 1; i < rs.size(); ++i) {
    const double h0 = rs[i - 1]->h_ext, h1 = rs[i]->h_ext;
    const bool inside = b.descending ? (h <= h0 && h >= h1) : (h >= h0 && h <= h1);
    if (!inside) continue;
    if (h1 == h0) return rs[i]->phi;
    const double t = (h - h0) / (h1 - h0);
    return rs[i - 1]->phi + t * (rs[i]->phi - rs[i - 1]->phi);
  }
  // Outside the sampled range: nearest end.
  const bool before = b.descending ? h > rs.front()->h_ext : h < rs.front()->h_ext;
  return before ? rs.front()->phi : rs.back()->phi;
}

BranchCurve sample_branch(const Branch& b, double lo, double hi, std::size_t points) {
  BranchCurve c;
  for (std::size_t k = 0; k < points; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(points - 1);
    const double h = b.descending ? hi - t * (hi - lo) : lo + t * (hi - lo);
    c.h.push_back(h);
    c.phi.push_back(phi_at(b, h));
    c.winding.push_back(winding_at(b, h));
  }
  return c;
}

struct SplitCycle {
  int cycle = 0;
  Branch first, second;
  double phi_start = 0.0, phi_end = 0.0;
};

std::vector<SplitCycle> split_cycles(const SweepRecord& rec) {
  std::vector<SplitCycle> out;
  const auto& rows = rec.rows;
  std::size_t i = 0;
  while (i < rows.size() && rows[i].cycle < 1) ++i;
  while (i < rows.size()) {
    const int c = rows[i].cycle;
    std::vector<const SweepRow*> cyc;
    // The cycle starts from the state the previous one ended in.
    if (i > 0) cyc.push_back(&rows[i - 1]);
    for (; i < rows.size() && rows[i].cycle == c; ++i) cyc.push_back(&rows[i]);
    if (cyc.size() < 3) continue;

    const double h_start = cyc.front()->h_ext;
    const auto [mn, mx] = std::minmax_element(cyc.begin(), cyc.end(),
        [](const SweepRow* x, const SweepRow* y) { return x->h_ext < y->h_ext; });
    const bool down_first = (*mx)->h_ext - h_start < h_start - (*mn)->h_ext;
    const auto turn = static_cast<std::size_t>((down_first ? mn : mx) - cyc.begin());

    SplitCycle s;
    s.cycle = c;
    s.first.descending = down_first;
    s.second.descending = !down_first;
    s.first.rows.assign(cyc.begin(), cyc.begin() + static_cast<std::ptrdiff_t>(turn) + 1);
    s.second.rows.assign(cyc.begin() + static_cast<std::ptrdiff_t>(turn), cyc.end());
    if (s.first.rows.size() < 2 || s.second.rows.size() < 2) continue;
    s.phi_start = cyc.front()->phi;
    s.phi_end = cyc.back()->phi;
    out.push_back(std::move(s));
  }
  return out;
}

int cycle_of(const SweepRecord& rec, double tau) {
  const auto it = std::lower_bound(rec.rows.begin(), rec.rows.end(), tau,
                                   [](const SweepRow& r, double t) { return r.tau < t; });
  if (it == rec.rows.end()) return rec.rows.empty() ? 0 : rec.rows.back().cycle;
  return it->cycle;
}

LoopSummary summarize(const SweepRecord& rec, const std::vector<SplitCycle>& split,
                      double match_tol, std::size_t points) {
  LoopSummary sum;
  if (split.empty()) return sum;

  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  double ext_lo = hi, ext_hi = lo;
  for (const auto& s : split) {
    for (const Branch* b : {&s.first, &s.second}) {
      const auto [mn, mx] = std::minmax_element(b->rows.begin(), b->rows.end(),
          [](const SweepRow* x, const SweepRow* y) { return x->h_ext < y->h_ext; });
      lo = std::max(lo, (*mn)->h_ext);
      hi = std::min(hi, (*mx)->h_ext);
      ext_lo = std::min(ext_lo, (*mn)->h_ext);
      ext_hi = std::max(ext_hi, (*mx)->h_ext);
    }
  }
  sum.h_min = ext_lo;
  sum.h_max = ext_hi;

  for (const auto& s : split) {
    CycleLoop loop;
    loop.cycle = s.cycle;
    const Branch& down = s.first.descending ? s.first : s.second;
    const Branch& up = s.first.descending ? s.second : s.first;
    loop.descending = sample_branch(down, lo, hi, points);
    loop.ascending = sample_branch(up, lo, hi, points);
    loop.winding_at_zero_descending = winding_at(down, 0.0);
    loop.winding_at_zero_ascending = winding_at(up, 0.0);
    loop.phi_start = s.phi_start;
    loop.phi_end = s.phi_end;
    sum.cycles.push_back(std::move(loop));
  }
  sum.steady = sum.cycles.back();

  if (sum.cycles.size() >= 2) {
    const auto& a = sum.cycles[sum.cycles.size() - 2];
    const auto& b = sum.cycles.back();
    double d = 0.0;
    for (std::size_t k = 0; k < points; ++k) {
      d = std::max(d, std::abs(a.descending.phi[k] - b.descending.phi[k]));
      d = std::max(d, std::abs(a.ascending.phi[k] - b.ascending.phi[k]));
    }
    sum.last_difference = d;
    sum.converged = d <= match_tol;
  }

  for (const auto& e : rec.events)
    sum.transitions.push_back({cycle_of(rec, e.tau), e.h_ext, e.winding_before, e.winding_after});
  return sum;
}

}  // namespace

LoopSummary steady_loop_extract(const SweepRecord& record, double match_tol,
                                std::size_t grid_points) {
  if (grid_points < 2) throw std::invalid_argument("steady_loop_extract: grid_points must be >= 2");
  const auto split = split_cycles(record);
  if (split.size() < 2) {
    std::ostringstream os;
    os << "steady_loop_extract: need at least 2 full cycles, record has " << split.size();
    throw TooFewCycles(os.str());
  }
  return summarize(record, split, match_tol, grid_points);
}

namespace {

struct Leg {
  double h_from = 0.0;
  double h_to = 0.0;
  int cycle = 0;
};

class SweepDriver {
 public:
  SweepDriver(const ModelParams& params, const SweepProtocol& proto)
      : params_(params),
        proto_(proto),
        thr_(census_threshold(proto.census_threshold, params)),
        ev_(params, proto.noise_sign),
        st_(init_vacuum(params)),
        tracker_(0, proto.dwell_tau) {
    rec_.rows.push_back(make_row(st_, params_, 0, 0));
  }

  // Runs `steps` steps with the given schedule. stop() is checked after each
  // phase sample; returns true if it fired.
  template <class Stop>
  bool run(std::uint64_t steps, const FieldSchedule& field, int cycle, Stop stop) {
    bool stopped = false;
    bool fresh_row = false;
    for (std::uint64_t k = 0; k < steps && !stopped; ++k) {
      try {
        ev_.run_steps(st_, 1, field);
      } catch (const IntegrationBlowup& e) {
        throw SweepBlowup(e, cycle, st_.h_ext);
      }
      ++count_;
      fresh_row = false;
      if (count_ % proto_.phase_stride == 0) {
        const double phi = trapped_flux(st_);
        if (auto e = tracker_.update(st_.tau, st_.h_ext, phi, soliton_number(st_, params_, thr_)))
          rec_.events.push_back(*e);
        stopped = stop();
      }
      if (count_ % proto_.record_stride == 0) {
        rec_.rows.push_back(make_row(st_, params_, tracker_.settled(), cycle));
        fresh_row = true;
      }
    }
    // Every leg ends on a recorded row.
    if (!fresh_row && steps > 0)
      rec_.rows.push_back(make_row(st_, params_, tracker_.settled(), cycle));
    return stopped;
  }

  void ramp(const Leg& leg) {
    const auto steps =
        static_cast<std::uint64_t>(std::llround(std::abs(leg.h_to - leg.h_from) / proto_.rate /
                                                params_.dt));
    run(steps, linear(leg.h_from, leg.h_to, steps), leg.cycle, [] { return false; });
  }

  // Open-ended virgin ramp toward sign * h_ceiling; stops at the target.
  double ramp_to_target(int sign) {
    const double h_end = sign * proto_.h_ceiling;
    const auto steps =
        static_cast<std::uint64_t>(std::llround(proto_.h_ceiling / proto_.rate / params_.dt));
    const int target = *proto_.target_winding;
    run(steps, linear(0.0, h_end, steps), 0,
        [&] { return std::abs(tracker_.settled()) >= target; });
    return st_.h_ext;
  }

  void hold(double duration) {
    const auto steps = static_cast<std::uint64_t>(std::llround(duration / params_.dt));
    run(steps, constant_field(0.0), 0, [] { return false; });
  }

  SweepRecord& record() { return rec_; }
  std::uint64_t renormalizations() const { return ev_.renormalizations(); }

 private:
  FieldSchedule linear(double h_from, double h_to, std::uint64_t steps) const {
    const double t0 = st_.tau;
    const double span = static_cast<double>(steps) * params_.dt;
    return [=](double tau) {
      if (span <= 0.0) return h_to;
      const double t = std::clamp((tau - t0) / span, 0.0, 1.0);
      return h_from + t * (h_to - h_from);
    };
  }

  const ModelParams& params_;
  const SweepProtocol& proto_;
  double thr_;
  Evolver ev_;
  SystemState st_;
  PhaseTracker tracker_;
  SweepRecord rec_;
  std::uint64_t count_ = 0;
};

}  // namespace

SweepResult virgin_then_cycle(const ModelParams& params, const SweepProtocol& proto) {
  require_valid(params);
  if (auto v = validate(proto); !v.empty()) {
    std::ostringstream os;
    os << "invalid sweep protocol:";
    for (const auto& m : v) os << "\n  - " << m;
    throw std::invalid_argument(os.str());
  }

  SweepDriver drv(params, proto);
  if (proto.settle_tau > 0.0) drv.hold(proto.settle_tau);

  double h_max = proto.h_max, h_min = proto.h_min;
  const int dir = proto.first_direction;
  if (proto.target_winding) {
    const double reached = std::abs(drv.ramp_to_target(dir));
    h_max = reached;
    h_min = -reached;
  } else {
    drv.ramp({0.0, dir > 0 ? h_max : h_min, 0});
  }

  const double near = dir > 0 ? h_max : h_min;
  const double far = dir > 0 ? h_min : h_max;
  for (int c = 1; c <= proto.n_cycles; ++c) {
    drv.ramp({near, far, c});
    drv.ramp({far, near, c});
  }

  SweepResult res;
  res.record = std::move(drv.record());
  res.h_max = h_max;
  res.h_min = h_min;
  res.renormalizations = drv.renormalizations();
  res.summary = summarize(res.record, split_cycles(res.record), proto.match_tol,
                          proto.grid_points);
  return res;
}

bool leaves_vacuum(const ModelParams& params, const RelaxOptions& options) {
  RelaxOptions o = options;
  o.initial.reset();
  o.keep_trace = false;
  return relax_at_field(params, o).soliton_number != 0;
}

double critical_coupling_scan(const ModelParams& tmpl, double h_ext, double s_lo, double s_hi,
                              double tol, const RelaxOptions& relax) {
  if (!(s_lo > 0.0) || !(s_hi >= s_lo))
    throw std::invalid_argument("critical_coupling_scan: need 0 < s_lo <= s_hi");
  if (!(tol > 0.0)) throw std::invalid_argument("critical_coupling_scan: tol must be > 0");

  std::uint64_t probe = 0;
  auto transitions = [&](double s) {
    ModelParams p = tmpl;
    p.s = s;
    p.rng_seed = tmpl.rng_seed + probe++;
    RelaxOptions o = relax;
    o.h_ext = h_ext;
    return leaves_vacuum(p, o);
  };

  auto bracket_error = [&](const char* why) {
    std::ostringstream os;
    os.precision(17);
    os << "critical_coupling_scan: bracket [" << s_lo << ", " << s_hi << "] invalid at h_ext "
       << h_ext << ": " << why;
    return BracketInvalid(os.str());
  };

  if (s_lo == s_hi) {
    if (transitions(s_lo)) return s_lo;
    throw bracket_error("s does not leave the vacuum");
  }
  if (transitions(s_lo)) throw bracket_error("s_lo already leaves the vacuum");
  if (!transitions(s_hi)) throw bracket_error("s_hi stays in the vacuum");

  double lo = s_lo, hi = s_hi;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (transitions(mid) ? hi : lo) = mid;
  }
  return hi;
}

std::vector<double> critical_coupling_scan_many(const ModelParams& tmpl,
                                                const std::vector<double>& h_values,
                                                double s_lo, double s_hi, double tol,
                                                const RelaxOptions& relax,
                                                std::size_t max_workers) {
  std::vector<double> out(h_values.size());
  const std::size_t workers = std::clamp<std::size_t>(max_workers, 1, std::max<std::size_t>(1, h_values.size()));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < h_values.size();) {
      try {
        out[i] = critical_coupling_scan(tmpl, h_values[i], s_lo, s_hi, tol, relax);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace qms
