#pragma once

// Experiment protocols: noisy relaxation at fixed field, virgin curve plus
// cyclic field sweeps, steady-loop extraction and critical-coupling scans.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qms/dynamics.hpp"
#include "qms/lattice.hpp"
#include "qms/observables.hpp"

namespace qms {

/// A change of the settled soliton number.
struct TransitionEvent {
  double tau = 0.0;  ///< when the new phase first appeared
  double h_ext = 0.0;
  int winding_before = 0;
  int winding_after = 0;
  double phi_before = 0.0;
  double phi_after = 0.0;

  bool operator==(const TransitionEvent&) const = default;
};

struct SweepRow {
  double tau = 0.0;
  double h_ext = 0.0;
  double phi = 0.0;
  int winding = 0;  ///< settled soliton number
  double e_field = 0.0;
  double e_int = 0.0;
  double e_qubit = 0.0;
  double e_total = 0.0;
  double q_conserved = 0.0;
  double max_excitation = 0.0;
  int cycle = 0;

  bool operator==(const SweepRow&) const = default;
};

struct SweepRecord {
  std::vector<SweepRow> rows;
  std::vector<TransitionEvent> events;

  bool operator==(const SweepRecord&) const = default;
};

SweepRow make_row(const SystemState& state, const ModelParams& params, int winding, int cycle);

/// Debounces the raw soliton number: a new value becomes the settled phase
/// only after it has been observed continuously for dwell_tau.
class PhaseTracker {
 public:
  PhaseTracker(int initial, double dwell_tau) : settled_(initial), dwell_(dwell_tau) {}

  /// Feeds one sample; returns the event when the settled phase changes.
  std::optional<TransitionEvent> update(double tau, double h_ext, double phi, int raw);

  int settled() const noexcept { return settled_; }

 private:
  int settled_;
  double dwell_;
  double last_settled_phi_ = 0.0;
  std::optional<int> candidate_;
  double candidate_tau_ = 0.0;
  double candidate_h_ = 0.0;
  double candidate_phi_ = 0.0;
};

struct RelaxOptions {
  double h_ext = 0.0;
  double max_tau = 5e4;
  /// No steady-state exit before this much time has elapsed.
  double min_tau = 0.0;
  std::size_t window = 100;
  double tol = 1e-4;
  std::uint64_t sample_stride = 100;  ///< steps between steadiness samples
  double dwell_tau = 20.0;
  double census_threshold = 0.0;  ///< <= 0 selects default_census_threshold
  std::optional<SystemState> initial;
  bool keep_trace = true;
};

struct RelaxationReport {
  SystemState final_state;
  bool steady = false;
  double elapsed_tau = 0.0;
  std::vector<TransitionEvent> events;
  EnergyBreakdown energy;
  SolitonCensus census;
  int winding = 0;         ///< net_winding of the final state
  int soliton_number = 0;  ///< settled soliton number at the end
  double phi = 0.0;
  std::uint64_t renormalizations = 0;
  SweepRecord trace;  ///< one row per sample (cycle 0)
};

RelaxationReport relax_at_field(const ModelParams& params, const RelaxOptions& options);

struct SweepProtocol {
  double h_max = 1.0;
  double h_min = -1.0;
  double rate = 2.5e-4;  ///< |dH/dtau|
  int n_cycles = 3;
  double settle_tau = 0.0;           ///< hold at H = 0 before the virgin ramp
  std::uint64_t record_stride = 100;  ///< steps between recorded rows
  /// When set, the virgin ramp stops (and fixes h_max, with h_min = -h_max)
  /// once the settled soliton number reaches this magnitude.
  std::optional<int> target_winding;
  double h_ceiling = 20.0;  ///< virgin ramp limit when target_winding is set
  double dwell_tau = 20.0;
  std::uint64_t phase_stride = 100;  ///< steps between phase-tracker samples
  double census_threshold = 0.0;
  int first_direction = +1;  ///< -1 ramps toward h_min first
  double noise_sign = 1.0;
  double match_tol = 0.1;
  std::size_t grid_points = 201;

  bool operator==(const SweepProtocol&) const = default;
};

std::vector<std::string> validate(const SweepProtocol& protocol);

struct BranchCurve {
  std::vector<double> h;  ///< strictly monotone in sweep direction
  std::vector<double> phi;
  std::vector<int> winding;
};

struct CycleLoop {
  int cycle = 0;
  BranchCurve descending;
  BranchCurve ascending;
  int winding_at_zero_descending = 0;
  int winding_at_zero_ascending = 0;
  double phi_start = 0.0;  ///< flux when the cycle begins
  double phi_end = 0.0;
};

struct LoopTransition {
  int cycle = 0;
  double h_ext = 0.0;
  int winding_before = 0;
  int winding_after = 0;
  int delta() const noexcept { return winding_after - winding_before; }
};

struct LoopSummary {
  std::vector<CycleLoop> cycles;  ///< full cycles only (index >= 1)
  CycleLoop steady;               ///< last cycle
  bool converged = false;
  double last_difference = 0.0;  ///< max |dPhi| between the last two cycles
  std::vector<LoopTransition> transitions;
  double h_max = 0.0;
  double h_min = 0.0;
};

class TooFewCycles : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Per-cycle loops of a record on a fixed H grid; converged iff the last two
/// cycles differ by at most match_tol in Phi on the shared grid.
LoopSummary steady_loop_extract(const SweepRecord& record, double match_tol,
                                std::size_t grid_points = 201);

/// Blowup during a sweep, tagged with its cycle and field.
class SweepBlowup : public IntegrationBlowup {
 public:
  SweepBlowup(const IntegrationBlowup& cause, int cycle, double h_ext);
  int cycle() const noexcept { return cycle_; }
  double h_ext() const noexcept { return h_ext_; }
  const char* what() const noexcept override { return message_.c_str(); }

 private:
  int cycle_;
  double h_ext_;
  std::string message_;
};

struct SweepResult {
  SweepRecord record;
  LoopSummary summary;
  double h_max = 0.0;  ///< amplitude actually used
  double h_min = 0.0;
  std::uint64_t renormalizations = 0;
};

/// Vacuum at H = 0, optional hold, virgin ramp, then n_cycles full cycles.
SweepResult virgin_then_cycle(const ModelParams& params, const SweepProtocol& protocol);

class BracketInvalid : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// True when a fresh vacuum relaxed at this coupling leaves the vacuum
/// (settled soliton number != 0).
bool leaves_vacuum(const ModelParams& params, const RelaxOptions& options);

/// Bisection on s for the smallest coupling that leaves the vacuum. Probe k
/// runs with seed template.rng_seed + k.
double critical_coupling_scan(const ModelParams& params_template, double h_ext, double s_lo,
                              double s_hi, double tol, const RelaxOptions& relax);

/// s* for each field, spread over at most max_workers threads.
std::vector<double> critical_coupling_scan_many(const ModelParams& params_template,
                                                const std::vector<double>& h_values,
                                                double s_lo, double s_hi, double tol,
                                                const RelaxOptions& relax,
                                                std::size_t max_workers);

}  // namespace qms
