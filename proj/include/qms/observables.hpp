#pragma once

// Energies, trapped flux and soliton counting on a lattice snapshot.

#include <span>
#include <vector>

#include "qms/lattice.hpp"

namespace qms {

/// All terms in units of E_J.
struct EnergyBreakdown {
  double e_field = 0.0;   ///< sum v^2 + beta^2 (da/l)^2 over links, ghost links included
  double e_int = 0.0;     ///< sum (1 - cos a) V
  double e_qubit = 0.0;   ///< eps sum |C1|^2
  double e_total = 0.0;   ///< e_field + e_int + e_qubit
  double q_conserved = 0.0;  ///< e_field + 2 (e_int + e_qubit); constant when gamma = 0, h_ext = 0

  bool operator==(const EnergyBreakdown&) const = default;
};

EnergyBreakdown energy_breakdown(const SystemState& state, const ModelParams& params);

/// (a_{N-1} - a_0) / 2pi, in flux quanta.
double trapped_flux(const SystemState& state);

int net_winding(const SystemState& state);

struct Soliton {
  double position = 0.0;  ///< |b|-weighted centroid, fractional site index
  int polarity = 0;       ///< +1 soliton, -1 antisoliton
  double peak_field = 0.0;
  bool touches_boundary = false;
  std::size_t first_link = 0;  ///< run spans links [first_link, last_link]
  std::size_t last_link = 0;
};

struct SolitonCensus {
  std::vector<Soliton> solitons;
  int net_winding = 0;

  std::size_t size() const noexcept { return solitons.size(); }
  int polarity_sum() const noexcept;
};

/// Half the peak field of a unit-V sine-Gordon kink, 1/beta.
double default_census_threshold(const ModelParams& params);

/// Local field b_n = (a_{n+1} - a_n)/l on interior links n = 0..N-2.
std::vector<double> link_field(const SystemState& state, const ModelParams& params);

/// One soliton per maximal same-sign run of links with |b| >= threshold.
SolitonCensus soliton_census(const SystemState& state, const ModelParams& params,
                             double threshold);

/// Field value at a kink center, modulo 2 pi. Qubit-dressed kinks run
/// between the dressed minima at +-pi and are centred on 0; with V frozen
/// positive the minima sit at 0 and the centre at pi.
double kink_center_level(const ModelParams& params);

/// Topological soliton count: the signed number of kink-center levels
/// crossed inside census runs (links with |b| >= threshold).
/// Edge Meissner layers bend a_0 away from the domain value by less than pi
/// before a soliton enters, so they contribute nothing; the count stays an
/// integer where round(trapped_flux) drifts with the edge bending, and it
/// survives runs of neighbouring solitons merging at high field.
int soliton_number(const SystemState& state, const ModelParams& params, double threshold);

/// |C1_n|^2.
std::vector<double> occupation_profile(const SystemState& state);

double max_excitation(const SystemState& state);

struct SteadySample {
  double e_total = 0.0;
  int winding = 0;
};

/// Over the trailing `window` samples: winding constant and
/// max - min of e_total <= tol * max(1, |mean e_total|).
/// Throws std::invalid_argument when series.size() < window or window == 0.
bool is_steady(std::span<const SteadySample> series, std::size_t window, double tol);

}  // namespace qms
