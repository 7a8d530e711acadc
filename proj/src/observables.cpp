#include "qms/observables.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "qms/dynamics.hpp"

namespace qms {

EnergyBreakdown energy_breakdown(const SystemState& st, const ModelParams& p) {
  const std::size_t n = st.size();
  const auto& a = st.field.a;
  const auto vn = coupling_v(st, p);
  const double b2 = p.beta * p.beta / (p.l * p.l);

  EnergyBreakdown e;
  // Ghost links each contribute beta^2 h_ext^2.
  e.e_field = 2.0 * p.beta * p.beta * st.h_ext * st.h_ext;
  for (std::size_t i = 0; i < n; ++i) {
    e.e_field += st.field.v[i] * st.field.v[i];
    if (i + 1 < n) {
      const double d = a[i + 1] - a[i];
      e.e_field += b2 * d * d;
    }
    const double h = std::sin(0.5 * a[i]);
    e.e_int += 2.0 * h * h * vn[i];
    e.e_qubit += std::norm(st.qubits.c1[i]);
  }
  e.e_qubit *= p.epsilon;
  e.e_total = e.e_field + e.e_int + e.e_qubit;
  e.q_conserved = e.e_field + 2.0 * (e.e_int + e.e_qubit);
  return e;
}

double trapped_flux(const SystemState& st) {
  return (st.field.a.back() - st.field.a.front()) / (2.0 * std::numbers::pi);
}

int net_winding(const SystemState& st) {
  return static_cast<int>(std::lround(trapped_flux(st)));
}

int SolitonCensus::polarity_sum() const noexcept {
  int sum = 0;
  for (const auto& s : solitons) sum += s.polarity;
  return sum;
}

double default_census_threshold(const ModelParams& p) { return 1.0 / p.beta; }

std::vector<double> link_field(const SystemState& st, const ModelParams& p) {
  const auto& a = st.field.a;
  std::vector<double> b(a.size() - 1);
  for (std::size_t i = 0; i + 1 < a.size(); ++i) b[i] = (a[i + 1] - a[i]) / p.l;
  return b;
}

SolitonCensus soliton_census(const SystemState& st, const ModelParams& p, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("soliton_census: threshold must be > 0");
  const auto b = link_field(st, p);
  SolitonCensus census;
  census.net_winding = net_winding(st);

  std::size_t i = 0;
  while (i < b.size()) {
    if (std::abs(b[i]) < threshold) {
      ++i;
      continue;
    }
    const bool positive = b[i] > 0.0;
    double weight = 0.0;
    double moment = 0.0;
    double peak = 0.0;
    const std::size_t first = i;
    for (; i < b.size() && std::abs(b[i]) >= threshold && (b[i] > 0.0) == positive; ++i) {
      const double w = std::abs(b[i]);
      weight += w;
      moment += w * (static_cast<double>(i) + 0.5);
      peak = std::max(peak, w);
    }
    census.solitons.push_back(Soliton{
        .position = moment / weight,
        .polarity = positive ? 1 : -1,
        .peak_field = peak,
        .touches_boundary = first == 0 || i == b.size(),
        .first_link = first,
        .last_link = i - 1,
    });
  }
  return census;
}

double kink_center_level(const ModelParams& p) {
  return p.frozen_v && *p.frozen_v > 0.0 ? std::numbers::pi : 0.0;
}

int soliton_number(const SystemState& st, const ModelParams& p, double threshold) {
  const auto census = soliton_census(st, p, threshold);
  const auto& a = st.field.a;
  const double period = 2.0 * std::numbers::pi;
  const double off = kink_center_level(p);
  int count = 0;
  for (const auto& s : census.solitons) {
    const double start = a[s.first_link] - off;
    const double end = a[s.last_link + 1] - off;
    count += static_cast<int>(std::floor(end / period) - std::floor(start / period));
  }
  return count;
}

std::vector<double> occupation_profile(const SystemState& st) {
  std::vector<double> out(st.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::norm(st.qubits.c1[i]);
  return out;
}

double max_excitation(const SystemState& st) {
  double m = 0.0;
  for (const auto& c : st.qubits.c1) m = std::max(m, std::norm(c));
  return m;
}

bool is_steady(std::span<const SteadySample> series, std::size_t window, double tol) {
  if (window == 0 || series.size() < window) {
    throw std::invalid_argument("is_steady: series shorter than window");
  }
  const auto tail = series.last(window);
  double lo = tail.front().e_total;
  double hi = lo;
  double sum = 0.0;
  for (const auto& s : tail) {
    if (s.winding != tail.front().winding) return false;
    lo = std::min(lo, s.e_total);
    hi = std::max(hi, s.e_total);
    sum += s.e_total;
  }
  const double mean = sum / static_cast<double>(window);
  return hi - lo <= tol * std::max(1.0, std::abs(mean));
}

}  // namespace qms
