#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qms/dynamics.hpp"
#include "qms/observables.hpp"

using namespace qms;
using std::numbers::pi;

namespace {

SystemState with_profile(const ModelParams& p, auto&& f) {
  auto st = init_vacuum(p);
  for (std::size_t i = 0; i < st.size(); ++i) st.field.a[i] = f(static_cast<double>(i));
  return st;
}

double kink(double n, double n0, double l, double w) {
  return 4.0 * std::atan(std::exp((n - n0) * l / w));
}

}  // namespace

TEST_CASE("vacuum energies and flux vanish") {
  const ModelParams p;
  const auto st = init_vacuum(p);
  const auto e = energy_breakdown(st, p);
  CHECK(e == EnergyBreakdown{});
  CHECK(trapped_flux(st) == 0.0);
  CHECK(net_winding(st) == 0);
}

TEST_CASE("single displaced site carries interaction energy 2") {
  ModelParams p;
  p.n_sites = 5;
  p.frozen_v = 1.0;
  auto st = init_vacuum(p);
  st.field.a[2] = pi;
  const auto e = energy_breakdown(st, p);
  CHECK(e.e_int == doctest::Approx(2.0));
  CHECK(e.e_qubit == 0.0);
  const double grad = 2 * p.beta * p.beta * pi * pi / (p.l * p.l);
  CHECK(e.e_field == doctest::Approx(grad));
  CHECK(e.e_total == e.e_field + e.e_int + e.e_qubit);
  CHECK(e.q_conserved == e.e_field + 2 * (e.e_int + e.e_qubit));
}

TEST_CASE("qubit energy is epsilon times occupation") {
  ModelParams p;
  p.n_sites = 4;
  auto st = init_vacuum(p);
  st.qubits.c0[1] = std::sqrt(0.75);
  st.qubits.c1[1] = complex{0, 0.5};
  CHECK(energy_breakdown(st, p).e_qubit == doctest::Approx(0.25 * p.epsilon));
}

TEST_CASE("applied field adds the ghost-link energy") {
  ModelParams p;
  p.n_sites = 6;
  auto st = init_vacuum(p);
  st.h_ext = 1.5;
  CHECK(energy_breakdown(st, p).e_field == doctest::Approx(2 * p.beta * p.beta * 1.5 * 1.5));
}

TEST_CASE("kink field energy matches the closed-form profile") {
  ModelParams p;
  p.frozen_v = 1.0;
  const double n0 = 199.5;
  const auto st = with_profile(p, [&](double n) { return kink(n, n0, p.l, p.beta); });

  // Brute-force link sum over the analytic profile.
  double brute = 0.0;
  for (int n = 0; n + 1 < 400; ++n) {
    const double d = kink(n + 1, n0, p.l, p.beta) - kink(n, n0, p.l, p.beta);
    brute += p.beta * p.beta * d * d / (p.l * p.l);
  }
  // Continuum value: beta^2 / l * integral (a_x)^2 dx = 8 beta^2 / (w l).
  const double continuum = 8.0 * p.beta / p.l;
  const auto e = energy_breakdown(st, p);
  CHECK(e.e_field == doctest::Approx(brute).epsilon(0.02));
  CHECK(e.e_field == doctest::Approx(continuum).epsilon(0.02));
}

TEST_CASE("flux examples") {
  ModelParams p;
  p.n_sites = 200;
  CHECK(trapped_flux(with_profile(p, [](double) { return 1.7; })) == 0.0);
  const auto one = with_profile(p, [&](double n) { return kink(n, 99.5, p.l, p.beta) - pi; });
  CHECK(one.field.a.front() == doctest::Approx(-pi));
  // Tails truncated at the edges leave 8 exp(-d / w) / (2 pi) of flux out.
  CHECK(trapped_flux(one) == doctest::Approx(1.0).epsilon(1e-7));
  const auto two = with_profile(p, [&](double n) {
    return kink(n, 60, p.l, p.beta) + kink(n, 140, p.l, p.beta);
  });
  CHECK(trapped_flux(two) == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(net_winding(two) == 2);
}

TEST_CASE("three antisolitons") {
  ModelParams p;
  p.frozen_v = 1.0;
  const auto st = with_profile(p, [&](double n) {
    return kink(n, 100, p.l, -p.beta) + kink(n, 200, p.l, -p.beta) + kink(n, 300, p.l, -p.beta);
  });
  CHECK(net_winding(st) == -3);
  const auto c = soliton_census(st, p, default_census_threshold(p));
  REQUIRE(c.size() == 3);
  CHECK(c.polarity_sum() == -3);
  CHECK(c.net_winding == -3);
  CHECK(soliton_number(st, p, default_census_threshold(p)) == -3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(c.solitons[k].polarity == -1);
    CHECK(c.solitons[k].position == doctest::Approx(100.0 * (k + 1)).epsilon(0.01));
  }
}

TEST_CASE("census of the analytic kink") {
  ModelParams p;
  p.frozen_v = 1.0;
  const double n0 = 187.3;
  const auto st = with_profile(p, [&](double n) { return kink(n, n0, p.l, p.beta); });
  const double thr = default_census_threshold(p);
  const auto c = soliton_census(st, p, thr);
  REQUIRE(c.size() == 1);
  CHECK(std::abs(c.solitons[0].position - n0) < 1.0);
  CHECK(c.solitons[0].polarity == 1);
  CHECK_FALSE(c.solitons[0].touches_boundary);
  // Peak of 2/w, sampled on links.
  CHECK(c.solitons[0].peak_field == doctest::Approx(2.0 / p.beta).epsilon(0.02));
  CHECK(c.polarity_sum() == c.net_winding);
  CHECK(soliton_number(st, p, thr) == 1);
  CHECK_THROWS_AS(soliton_census(st, p, 0.0), std::invalid_argument);
}

TEST_CASE("vacuum census is empty") {
  const ModelParams p;
  const auto c = soliton_census(init_vacuum(p), p, default_census_threshold(p));
  CHECK(c.size() == 0);
  CHECK(c.net_winding == 0);
}

TEST_CASE("edge layers are not solitons") {
  // Meissner-like screening: the edge bends by less than pi.
  ModelParams p;
  const double h = 6.0, lam = 0.2;
  const auto st = with_profile(p, [&](double n) {
    const double x = n * p.l, xr = (399 - n) * p.l;
    return -h * lam * std::exp(-x / lam) + h * lam * std::exp(-xr / lam);
  });
  const double thr = default_census_threshold(p);
  CHECK(soliton_census(st, p, thr).size() == 2);
  CHECK(soliton_number(st, p, thr) == 0);
  // The same layers next to one kink: still one soliton.
  const auto with_kink = with_profile(p, [&](double n) {
    return st.field.a[static_cast<std::size_t>(n)] + kink(n, 199.5, p.l, p.beta) - pi;
  });
  CHECK(soliton_number(with_kink, p, thr) == 1);
}

TEST_CASE("kink centre level follows the regime") {
  ModelParams p;
  CHECK(kink_center_level(p) == 0.0);
  p.frozen_v = 1.0;
  CHECK(kink_center_level(p) == doctest::Approx(pi));
  // A classical kink from 0 to 2 pi is one soliton only in the frozen regime.
  const auto st = with_profile(p, [&](double n) { return kink(n, 199.5, p.l, p.beta); });
  CHECK(soliton_number(st, p, default_census_threshold(p)) == 1);
}

TEST_CASE("merged run spanning the chain counts every level") {
  // Dense ramp from -pi + 0.1 to 5 pi + 0.1 with |b| above threshold everywhere:
  // crosses 0, 2 pi and 4 pi.
  ModelParams p;
  p.n_sites = 60;
  const auto st = with_profile(p, [&](double n) { return -pi + 0.1 + 6 * pi * n / 59.0; });
  const double thr = default_census_threshold(p);
  CHECK(soliton_census(st, p, thr).size() == 1);
  CHECK(soliton_number(st, p, thr) == 3);
}

TEST_CASE("global 2 pi shift leaves energies and flux unchanged") {
  ModelParams p;
  p.n_sites = 64;
  std::mt19937_64 g(4);
  std::normal_distribution<double> n01;
  auto st = init_vacuum(p);
  for (std::size_t i = 0; i < 64; ++i) {
    st.field.a[i] = n01(g);
    st.field.v[i] = 0.1 * n01(g);
    st.qubits.c0[i] = std::sqrt(0.9);
    st.qubits.c1[i] = std::polar(std::sqrt(0.1), n01(g));
  }
  st.h_ext = 0.3;
  auto shifted = st;
  for (auto& a : shifted.field.a) a += 2 * pi;
  const auto e1 = energy_breakdown(st, p), e2 = energy_breakdown(shifted, p);
  CHECK(e2.e_field == doctest::Approx(e1.e_field).epsilon(1e-12));
  CHECK(e2.e_int == doctest::Approx(e1.e_int).epsilon(1e-12));
  CHECK(e2.e_qubit == e1.e_qubit);
  CHECK(trapped_flux(shifted) == doctest::Approx(trapped_flux(st)).epsilon(1e-12));
  const double thr = default_census_threshold(p);
  CHECK(soliton_number(shifted, p, thr) == soliton_number(st, p, thr));
}

TEST_CASE("occupation profile") {
  ModelParams p;
  p.n_sites = 7;
  auto st = init_vacuum(p);
  for (double x : occupation_profile(st)) CHECK(x == 0.0);
  CHECK(max_excitation(st) == 0.0);
  const double r = std::sqrt(0.5);
  for (std::size_t i = 0; i < 7; ++i) st.qubits.c0[i] = st.qubits.c1[i] = complex{r, 0};
  for (double x : occupation_profile(st)) CHECK(x == doctest::Approx(0.5));
}

TEST_CASE("occupation stays in [0, 1 + tol] along a trajectory") {
  ModelParams p;
  p.n_sites = 100;
  p.noise_amp = 1e-2;
  auto st = init_kink(p, 49.5, p.beta);
  Evolver ev(p);
  bool ok = true;
  ev.evolve(st, 20.0, constant_field(0.2),
            [&](const SystemState& s) {
              for (double x : occupation_profile(s)) ok = ok && x >= 0.0 && x <= 1.0 + kNormTol;
            },
            50);
  CHECK(ok);
}

TEST_CASE("steadiness detection") {
  std::vector<SteadySample> flat(10, {-3.0, 1});
  CHECK(is_steady(flat, 10, 1e-4));
  CHECK(is_steady(flat, 5, 0.0));

  auto jump = flat;
  jump[7].winding = 3;
  CHECK_FALSE(is_steady(jump, 10, 1e-4));
  CHECK(is_steady(std::span(jump).subspan(0, 7), 5, 1e-4));

  // Tolerance scales with |mean| above one, absolute below.
  std::vector<SteadySample> big{{-1000.0, 0}, {-1000.05, 0}};
  CHECK(is_steady(big, 2, 1e-4));
  std::vector<SteadySample> tiny{{0.0, 0}, {2e-4, 0}};
  CHECK_FALSE(is_steady(tiny, 2, 1e-4));

  CHECK_THROWS_AS(is_steady(flat, 11, 1e-4), std::invalid_argument);
  CHECK_THROWS_AS(is_steady(flat, 0, 1e-4), std::invalid_argument);
}

TEST_CASE("flux and winding agree when the edges are relaxed") {
  ModelParams p;
  const double thr = default_census_threshold(p);
  for (double n0 : {50.0, 120.5, 333.0}) {
    const auto st = with_profile(p, [&](double n) { return kink(n, n0, p.l, p.beta); });
    const auto b = link_field(st, p);
    REQUIRE(std::abs(b.front()) < thr);
    CHECK(std::abs(trapped_flux(st) - net_winding(st)) < 0.5);
  }
}
