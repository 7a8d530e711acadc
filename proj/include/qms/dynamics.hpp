#pragma once

// Equations of motion for the coupled qubit/field lattice and the fixed-step
// integrator that advances them.
//
//   i dC0/dtau = s (1 - cos a_n) C1 exp(-i s eps tau)
//   i dC1/dtau = s (1 - cos a_n) C0 exp(+i s eps tau)
//   V_n        = C0* C1 exp(-i s eps tau) + c.c.
//   a_n''      = beta^2 (a_{n+1} + a_{n-1} - 2 a_n) / l^2 - V_n sin a_n - gamma a_n'
//
// The edge gradient is fixed to h_ext through ghost cells
// a_{-1} = a_0 - l h_ext and a_N = a_{N-1} + l h_ext.

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include "qms/lattice.hpp"

namespace qms {

/// Raised when a step produces non-finite (or runaway) values.
class IntegrationBlowup : public std::runtime_error {
 public:
  IntegrationBlowup(std::size_t site, double tau, const std::string& reason);
  std::size_t site() const noexcept { return site_; }
  double tau() const noexcept { return tau_; }

 private:
  std::size_t site_;
  double tau_;
};

/// |a| or |v| beyond this is treated as a blowup even if still finite.
inline constexpr double kRunawayLimit = 1e8;

/// Extent of the RK4 stability region along the imaginary axis, 2 sqrt 2.
inline constexpr double kRk4StabilityRadius = 2.8284271247461903;

/// Largest stable dt for the linearized system: the Gershgorin bound on the
/// field frequency sqrt(|V| + 4 beta^2 / l^2), and the qubit rate 2 s.
/// Past it RK4 turns into bounded numerical chaos rather than overflowing,
/// so the stepper refuses to take such steps.
double rk4_linear_step_limit(const ModelParams& params);

struct Derivative {
  std::vector<double> da;
  std::vector<double> dv;
  std::vector<complex> dc0;
  std::vector<complex> dc1;
};

/// Ghost-cell values (a_{-1}, a_N) realizing the edge-gradient condition.
std::pair<double, double> ghost_cells(std::span<const double> a, double h_ext, double l);

std::vector<double> coupling_v(const SystemState& state, const ModelParams& params);

/// (dC0, dC1). Zero when frozen_v is set.
std::pair<std::vector<complex>, std::vector<complex>> qubit_derivatives(const SystemState& state,
                                                                        const ModelParams& params);

std::vector<double> field_acceleration(const SystemState& state, const ModelParams& params,
                                       std::span<const double> v_n);

/// Full right-hand side of the first-order system.
Derivative derivative(const SystemState& state, const ModelParams& params);

/// Classical RK4 over the whole coupled system with workspace reuse.
/// h_ext is held at state.h_ext for the whole step.
class Rk4Stepper {
 public:
  explicit Rk4Stepper(const ModelParams& params);

  /// Advances in place by params.dt. tau becomes tau + dt.
  void step(SystemState& state);

  const ModelParams& params() const noexcept { return params_; }

 private:
  struct Buffers {
    std::vector<double> a, v;
    std::vector<complex> c0, c1;
    void resize(std::size_t n);
  };

  void rhs(const Buffers& x, double tau, double h_ext, Buffers& out);

  ModelParams params_;
  double step_limit_;
  Buffers stage_, k1_, k2_, k3_, k4_;
  std::vector<double> sin_half_, cos_half_;
};

SystemState rk4_step(const SystemState& state, const ModelParams& params);

/// Seeded Gaussian velocity kicks. sign=-1 mirrors the realization.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed, double sign = 1.0) : engine_(seed), sign_(sign) {}

  double next() { return sign_ * gauss_(engine_); }

 private:
  boost::random::mt19937_64 engine_;
  boost::random::normal_distribution<double> gauss_{0.0, 1.0};
  double sign_;
};

/// v_n += noise_amp * sqrt(dt) * xi_n.
void apply_noise_inplace(SystemState& state, const ModelParams& params, NoiseSource& rng);
SystemState apply_noise(const SystemState& state, const ModelParams& params, NoiseSource& rng);

/// Rescales (C0, C1) at sites whose norm drifted past kNormTol. Returns the
/// number of sites touched.
std::size_t renormalize_qubits(QubitAmplitudes& q);

using FieldSchedule = std::function<double(double tau)>;
using Observer = std::function<void(const SystemState&)>;

inline FieldSchedule constant_field(double h) {
  return [h](double) { return h; };
}

/// Step loop: field from schedule, RK4, noise, norm guard, observer.
/// Owns the run's noise generator, so one Evolver per trajectory.
class Evolver {
 public:
  explicit Evolver(const ModelParams& params, double noise_sign = 1.0);

  /// Advances by round(duration / dt) steps. observer (if any) is called after
  /// every record_stride-th step.
  void evolve(SystemState& state, double duration, const FieldSchedule& schedule,
              const Observer& observer = {}, std::uint64_t record_stride = 1);

  /// Advances an exact number of steps.
  void run_steps(SystemState& state, std::uint64_t steps, const FieldSchedule& schedule,
                 const Observer& observer = {}, std::uint64_t record_stride = 1);

  /// Number of renormalization events (one per step where any site was rescaled).
  std::uint64_t renormalizations() const noexcept { return renormalizations_; }
  std::uint64_t steps_taken() const noexcept { return steps_; }
  const ModelParams& params() const noexcept { return stepper_.params(); }

 private:
  Rk4Stepper stepper_;
  NoiseSource noise_;
  std::uint64_t renormalizations_ = 0;
  std::uint64_t steps_ = 0;
};

SystemState evolve(const SystemState& state, const ModelParams& params, double duration,
                   const FieldSchedule& schedule, const Observer& observer = {},
                   std::uint64_t record_stride = 1);

}  // namespace qms
