#pragma once

// Domain types of the charge-qubit metamaterial lattice.
//
// Everything is dimensionless: the vector potential a_n = pi*D*A_n/Phi0,
// time tau = omega_J*t, energies in units of E_J, distances in units of
// lambda = c/omega_J. The physical constants C, D, L, E_J, I_c, Phi0,
// omega_J and lambda are fully absorbed into the parameters below and never
// appear at runtime.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qms {

using complex = std::complex<double>;

/// Runtime guard on per-site qubit norm drift.
inline constexpr double kNormTol = 1e-6;

/// Largest step accepted by validate().
inline constexpr double kMaxStep = 0.1;

struct ModelParams {
  std::size_t n_sites = 400;
  double s = 1.0;                         ///< E_J / (hbar omega_J)
  double beta = 0.25;                     ///< gradient coupling
  double epsilon = std::numbers::pi;      ///< level splitting in units of E_J
  double l = 0.05;                        ///< inter-qubit distance L/lambda
  double gamma = 0.25;                    ///< field damping
  double dt = 0.01;                       ///< integrator step
  double noise_amp = 1e-3;                ///< std-dev rate of velocity kicks
  std::uint64_t rng_seed = 20160101;
  /// When set, qubits are frozen and V_n is pinned to this value.
  std::optional<double> frozen_v;

  bool operator==(const ModelParams&) const = default;

  /// Parameter set used for the single-soliton relaxation runs (N=400).
  static ModelParams reference();
};

/// One message per violated bound; empty iff params are usable.
std::vector<std::string> validate(const ModelParams& params);

class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// Throws ValidationError when validate() is non-empty.
void require_valid(const ModelParams& params);

struct FieldState {
  std::vector<double> a;  ///< vector potential per site
  std::vector<double> v;  ///< da/dtau per site

  bool operator==(const FieldState&) const = default;
};

/// Interaction-picture amplitudes C_0^n, C_1^n.
struct QubitAmplitudes {
  std::vector<complex> c0;
  std::vector<complex> c1;

  bool operator==(const QubitAmplitudes&) const = default;
};

struct SystemState {
  double tau = 0.0;
  double h_ext = 0.0;
  FieldState field;
  QubitAmplitudes qubits;

  std::size_t size() const noexcept { return field.a.size(); }
  bool operator==(const SystemState&) const = default;
};

/// a=0, v=0, C0=1, C1=0 at tau=0 and zero applied field.
SystemState init_vacuum(const ModelParams& params);

/// Vacuum qubits with a sine-Gordon kink a_n = 4 atan(exp((n-center) l / width)).
/// A negative width produces an antikink.
SystemState init_kink(const ModelParams& params, double center, double width);

/// max_n | |C0|^2 + |C1|^2 - 1 |.
double max_norm_drift(const QubitAmplitudes& q);

/// True when all arrays have length n and hold finite values.
bool is_consistent(const SystemState& state, std::size_t n);

}  // namespace qms
