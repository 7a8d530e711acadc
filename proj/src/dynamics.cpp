#include "qms/dynamics.hpp"

#include <cmath>
#include <sstream>

#include "trig_kernel.hpp"

namespace qms {

namespace {

constexpr complex kMinusI{0.0, -1.0};

// 1 - cos a without cancellation near a = 0.
inline double one_minus_cos(double a) {
  const double h = std::sin(0.5 * a);
  return 2.0 * h * h;
}

}  // namespace

IntegrationBlowup::IntegrationBlowup(std::size_t site, double tau, const std::string& reason)
    : std::runtime_error([&] {
        std::ostringstream os;
        os.precision(17);
        os << "integration blowup at site " << site << " (tau = " << tau << "): " << reason;
        return os.str();
      }()),
      site_(site),
      tau_(tau) {}

std::pair<double, double> ghost_cells(std::span<const double> a, double h_ext, double l) {
  return {a.front() - l * h_ext, a.back() + l * h_ext};
}

std::vector<double> coupling_v(const SystemState& st, const ModelParams& p) {
  const std::size_t n = st.size();
  if (p.frozen_v) return std::vector<double>(n, *p.frozen_v);
  const complex phase = std::polar(1.0, -p.s * p.epsilon * st.tau);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = 2.0 * (std::conj(st.qubits.c0[i]) * st.qubits.c1[i] * phase).real();
  }
  return out;
}

std::pair<std::vector<complex>, std::vector<complex>> qubit_derivatives(const SystemState& st,
                                                                        const ModelParams& p) {
  const std::size_t n = st.size();
  std::vector<complex> dc0(n), dc1(n);
  if (p.frozen_v) return {dc0, dc1};
  const complex phase = std::polar(1.0, -p.s * p.epsilon * st.tau);
  for (std::size_t i = 0; i < n; ++i) {
    const double su = p.s * one_minus_cos(st.field.a[i]);
    dc0[i] = kMinusI * su * st.qubits.c1[i] * phase;
    dc1[i] = kMinusI * su * st.qubits.c0[i] * std::conj(phase);
  }
  return {dc0, dc1};
}

std::vector<double> field_acceleration(const SystemState& st, const ModelParams& p,
                                       std::span<const double> v_n) {
  const std::size_t n = st.size();
  const auto& a = st.field.a;
  const auto [left_ghost, right_ghost] = ghost_cells(a, st.h_ext, p.l);
  const double k = p.beta * p.beta / (p.l * p.l);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double left = i == 0 ? left_ghost : a[i - 1];
    const double right = i + 1 == n ? right_ghost : a[i + 1];
    out[i] = k * (left + right - 2.0 * a[i]) - v_n[i] * std::sin(a[i]) - p.gamma * st.field.v[i];
  }
  return out;
}

Derivative derivative(const SystemState& st, const ModelParams& p) {
  Derivative d;
  d.da = st.field.v;
  const auto vn = coupling_v(st, p);
  d.dv = field_acceleration(st, p, vn);
  std::tie(d.dc0, d.dc1) = qubit_derivatives(st, p);
  return d;
}

void Rk4Stepper::Buffers::resize(std::size_t n) {
  a.resize(n);
  v.resize(n);
  c0.resize(n);
  c1.resize(n);
}

Rk4Stepper::Rk4Stepper(const ModelParams& params)
    : params_(params), step_limit_(rk4_linear_step_limit(params)) {
  require_valid(params_);
  for (Buffers* b : {&stage_, &k1_, &k2_, &k3_, &k4_}) b->resize(params_.n_sites);
  sin_half_.resize(params_.n_sites);
  cos_half_.resize(params_.n_sites);
}

// Fused per-site evaluation of the full right-hand side.
void Rk4Stepper::rhs(const Buffers& x, double tau, double h_ext, Buffers& out) {
  const std::size_t n = x.a.size();
  const auto& p = params_;
  const double k = p.beta * p.beta / (p.l * p.l);
  const double* a = x.a.data();
  const double* sh = sin_half_.data();
  const double* ch = cos_half_.data();
  detail::half_angle_sincos(a, sin_half_.data(), cos_half_.data(), n);

  // Laplacian and damping: interior first, ghost-cell edges after.
  double* dv = out.v.data();
  const double* v = x.v.data();
  for (std::size_t i = 1; i + 1 < n; ++i) {
    dv[i] = k * (a[i - 1] + a[i + 1] - 2.0 * a[i]) - p.gamma * v[i];
  }
  dv[0] = k * ((a[0] - p.l * h_ext) + a[1] - 2.0 * a[0]) - p.gamma * v[0];
  dv[n - 1] = k * (a[n - 2] + (a[n - 1] + p.l * h_ext) - 2.0 * a[n - 1]) - p.gamma * v[n - 1];
  std::copy(x.v.begin(), x.v.end(), out.a.begin());

  if (p.frozen_v) {
    const double vfix = *p.frozen_v;
    for (std::size_t i = 0; i < n; ++i) dv[i] -= vfix * 2.0 * sh[i] * ch[i];
    std::fill(out.c0.begin(), out.c0.end(), complex{});
    std::fill(out.c1.begin(), out.c1.end(), complex{});
    return;
  }

  // Interleaved (re, im) views of the amplitude arrays.
  const double* c0 = reinterpret_cast<const double*>(x.c0.data());
  const double* c1 = reinterpret_cast<const double*>(x.c1.data());
  double* d0 = reinterpret_cast<double*>(out.c0.data());
  double* d1 = reinterpret_cast<double*>(out.c1.data());
  const double pr = std::cos(p.s * p.epsilon * tau);
  const double pi = -std::sin(p.s * p.epsilon * tau);  // phase = exp(-i s eps tau)
  for (std::size_t i = 0; i < n; ++i) {
    const double c0r = c0[2 * i], c0i = c0[2 * i + 1];
    const double c1r = c1[2 * i], c1i = c1[2 * i + 1];
    // w1 = c1 * phase, w0 = c0 * conj(phase)
    const double w1r = c1r * pr - c1i * pi, w1i = c1r * pi + c1i * pr;
    const double w0r = c0r * pr + c0i * pi, w0i = c0i * pr - c0r * pi;
    // V = 2 Re(conj(c0) * w1)
    const double vn = 2.0 * (c0r * w1r + c0i * w1i);
    const double su = p.s * 2.0 * sh[i] * sh[i];
    // -i * su * w
    d0[2 * i] = su * w1i;
    d0[2 * i + 1] = -su * w1r;
    d1[2 * i] = su * w0i;
    d1[2 * i + 1] = -su * w0r;
    dv[i] -= vn * 2.0 * sh[i] * ch[i];
  }
}

namespace {

// x + w * k over n doubles.
inline void axpy_into(double* out, const double* x, const double* k, double w, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + w * k[i];
}

inline double* flat(std::vector<complex>& v) { return reinterpret_cast<double*>(v.data()); }
inline const double* flat(const std::vector<complex>& v) {
  return reinterpret_cast<const double*>(v.data());
}

}  // namespace

double rk4_linear_step_limit(const ModelParams& p) {
  const double k = p.beta * p.beta / (p.l * p.l);
  // |V| <= 2 |C0| |C1| <= 1 while the qubits evolve.
  const double v_max = p.frozen_v ? std::abs(*p.frozen_v) : 1.0;
  const double omega = std::max(std::sqrt(v_max + 4.0 * k), p.frozen_v ? 0.0 : 2.0 * p.s);
  return kRk4StabilityRadius / omega;
}

void Rk4Stepper::step(SystemState& st) {
  const std::size_t n = st.size();
  if (params_.dt > step_limit_) {
    std::ostringstream os;
    os << "dt = " << params_.dt << " exceeds the RK4 linear stability limit " << step_limit_;
    // The bound is uniform, so the first site is the first to violate it.
    throw IntegrationBlowup(0, st.tau, os.str());
  }
  const double dt = params_.dt;
  const double h = st.h_ext;
  const double t0 = st.tau;

  auto offset = [&](const Buffers& k, double w) {
    axpy_into(stage_.a.data(), st.field.a.data(), k.a.data(), w, n);
    axpy_into(stage_.v.data(), st.field.v.data(), k.v.data(), w, n);
    axpy_into(flat(stage_.c0), flat(st.qubits.c0), flat(k.c0), w, 2 * n);
    axpy_into(flat(stage_.c1), flat(st.qubits.c1), flat(k.c1), w, 2 * n);
  };
  auto combine = [&](double* y, const double* a1, const double* a2, const double* a3,
                     const double* a4, std::size_t m) {
    const double w = dt / 6.0;
    for (std::size_t i = 0; i < m; ++i) y[i] += w * (a1[i] + 2.0 * (a2[i] + a3[i]) + a4[i]);
  };

  std::copy(st.field.a.begin(), st.field.a.end(), stage_.a.begin());
  std::copy(st.field.v.begin(), st.field.v.end(), stage_.v.begin());
  std::copy(st.qubits.c0.begin(), st.qubits.c0.end(), stage_.c0.begin());
  std::copy(st.qubits.c1.begin(), st.qubits.c1.end(), stage_.c1.begin());
  rhs(stage_, t0, h, k1_);
  offset(k1_, 0.5 * dt);
  rhs(stage_, t0 + 0.5 * dt, h, k2_);
  offset(k2_, 0.5 * dt);
  rhs(stage_, t0 + 0.5 * dt, h, k3_);
  offset(k3_, dt);
  rhs(stage_, t0 + dt, h, k4_);

  combine(st.field.a.data(), k1_.a.data(), k2_.a.data(), k3_.a.data(), k4_.a.data(), n);
  combine(st.field.v.data(), k1_.v.data(), k2_.v.data(), k3_.v.data(), k4_.v.data(), n);
  combine(flat(st.qubits.c0), flat(k1_.c0), flat(k2_.c0), flat(k3_.c0), flat(k4_.c0), 2 * n);
  combine(flat(st.qubits.c1), flat(k1_.c1), flat(k2_.c1), flat(k3_.c1), flat(k4_.c1), 2 * n);
  st.tau = t0 + dt;

  for (std::size_t i = 0; i < n; ++i) {
    const double a = st.field.a[i];
    const double v = st.field.v[i];
    // NaN fails both comparisons.
    if (!(std::abs(a) < kRunawayLimit) || !(std::abs(v) < kRunawayLimit) ||
        !std::isfinite(std::norm(st.qubits.c0[i]) + std::norm(st.qubits.c1[i]))) {
      throw IntegrationBlowup(i, st.tau, "non-finite or runaway value");
    }
  }
}

SystemState rk4_step(const SystemState& state, const ModelParams& params) {
  SystemState out = state;
  Rk4Stepper(params).step(out);
  return out;
}

void apply_noise_inplace(SystemState& st, const ModelParams& p, NoiseSource& rng) {
  if (p.noise_amp == 0.0) return;
  const double scale = p.noise_amp * std::sqrt(p.dt);
  for (double& v : st.field.v) v += scale * rng.next();
}

SystemState apply_noise(const SystemState& state, const ModelParams& params, NoiseSource& rng) {
  SystemState out = state;
  apply_noise_inplace(out, params, rng);
  return out;
}

std::size_t renormalize_qubits(QubitAmplitudes& q) {
  std::size_t touched = 0;
  for (std::size_t i = 0; i < q.c0.size(); ++i) {
    const double norm = std::norm(q.c0[i]) + std::norm(q.c1[i]);
    if (std::abs(norm - 1.0) > kNormTol) {
      const double r = 1.0 / std::sqrt(norm);
      q.c0[i] *= r;
      q.c1[i] *= r;
      ++touched;
    }
  }
  return touched;
}

Evolver::Evolver(const ModelParams& params, double noise_sign)
    : stepper_(params), noise_(params.rng_seed, noise_sign) {}

void Evolver::run_steps(SystemState& st, std::uint64_t steps, const FieldSchedule& schedule,
                        const Observer& observer, std::uint64_t record_stride) {
  const auto& p = stepper_.params();
  if (record_stride == 0) record_stride = 1;
  const double tau0 = st.tau;
  for (std::uint64_t k = 1; k <= steps; ++k) {
    if (schedule) st.h_ext = schedule(st.tau);
    stepper_.step(st);
    st.tau = tau0 + static_cast<double>(k) * p.dt;
    apply_noise_inplace(st, p, noise_);
    if (!p.frozen_v && renormalize_qubits(st.qubits) > 0) ++renormalizations_;
    ++steps_;
    if (observer && k % record_stride == 0) observer(st);
  }
}

void Evolver::evolve(SystemState& st, double duration, const FieldSchedule& schedule,
                     const Observer& observer, std::uint64_t record_stride) {
  if (!(duration >= 0.0)) throw std::invalid_argument("evolve: duration must be ≥ 0");
  const auto steps = static_cast<std::uint64_t>(std::llround(duration / stepper_.params().dt));
  run_steps(st, steps, schedule, observer, record_stride);
}

SystemState evolve(const SystemState& state, const ModelParams& params, double duration,
                   const FieldSchedule& schedule, const Observer& observer,
                   std::uint64_t record_stride) {
  SystemState out = state;
  Evolver(params).evolve(out, duration, schedule, observer, record_stride);
  return out;
}

}  // namespace qms
