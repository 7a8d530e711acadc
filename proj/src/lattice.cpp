#include "qms/lattice.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace qms {

ModelParams ModelParams::reference() { return ModelParams{}; }

std::vector<std::string> validate(const ModelParams& p) {
  std::vector<std::string> out;
  auto finite = [](double x) { return std::isfinite(x); };
  if (p.n_sites < 3) out.emplace_back("n_sites must be ≥ 3");
  if (!(p.s > 0) || !finite(p.s)) out.emplace_back("s must be > 0");
  if (!(p.beta > 0) || !finite(p.beta)) out.emplace_back("beta must be > 0");
  if (!(p.epsilon > 0) || !finite(p.epsilon)) out.emplace_back("epsilon must be > 0");
  if (!(p.l > 0) || !finite(p.l)) out.emplace_back("l must be > 0");
  if (!(p.gamma >= 0) || !finite(p.gamma)) out.emplace_back("gamma must be ≥ 0");
  if (!(p.dt > 0) || !finite(p.dt)) {
    out.emplace_back("dt must be > 0");
  } else if (p.dt > kMaxStep) {
    out.emplace_back("dt must be ≤ 0.1");
  }
  if (!(p.noise_amp >= 0) || !finite(p.noise_amp)) out.emplace_back("noise_amp must be ≥ 0");
  if (p.frozen_v && !finite(*p.frozen_v)) out.emplace_back("frozen_v must be finite");
  return out;
}

namespace {
std::string join_violations(const std::vector<std::string>& v) {
  std::ostringstream os;
  os << "invalid model parameters:";
  for (const auto& m : v) os << "\n  - " << m;
  return os.str();
}
}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : std::invalid_argument(join_violations(violations)), violations_(std::move(violations)) {}

void require_valid(const ModelParams& params) {
  if (auto v = validate(params); !v.empty()) throw ValidationError(std::move(v));
}

SystemState init_vacuum(const ModelParams& params) {
  require_valid(params);
  const std::size_t n = params.n_sites;
  SystemState st;
  st.field.a.assign(n, 0.0);
  st.field.v.assign(n, 0.0);
  st.qubits.c0.assign(n, complex{1.0, 0.0});
  st.qubits.c1.assign(n, complex{0.0, 0.0});
  return st;
}

SystemState init_kink(const ModelParams& params, double center, double width) {
  SystemState st = init_vacuum(params);
  for (std::size_t n = 0; n < st.size(); ++n) {
    const double x = (static_cast<double>(n) - center) * params.l / width;
    st.field.a[n] = 4.0 * std::atan(std::exp(x));
  }
  return st;
}

double max_norm_drift(const QubitAmplitudes& q) {
  double worst = 0.0;
  for (std::size_t n = 0; n < q.c0.size(); ++n) {
    worst = std::max(worst, std::abs(std::norm(q.c0[n]) + std::norm(q.c1[n]) - 1.0));
  }
  return worst;
}

bool is_consistent(const SystemState& st, std::size_t n) {
  if (st.field.a.size() != n || st.field.v.size() != n || st.qubits.c0.size() != n ||
      st.qubits.c1.size() != n) {
    return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(st.field.a[i]) || !std::isfinite(st.field.v[i]) ||
        !std::isfinite(st.qubits.c0[i].real()) || !std::isfinite(st.qubits.c0[i].imag()) ||
        !std::isfinite(st.qubits.c1[i].real()) || !std::isfinite(st.qubits.c1[i].imag())) {
      return false;
    }
  }
  return std::isfinite(st.tau) && std::isfinite(st.h_ext) && st.tau >= 0.0;
}

}  // namespace qms
