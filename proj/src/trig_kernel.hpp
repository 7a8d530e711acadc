#pragma once

#include <cstddef>

namespace qms::detail {

// sin(a/2) and cos(a/2) for n values. Built with vector math enabled; the
// inputs are finite by the time the integrator calls this.
void half_angle_sincos(const double* a, double* sin_half, double* cos_half, std::size_t n);

}  // namespace qms::detail
