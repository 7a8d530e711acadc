#include "trig_kernel.hpp"

#include <cmath>

namespace qms::detail {

void half_angle_sincos(const double* __restrict a, double* __restrict sin_half,
                       double* __restrict cos_half, std::size_t n) {
  // Separate loops: a fused sincos has no vector variant.
  for (std::size_t i = 0; i < n; ++i) sin_half[i] = std::sin(0.5 * a[i]);
  for (std::size_t i = 0; i < n; ++i) cos_half[i] = std::cos(0.5 * a[i]);
}

}  // namespace qms::detail
