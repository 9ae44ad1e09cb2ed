#pragma once

#include <cmath>

namespace rslam {

// IRLS weight of the Huber kernel at residual norm `r`.
inline double huber_weight(double r, double delta) {
  return r <= delta ? 1.0 : delta / r;
}

// Huber cost of a residual norm: r^2 inside the kernel, linear beyond.
inline double huber_cost(double r, double delta) {
  return r <= delta ? r * r : 2.0 * delta * r - delta * delta;
}

}  // namespace rslam
