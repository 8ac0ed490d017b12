#pragma once

#include <string_view>

#include "detobs/types.hpp"

namespace detobs {

enum class Integrator { rk4, euler };

Integrator parse_integrator(std::string_view name);
std::string_view to_string(Integrator scheme);

/// One fixed step of y' = rhs(t, y). `rhs` is any callable (double, const Vec&) -> Vec.
template <typename Rhs>
Vec fixed_step(Integrator scheme, const Rhs& rhs, double t, const Vec& y, double dt) {
  if (scheme == Integrator::euler) {
    return y + dt * rhs(t, y);
  }
  const Vec k1 = rhs(t, y);
  const Vec k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1);
  const Vec k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2);
  const Vec k4 = rhs(t + dt, y + dt * k3);
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detobs
