#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace condisim::sim {

/// Raised when a simulator cannot produce output for a parameter vector
/// (integrator failure, non-finite state).
struct SimulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <std::size_t N>
using State = std::array<double, N>;

template <std::size_t N>
State<N> axpy(const State<N>& x, double a, const State<N>& d) {
  State<N> r;
  for (std::size_t i = 0; i < N; ++i) r[i] = x[i] + a * d[i];
  return r;
}

/// Classic fourth-order Runge-Kutta step for an autonomous system.
template <std::size_t N, class Rhs>
State<N> rk4_step(const State<N>& x, double h, Rhs&& f) {
  const State<N> k1 = f(x);
  const State<N> k2 = f(axpy(x, h / 2, k1));
  const State<N> k3 = f(axpy(x, h / 2, k2));
  const State<N> k4 = f(axpy(x, h, k3));
  State<N> r;
  for (std::size_t i = 0; i < N; ++i) r[i] = x[i] + h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  return r;
}

}  // namespace condisim::sim
