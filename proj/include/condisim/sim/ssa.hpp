#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "condisim/rng.hpp"

namespace condisim::sim {

/// Mass-action reaction: propensity = rate * prod_s C(x_s, k_s).
struct Reaction {
  std::vector<std::pair<int, int>> reactants;  // (species, count)
  std::vector<std::pair<int, int>> change;     // (species, delta)
  int rate_index = 0;
};

struct ReactionNetwork {
  int species = 0;
  std::vector<Reaction> reactions;
};

/// Species counts recorded on a time grid, species-major.
struct SsaTrajectory {
  int species = 0;
  std::vector<double> times;
  std::vector<std::int64_t> counts;  // species x times

  std::int64_t at(int s, std::size_t k) const { return counts[static_cast<std::size_t>(s) * times.size() + k]; }
};

inline double propensity(const Reaction& r, const std::vector<std::int64_t>& x, const std::vector<double>& rates) {
  double a = rates[static_cast<std::size_t>(r.rate_index)];
  for (auto [s, k] : r.reactants) {
    const double n = static_cast<double>(x[static_cast<std::size_t>(s)]);
    if (k == 1)
      a *= n;
    else
      for (int j = 0; j < k; ++j) a *= (n - j) / (j + 1);
  }
  return a;
}

/// Exact stochastic simulation (direct method). The state is recorded at
/// each grid time; with zero total propensity it stays frozen to the horizon.
inline SsaTrajectory gillespie_ssa(const ReactionNetwork& net, const std::vector<std::int64_t>& x0,
                                   const std::vector<double>& rates, const std::vector<double>& t_grid, Rng& g) {
  if (static_cast<int>(x0.size()) != net.species) throw std::invalid_argument("gillespie_ssa: state size mismatch");
  for (double r : rates)
    if (!(r >= 0.0)) throw std::invalid_argument("gillespie_ssa: rates must be nonnegative");
  SsaTrajectory out;
  out.species = net.species;
  out.times = t_grid;
  out.counts.assign(static_cast<std::size_t>(net.species) * t_grid.size(), 0);
  std::vector<std::int64_t> x = x0;
  std::vector<double> a(net.reactions.size());
  std::exponential_distribution<double> wait(1.0);
  std::uniform_real_distribution<double> pick(0.0, 1.0);

  double t = 0.0;
  std::size_t k = 0;
  auto record_until = [&](double horizon) {
    while (k < t_grid.size() && t_grid[k] < horizon) {
      for (int s = 0; s < net.species; ++s) out.counts[static_cast<std::size_t>(s) * t_grid.size() + k] = x[s];
      ++k;
    }
  };
  while (k < t_grid.size()) {
    double total = 0.0;
    for (std::size_t r = 0; r < a.size(); ++r) {
      a[r] = propensity(net.reactions[r], x, rates);
      if (a[r] < 0.0) throw std::logic_error("gillespie_ssa: negative propensity");
      total += a[r];
    }
    if (total <= 0.0) {
      record_until(std::numeric_limits<double>::infinity());
      break;
    }
    const double t_next = t + wait(g) / total;
    record_until(t_next);
    t = t_next;
    if (k >= t_grid.size()) break;
    double u = pick(g) * total;
    std::size_t chosen = a.size() - 1;
    for (std::size_t r = 0; r < a.size(); ++r) {
      if (u < a[r]) {
        chosen = r;
        break;
      }
      u -= a[r];
    }
    while (a[chosen] <= 0.0) --chosen;  // guards round-off at the tail
    for (auto [s, d] : net.reactions[chosen].change) x[static_cast<std::size_t>(s)] += d;
  }
  return out;
}

}  // namespace condisim::sim
