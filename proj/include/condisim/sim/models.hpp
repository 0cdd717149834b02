#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "condisim/rng.hpp"
#include "condisim/sim/integrators.hpp"
#include "condisim/sim/ssa.hpp"

namespace condisim::sim {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------- two moons

/// Two Moons observation for explicit noise (alpha, r).
inline VectorXd two_moons_from_noise(const VectorXd& theta, double alpha, double r) {
  VectorXd y(2);
  const double s2 = std::sqrt(2.0);
  y(0) = r * std::cos(alpha) - 0.25 * std::abs(theta(0) + theta(1)) / s2;
  y(1) = r * std::sin(alpha) + 0.25 * (-theta(0) + theta(1)) / s2;
  return y;
}

inline VectorXd two_moons(const VectorXd& theta, Rng& g) {
  const double alpha = rng::uniform(g, -std::numbers::pi / 2, std::numbers::pi / 2);
  const double r = 0.1 + 0.01 * rng::normal(g);
  return two_moons_from_noise(theta, alpha, r);
}

// ------------------------------------------------------- Gaussian families

/// Equal-weight mixture N(theta, I) / N(theta, 0.01 I).
inline VectorXd gaussian_mixture(const VectorXd& theta, Rng& g) {
  const double sd = rng::uniform(g) < 0.5 ? 1.0 : 0.1;
  VectorXd y(theta.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = theta(i) + sd * rng::normal(g);
  return y;
}

inline constexpr double kGaussianLinearVariance = 0.1;

/// y ~ N(theta, 0.1 I); shared by the Gaussian and uniform-prior variants.
inline VectorXd gaussian_linear(const VectorXd& theta, Rng& g) {
  VectorXd y(theta.size());
  const double sd = std::sqrt(kGaussianLinearVariance);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = theta(i) + sd * rng::normal(g);
  return y;
}

// -------------------------------------------------------------------- SLCP

/// Four i.i.d. draws from N((t1,t2), [[t3^2, r t3 t4], [r t3 t4, t4^2]]), r = tanh(t5).
inline VectorXd slcp(const VectorXd& theta, Rng& g) {
  const double rho = std::tanh(theta(4));
  const double c = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  VectorXd y(8);
  for (int k = 0; k < 4; ++k) {
    const double z1 = rng::normal(g), z2 = rng::normal(g);
    y(2 * k) = theta(0) + theta(2) * z1;
    y(2 * k + 1) = theta(1) + theta(3) * (rho * z1 + c * z2);
  }
  return y;
}

inline constexpr int kSlcpDistractors = 92;

/// SLCP output plus N(0,1) distractors, reordered by a fixed permutation.
inline VectorXd slcp_distractors(const VectorXd& theta, Rng& g, const std::vector<int>& permutation) {
  const VectorXd core = slcp(theta, g);
  VectorXd raw(8 + kSlcpDistractors);
  raw.head(8) = core;
  for (int i = 0; i < kSlcpDistractors; ++i) raw(8 + i) = rng::normal(g);
  VectorXd y(raw.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = raw(permutation[static_cast<std::size_t>(i)]);
  return y;
}

// ------------------------------------------------------------ Bernoulli GLM

inline constexpr int kGlmTrials = 100;
inline constexpr int kGlmFilter = 9;

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Design and smoothness operator fixed for one task instance.
struct GlmDesign {
  MatrixXd stimulus;       // 9 x 100, V_i is column i
  MatrixXd second_diff;    // 9 x 9, the operator F; prior precision F^T F

  static GlmDesign make(std::uint64_t seed) {
    GlmDesign d;
    Rng g(seed);
    d.stimulus.resize(kGlmFilter, kGlmTrials);
    for (Eigen::Index j = 0; j < d.stimulus.cols(); ++j)
      for (Eigen::Index i = 0; i < d.stimulus.rows(); ++i) d.stimulus(i, j) = rng::normal(g);
    d.second_diff = MatrixXd::Zero(kGlmFilter, kGlmFilter);
    for (int i = 0; i < kGlmFilter; ++i) {
      d.second_diff(i, i) = -2.0;
      if (i > 0) d.second_diff(i, i - 1) = 1.0;
      if (i + 1 < kGlmFilter) d.second_diff(i, i + 1) = 1.0;
    }
    return d;
  }
};

inline constexpr double kGlmBiasFloor = -30.0;

/// 100 Bernoulli draws with logit V_i^T f + beta; theta = (beta, f).
inline VectorXd bernoulli_glm_raw(const VectorXd& theta, Rng& g, const GlmDesign& design) {
  const double bias = std::max(theta(0), kGlmBiasFloor);
  const VectorXd f = theta.tail(kGlmFilter);
  VectorXd y(kGlmTrials);
  for (int i = 0; i < kGlmTrials; ++i) {
    const double p = logistic(design.stimulus.col(i).dot(f) + bias);
    y(i) = rng::uniform(g) < p ? 1.0 : 0.0;
  }
  return y;
}

/// Sufficient statistics (sum y, V y) of the raw Bernoulli observations.
inline VectorXd glm_sufficient_statistics(const VectorXd& raw, const GlmDesign& design) {
  VectorXd s(1 + kGlmFilter);
  s(0) = raw.sum();
  s.tail(kGlmFilter) = design.stimulus * raw;
  return s;
}

inline VectorXd bernoulli_glm(const VectorXd& theta, Rng& g, const GlmDesign& design, bool raw) {
  const VectorXd bits = bernoulli_glm_raw(theta, g, design);
  return raw ? bits : glm_sufficient_statistics(bits, design);
}

// --------------------------------------------------------------------- SIR

struct SirConfig {
  double population = 1e6;
  double horizon = 160.0;
  double step = 0.1;
  int readouts = 10;
  int trials = 1000;
};

/// Standard SIR integrated with RK4 from (N-1, 1, 0). Returns the state at
/// `readouts` evenly spaced times in (0, horizon], one column each.
inline MatrixXd sir_trajectory(double beta, double gamma, const SirConfig& cfg = {}) {
  const double N = cfg.population;
  auto rhs = [&](const State<3>& x) {
    const double inf = beta * x[0] * x[1] / N;
    return State<3>{-inf, inf - gamma * x[1], gamma * x[1]};
  };
  State<3> x{N - 1.0, 1.0, 0.0};
  const long steps = std::lround(cfg.horizon / cfg.step);
  const long per_readout = steps / cfg.readouts;
  MatrixXd out(3, cfg.readouts);
  for (long k = 1; k <= steps; ++k) {
    x = rk4_step(x, cfg.step, rhs);
    for (double v : x)
      if (!std::isfinite(v) || v < -1e-6 * N || v > N * (1 + 1e-6))
        throw SimulationError("sir: state left [0, N]");
    if (k % per_readout == 0 && k / per_readout <= cfg.readouts)
      out.col(k / per_readout - 1) << x[0], x[1], x[2];
  }
  return out;
}

inline VectorXd sir(const VectorXd& theta, Rng& g, const SirConfig& cfg = {}) {
  const MatrixXd traj = sir_trajectory(theta(0), theta(1), cfg);
  VectorXd y(cfg.readouts);
  for (int i = 0; i < cfg.readouts; ++i) {
    const double p = std::clamp(traj(1, i) / cfg.population, 0.0, 1.0);
    y(i) = static_cast<double>(std::binomial_distribution<int>(cfg.trials, p)(g));
  }
  return y;
}

// ---------------------------------------------------------- Lotka-Volterra

struct LotkaVolterraConfig {
  double x0 = 30.0, y0 = 1.0;
  double horizon = 20.0;
  double step = 0.01;
  int readouts = 10;
  double noise_sd = 0.1;
};

inline State<2> lotka_volterra_rhs(const VectorXd& theta, const State<2>& s) {
  return {theta(0) * s[0] - theta(1) * s[0] * s[1], -theta(2) * s[1] + theta(3) * s[0] * s[1]};
}

/// First integral delta X - gamma ln X + beta Y - alpha ln Y.
inline double lotka_volterra_invariant(const VectorXd& theta, const State<2>& s) {
  return theta(3) * s[0] - theta(2) * std::log(s[0]) + theta(1) * s[1] - theta(0) * std::log(s[1]);
}

/// Prey and predator at `readouts` evenly spaced times in (0, horizon]; 2 x readouts.
inline MatrixXd lotka_volterra_trajectory(const VectorXd& theta, const LotkaVolterraConfig& cfg = {}) {
  State<2> x{cfg.x0, cfg.y0};
  const long steps = std::lround(cfg.horizon / cfg.step);
  const long per_readout = steps / cfg.readouts;
  MatrixXd out(2, cfg.readouts);
  auto rhs = [&](const State<2>& s) { return lotka_volterra_rhs(theta, s); };
  for (long k = 1; k <= steps; ++k) {
    x = rk4_step(x, cfg.step, rhs);
    if (!std::isfinite(x[0]) || !std::isfinite(x[1]) || x[0] <= 0.0 || x[1] <= 0.0)
      throw SimulationError("lotka_volterra: non-finite or non-positive state");
    if (k % per_readout == 0 && k / per_readout <= cfg.readouts) out.col(k / per_readout - 1) << x[0], x[1];
  }
  return out;
}

/// LogNormal(log X, sd) readouts: prey block then predator block.
inline VectorXd lotka_volterra(const VectorXd& theta, Rng& g, const LotkaVolterraConfig& cfg = {}) {
  const MatrixXd traj = lotka_volterra_trajectory(theta, cfg);
  VectorXd y(2 * cfg.readouts);
  for (int s = 0; s < 2; ++s)
    for (int i = 0; i < cfg.readouts; ++i) {
      const double v = traj(s, i);
      y(s * cfg.readouts + i) = cfg.noise_sd == 0.0 ? v : std::exp(std::log(v) + cfg.noise_sd * rng::normal(g));
    }
  return y;
}

// --------------------------------------------------------- Hodgkin-Huxley

inline double efun(double x) {
  if (std::abs(x) < 1e-4) return 1.0 - x / 2.0;
  return x / (std::exp(x) - 1.0);
}

struct HhRates {
  double am, bm, ah, bh, an, bn;
};

inline constexpr double kHhRestVoltage = -65.0;

inline HhRates hh_rates(double v) {
  const double u = v - kHhRestVoltage;
  return {0.32 * efun(-0.25 * (u - 13.0)) / 0.25,
          0.28 * efun(0.2 * (u - 40.0)) / 0.2,
          0.128 * std::exp(-(u - 17.0) / 18.0),
          4.0 / (1.0 + std::exp(-(u - 40.0) / 5.0)),
          0.032 * efun(-0.2 * (u - 15.0)) / 0.2,
          0.5 * std::exp(-(u - 10.0) / 40.0)};
}

struct HhConfig {
  double duration = 200.0;  // ms
  int steps = 5000;
  double current = 4.0;
  double stim_on = 50.0, stim_off = 150.0;
  double noise = 0.05;
  double spike_threshold = -10.0;
};

struct HhTrace {
  std::vector<double> v;  // steps + 1 samples, v[0] at t = 0
  std::vector<double> m, h, n;
  double energy = 0.0;
  double dt = 0.0;
};

/// Euler-Maruyama integration; theta = (C_m, g_Na, g_K, g_L, E_Na, E_K, E_L).
inline HhTrace hodgkin_huxley_trace(const VectorXd& theta, Rng& g, const HhConfig& cfg = {}) {
  const double cm = theta(0), gna = theta(1), gk = theta(2), gl = theta(3);
  const double ena = theta(4), ek = theta(5), el = theta(6);
  HhTrace tr;
  tr.dt = cfg.duration / cfg.steps;
  const double dt = tr.dt, sq = std::sqrt(dt);
  double v = kHhRestVoltage;
  const HhRates r0 = hh_rates(v);
  double m = r0.am / (r0.am + r0.bm), h = r0.ah / (r0.ah + r0.bh), n = r0.an / (r0.an + r0.bn);
  tr.v.reserve(cfg.steps + 1);
  tr.v.push_back(v);
  tr.m.push_back(m);
  tr.h.push_back(h);
  tr.n.push_back(n);
  for (int k = 0; k < cfg.steps; ++k) {
    const double t = k * dt;
    const double inj = (t >= cfg.stim_on && t < cfg.stim_off) ? cfg.current : 0.0;
    const HhRates r = hh_rates(v);
    const double ina = gna * m * m * m * h * (v - ena);
    const double ik = gk * n * n * n * n * (v - ek);
    const double il = gl * (v - el);
    const double dv = (inj - ina - ik - il) / cm;
    tr.energy += ina * dt;
    const double noise = cfg.noise == 0.0 ? 0.0 : cfg.noise * sq * rng::normal(g);
    m += dt * (r.am * (1 - m) - r.bm * m);
    h += dt * (r.ah * (1 - h) - r.bh * h);
    n += dt * (r.an * (1 - n) - r.bn * n);
    v += dt * dv + noise;
    if (!std::isfinite(v)) throw SimulationError("hodgkin_huxley: non-finite membrane voltage");
    tr.v.push_back(v);
    tr.m.push_back(m);
    tr.h.push_back(h);
    tr.n.push_back(n);
  }
  return tr;
}

namespace detail {
struct Moments {
  double mean = 0, sd = 0, skew = 0, kurt = 0;
};

inline Moments moments(const std::vector<double>& x, std::size_t begin, std::size_t end) {
  Moments mo;
  const double n = static_cast<double>(end - begin);
  for (std::size_t i = begin; i < end; ++i) mo.mean += x[i] / n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (std::size_t i = begin; i < end; ++i) {
    const double d = x[i] - mo.mean;
    m2 += d * d / n;
    m3 += d * d * d / n;
    m4 += d * d * d * d / n;
  }
  mo.sd = std::sqrt(m2);
  if (m2 > 0) {
    mo.skew = m3 / std::pow(m2, 1.5);
    mo.kurt = m4 / (m2 * m2);
  }
  return mo;
}
}  // namespace detail

inline constexpr int kHhSummaries = 8;

/// spike count, rest mean, rest sd, stimulus-window mean, skewness, kurtosis,
/// sodium energy, stimulus-window sd.
inline VectorXd hh_summaries(const HhTrace& tr, const HhConfig& cfg = {}) {
  const std::size_t on = static_cast<std::size_t>(std::lround(cfg.stim_on / tr.dt));
  const std::size_t off = static_cast<std::size_t>(std::lround(cfg.stim_off / tr.dt));
  int spikes = 0;
  for (std::size_t i = 1; i < tr.v.size(); ++i)
    if (tr.v[i - 1] < cfg.spike_threshold && tr.v[i] >= cfg.spike_threshold) ++spikes;
  const auto rest = detail::moments(tr.v, 0, on);
  const auto stim = detail::moments(tr.v, on, off);
  VectorXd s(kHhSummaries);
  s << spikes, rest.mean, rest.sd, stim.mean, stim.skew, stim.kurt, tr.energy, stim.sd;
  return s;
}

inline VectorXd hodgkin_huxley(const VectorXd& theta, Rng& g, const HhConfig& cfg = {}) {
  return hh_summaries(hodgkin_huxley_trace(theta, g, cfg), cfg);
}

// ------------------------------------------------------- genetic oscillator

namespace vilar {
// species
enum : int { DA, DA_bound, MA, DR, DR_bound, MR, C, A, R, kSpecies };
// rate vector layout
enum : int {
  alpha_a, alpha_a_bound, alpha_r, alpha_r_bound, beta_a, beta_r, delta_ma, delta_mr,
  delta_a, delta_r, gamma_a, gamma_r, gamma_c, theta_a, theta_r, kRates
};
}  // namespace vilar

inline ReactionNetwork vilar_network() {
  using namespace vilar;
  ReactionNetwork net;
  net.species = kSpecies;
  auto add = [&](std::vector<std::pair<int, int>> in, std::vector<std::pair<int, int>> change, int rate) {
    net.reactions.push_back({std::move(in), std::move(change), rate});
  };
  add({{DA, 1}, {A, 1}}, {{DA, -1}, {A, -1}, {DA_bound, 1}}, gamma_a);
  add({{DA_bound, 1}}, {{DA_bound, -1}, {DA, 1}, {A, 1}}, theta_a);
  add({{DR, 1}, {A, 1}}, {{DR, -1}, {A, -1}, {DR_bound, 1}}, gamma_r);
  add({{DR_bound, 1}}, {{DR_bound, -1}, {DR, 1}, {A, 1}}, theta_r);
  add({{DA_bound, 1}}, {{MA, 1}}, alpha_a_bound);
  add({{DA, 1}}, {{MA, 1}}, alpha_a);
  add({{DR_bound, 1}}, {{MR, 1}}, alpha_r_bound);
  add({{DR, 1}}, {{MR, 1}}, alpha_r);
  add({{MA, 1}}, {{A, 1}}, beta_a);
  add({{MR, 1}}, {{R, 1}}, beta_r);
  add({{A, 1}, {R, 1}}, {{A, -1}, {R, -1}, {C, 1}}, gamma_c);
  add({{C, 1}}, {{C, -1}, {R, 1}}, delta_a);
  add({{A, 1}}, {{A, -1}}, delta_a);
  add({{R, 1}}, {{R, -1}}, delta_r);
  add({{MA, 1}}, {{MA, -1}}, delta_ma);
  add({{MR, 1}}, {{MR, -1}}, delta_mr);
  return net;
}

inline std::vector<std::int64_t> vilar_initial_state() {
  // D_A, D_A*, M_A, D_R, D_R*, M_R, C, A, R
  return {1, 0, 0, 1, 0, 0, 10, 10, 10};
}

inline std::vector<double> vilar_true_parameters() {
  return {50, 500, 0.01, 50, 50, 5, 10, 0.5, 1, 0.2, 1, 1, 2, 50, 100};
}

struct OscillatorConfig {
  double horizon = 200.0;
  int grid = 200;
};

inline std::vector<double> oscillator_grid(const OscillatorConfig& cfg = {}) {
  std::vector<double> t(cfg.grid);
  for (int k = 0; k < cfg.grid; ++k) t[k] = cfg.horizon * k / (cfg.grid - 1);
  return t;
}

/// Copy numbers of (C, A, R) on the grid; 3 x grid.
inline MatrixXd oscillator_trajectories(const VectorXd& theta, Rng& g, const OscillatorConfig& cfg = {}) {
  static const ReactionNetwork net = vilar_network();
  std::vector<double> rates(theta.data(), theta.data() + theta.size());
  const SsaTrajectory tr = gillespie_ssa(net, vilar_initial_state(), rates, oscillator_grid(cfg), g);
  MatrixXd out(3, cfg.grid);
  const int observed[3] = {vilar::C, vilar::A, vilar::R};
  for (int s = 0; s < 3; ++s)
    for (int k = 0; k < cfg.grid; ++k) out(s, k) = static_cast<double>(tr.at(observed[s], static_cast<std::size_t>(k)));
  return out;
}

/// Lag of the first autocorrelation peak after the first zero crossing;
/// 0 when the signal is constant or no peak exists.
inline double dominant_period(const Eigen::RowVectorXd& x) {
  const Eigen::Index n = x.size();
  const double mean = x.mean();
  const Eigen::RowVectorXd d = x.array() - mean;
  const double var = d.squaredNorm();
  if (var <= 0.0) return 0.0;
  const Eigen::Index max_lag = n / 2;
  std::vector<double> r(static_cast<std::size_t>(max_lag + 1));
  for (Eigen::Index k = 0; k <= max_lag; ++k) r[k] = d.head(n - k).dot(d.tail(n - k)) / var;
  Eigen::Index k = 1;
  while (k <= max_lag && r[k] > 0.0) ++k;
  for (; k < max_lag; ++k)
    if (r[k] > 0.0 && r[k] >= r[k - 1] && r[k] >= r[k + 1]) return static_cast<double>(k);
  return 0.0;
}

inline constexpr int kOscillatorSummaries = 15;

/// Per observed species: mean, sd, max, dominant period, final value.
inline VectorXd oscillator_summaries(const MatrixXd& traj) {
  VectorXd s(5 * traj.rows());
  for (Eigen::Index i = 0; i < traj.rows(); ++i) {
    const Eigen::RowVectorXd x = traj.row(i);
    const double mean = x.mean();
    s(5 * i + 0) = mean;
    s(5 * i + 1) = std::sqrt((x.array() - mean).square().mean());
    s(5 * i + 2) = x.maxCoeff();
    s(5 * i + 3) = dominant_period(x);
    s(5 * i + 4) = x(x.size() - 1);
  }
  return s;
}

inline VectorXd genetic_oscillator(const VectorXd& theta, Rng& g, const OscillatorConfig& cfg = {}) {
  return oscillator_summaries(oscillator_trajectories(theta, g, cfg));
}

}  // namespace condisim::sim
