#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "condisim/sim/tasks.hpp"

using namespace condisim;
using namespace condisim::sim;

namespace {

VectorXd v(std::initializer_list<double> xs) {
  VectorXd out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out(i++) = x;
  return out;
}

int peaks_above(const Eigen::RowVectorXd& x, double level) {
  int n = 0;
  for (Eigen::Index k = 1; k + 1 < x.size(); ++k)
    if (x(k) > level && x(k) >= x(k - 1) && x(k) > x(k + 1)) ++n;
  return n;
}

}  // namespace

// ------------------------------------------------------------------- registry

TEST(Tasks, RegistryDimensionsAndSupport) {
  ASSERT_EQ(task_names().size(), 12u);
  for (const auto& name : task_names()) {
    const TaskDefinition t = make_task(name);
    Rng g(11);
    for (int i = 0; i < 5; ++i) {
      const VectorXd th = t.prior(g);
      ASSERT_EQ(th.size(), t.theta_dim) << name;
      EXPECT_TRUE(t.in_support(th)) << name;
      EXPECT_EQ(t.simulate(th, g).size(), t.y_dim) << name;
    }
    EXPECT_EQ(t.reference_y.size(), t.y_dim) << name;
    EXPECT_TRUE(t.in_support(t.reference_theta)) << name;
  }
  EXPECT_EQ(make_task("slcp").y_dim, 8);
  EXPECT_EQ(make_task("slcp").theta_dim, 5);
  EXPECT_EQ(make_task("bernoulli_glm").y_dim, 10);
  EXPECT_EQ(make_task("bernoulli_glm_raw").y_dim, 100);
  EXPECT_THROW(make_task("nope"), std::invalid_argument);
}

TEST(Tasks, DeterministicPerSeed) {
  for (const auto& name : task_names()) {
    const TaskDefinition t = make_task(name);
    Rng a(5), b(5);
    const VectorXd th = t.prior(a);
    EXPECT_EQ(th, t.prior(b)) << name;
    Rng c(9), d(9);
    EXPECT_EQ(t.simulate(th, c), t.simulate(th, d)) << name;
  }
}

TEST(Tasks, InstanceConstantsFollowTaskSeed) {
  const TaskDefinition a = make_task("slcp_distractors", 1), b = make_task("slcp_distractors", 1),
                       c = make_task("slcp_distractors", 2);
  EXPECT_EQ(a.version, b.version);
  EXPECT_NE(a.version, c.version);
  EXPECT_EQ(a.reference_y, b.reference_y);
}

TEST(Tasks, TableDefaults) {
  const auto tm = make_task("two_moons").defaults;
  EXPECT_EQ(tm.blocks, 4);
  EXPECT_EQ(tm.hidden, 64);
  EXPECT_EQ(tm.schedule, ScheduleKind::cosine);
  EXPECT_EQ(tm.steps, 160);
  EXPECT_EQ(tm.batch, 32);
  EXPECT_DOUBLE_EQ(tm.lr, 1e-3);
  const auto gl = make_task("gaussian_linear").defaults;
  EXPECT_EQ(gl.blocks, 6);
  EXPECT_EQ(gl.schedule, ScheduleKind::scaled_linear);
  EXPECT_EQ(gl.steps, 100);
  EXPECT_EQ(gl.batch, 50);
  EXPECT_DOUBLE_EQ(gl.lr, 2e-4);
  EXPECT_EQ(make_task("hodgkin_huxley").defaults.schedule, ScheduleKind::scaled_quadratic);
  EXPECT_EQ(make_task("genetic_oscillator").defaults.batch, 64);
}

TEST(SamplePrior, SupportAndEmpty) {
  const TaskDefinition t = make_task("two_moons");
  Rng g(1);
  const MatrixXd th = sample_prior(t, 5000, g);
  EXPECT_LE(th.maxCoeff(), 1.0);
  EXPECT_GE(th.minCoeff(), -1.0);
  EXPECT_EQ(sample_prior(t, 0, g).cols(), 0);
}

TEST(SamplePrior, SirLogBetaLocation) {
  const TaskDefinition t = make_task("sir");
  Rng g(2);
  const int n = 100000;
  const MatrixXd th = sample_prior(t, n, g);
  const double mean = th.row(0).array().log().mean();
  EXPECT_NEAR(mean, std::log(0.4), 3 * 0.5 / std::sqrt(n));
  EXPECT_GT(th.minCoeff(), 0.0);
}

// ------------------------------------------------------------------ two moons

TEST(TwoMoons, PlugIn) {
  const VectorXd y = two_moons_from_noise(v({0, 0}), 0.0, 0.1);
  EXPECT_DOUBLE_EQ(y(0), 0.1);
  EXPECT_DOUBLE_EQ(y(1), 0.0);
  Rng g(3);
  for (double a : {-0.7, 0.2, 0.9}) {
    const VectorXd y1 = two_moons_from_noise(v({a, a}), 0.4, 0.1);
    EXPECT_NEAR(y1(1), 0.1 * std::sin(0.4), 1e-15);
  }
}

TEST(TwoMoons, MeanMatchesIndependentMonteCarlo) {
  // Brute-force oracle of the same formula with its own noise streams.
  const VectorXd th = v({0.3, -0.6});
  const int n = 100000;
  Rng g(4);
  VectorXd mean = VectorXd::Zero(2);
  for (int i = 0; i < n; ++i) mean += two_moons(th, g) / n;
  std::mt19937_64 h(99);
  std::uniform_real_distribution<double> ua(-std::numbers::pi / 2, std::numbers::pi / 2);
  std::normal_distribution<double> nr(0.1, 0.01);
  double ox = 0, oy = 0;
  for (int i = 0; i < n; ++i) {
    const double a = ua(h), r = nr(h);
    ox += (r * std::cos(a) - 0.25 * std::abs(th(0) + th(1)) / std::sqrt(2.0)) / n;
    oy += (r * std::sin(a) + 0.25 * (th(1) - th(0)) / std::sqrt(2.0)) / n;
  }
  // per-draw sd is at most 0.1 in each coordinate
  const double tol = 4 * 0.1 * std::sqrt(2.0 / n);
  EXPECT_NEAR(mean(0), ox, tol);
  EXPECT_NEAR(mean(1), oy, tol);
  EXPECT_NEAR(mean(0), 2 / std::numbers::pi * 0.1 - 0.25 * 0.3 / std::sqrt(2.0), tol);
}

TEST(TwoMoons, ReferencePosteriorIsBimodal) {
  const TaskDefinition t = make_task("two_moons");
  const MatrixXd ref = t.reference_sampler(t.reference_y, 2000, 1);
  ASSERT_EQ(ref.cols(), 2000);
  // modes sit on either side of theta1 + theta2 = 0
  int pos = 0;
  for (Eigen::Index j = 0; j < ref.cols(); ++j) pos += ref(0, j) + ref(1, j) > 0;
  EXPECT_GT(pos, 600);
  EXPECT_LT(pos, 1400);
  const MatrixXd again = t.reference_sampler(t.reference_y, 2000, 1);
  EXPECT_EQ(ref, again);
}

// ----------------------------------------------------------- Gaussian tasks

TEST(GaussianMixture, VarianceAtZero) {
  Rng g(5);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const VectorXd y = gaussian_mixture(v({0, 0}), g);
    s += y(0);
    s2 += y(0) * y(0);
  }
  const double var = s2 / n - (s / n) * (s / n);
  // sd of the sample variance for this mixture: sqrt((E y^4 - var^2)/n), E y^4 = 1.5 + 1.5e-4
  EXPECT_NEAR(var, 0.505, 4 * std::sqrt((1.50015 - 0.505 * 0.505) / n));
}

TEST(GaussianMixture, ReferenceStaysInBox) {
  const TaskDefinition t = make_task("gaussian_mixture");
  const MatrixXd ref = t.reference_sampler(v({9.8, -9.9}), 500, 2);
  EXPECT_LE(ref.maxCoeff(), 10.0);
  EXPECT_GE(ref.minCoeff(), -10.0);
}

TEST(GaussianLinear, AnalyticPosterior) {
  const TaskDefinition t = make_task("gaussian_linear");
  const VectorXd y = VectorXd::LinSpaced(10, -1, 1);
  const GaussianPosterior p = t.analytic_posterior(y);
  for (Eigen::Index i = 0; i < 10; ++i) {
    EXPECT_DOUBLE_EQ(p.mean(i), y(i) / 2);
    EXPECT_DOUBLE_EQ(p.variance(i), 0.05);
    EXPECT_TRUE(std::isinf(p.lower(i)));
  }
  const MatrixXd s = t.reference_sampler(y, 20000, 3);
  const VectorXd m = s.rowwise().mean();
  for (Eigen::Index i = 0; i < 10; ++i) {
    EXPECT_NEAR(m(i), y(i) / 2, 4 * std::sqrt(0.05 / 20000));
    const double var = (s.row(i).array() - m(i)).square().mean();
    EXPECT_NEAR(var, 0.05, 4 * 0.05 * std::sqrt(2.0 / 20000));
  }
}

TEST(GaussianLinear, PosteriorMatchesGridQuadrature) {
  // One coordinate: prior N(0, 0.1) times likelihood N(y; theta, 0.1) on a fine grid.
  const double y = 0.37, var = 0.1;
  const int n = 200001;
  const double lo = -3, hi = 3, h = (hi - lo) / (n - 1);
  double z = 0, m1 = 0, m2 = 0;
  for (int k = 0; k < n; ++k) {
    const double th = lo + k * h;
    const double w = (k == 0 || k == n - 1 ? 0.5 : 1.0) *
                     std::exp(-th * th / (2 * var) - (y - th) * (y - th) / (2 * var));
    z += w;
    m1 += w * th;
    m2 += w * th * th;
  }
  const double mean = m1 / z, variance = m2 / z - mean * mean;
  const GaussianPosterior p = make_task("gaussian_linear").analytic_posterior(VectorXd::Constant(10, y));
  EXPECT_NEAR(mean, p.mean(0), 1e-6);
  EXPECT_NEAR(variance, p.variance(0), 1e-6);
}

TEST(GaussianLinearUniform, TruncatedPosterior) {
  const TaskDefinition t = make_task("gaussian_linear_uniform");
  const VectorXd y = VectorXd::Constant(10, 1.8);
  const GaussianPosterior p = t.analytic_posterior(y);
  EXPECT_EQ(p.lower(0), -1.0);
  EXPECT_EQ(p.upper(0), 1.0);
  const MatrixXd s = t.reference_sampler(y, 5000, 4);
  EXPECT_LE(s.maxCoeff(), 1.0);
  EXPECT_GE(s.minCoeff(), -1.0);
  // truncated N(0.9, 0.05) on [-1,1]: mean below the untruncated 0.9
  EXPECT_LT(s.row(0).mean(), 0.9);
}

// ---------------------------------------------------------------------- SLCP

TEST(Slcp, UncorrelatedWhenTheta5IsZero) {
  Rng g(6);
  const VectorXd th = v({0.5, -1, 1.2, 0.7, 0.0});
  const int n = 50000;
  double sxy = 0, sx = 0, sy = 0;
  for (int i = 0; i < n; ++i) {
    const VectorXd y = slcp(th, g);
    sx += y(0) - 0.5;
    sy += y(1) + 1;
    sxy += (y(0) - 0.5) * (y(1) + 1);
  }
  const double corr = (sxy / n - sx / n * sy / n) / (1.2 * 0.7);
  EXPECT_NEAR(corr, 0.0, 4 / std::sqrt(n));
}

TEST(Slcp, DeterministicAtZeroScale) {
  Rng g(7);
  const VectorXd y = slcp(v({1.5, -2, 0, 0, 2.5}), g);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(y(2 * k), 1.5);
    EXPECT_EQ(y(2 * k + 1), -2.0);
  }
}

TEST(Slcp, DistractorPermutationFixedPerInstance) {
  const TaskDefinition t = make_task("slcp_distractors");
  const VectorXd th = v({1.5, -2, 0, 0, 0});
  Rng g(8);
  std::set<Eigen::Index> fixed_a, fixed_b;
  for (int rep = 0; rep < 2; ++rep) {
    const VectorXd y = t.simulate(th, g);
    ASSERT_EQ(y.size(), 100);
    auto& fixed = rep == 0 ? fixed_a : fixed_b;
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if (y(i) == 1.5 || y(i) == -2.0) fixed.insert(i);
  }
  EXPECT_EQ(fixed_a.size(), 8u);
  EXPECT_EQ(fixed_a, fixed_b);
}

// ------------------------------------------------------------- Bernoulli GLM

TEST(BernoulliGlm, LogisticAndSaturation) {
  EXPECT_EQ(logistic(0.0), 0.5);
  const GlmDesign d = GlmDesign::make(1);
  VectorXd th = VectorXd::Zero(10);
  th(0) = -1e6;  // clamped at -30
  Rng g(9);
  EXPECT_EQ(bernoulli_glm_raw(th, g, d).sum(), 0.0);
  const VectorXd s = bernoulli_glm(th, g, d, false);
  EXPECT_EQ(s.size(), 10);
  EXPECT_EQ(s.cwiseAbs().sum(), 0.0);
}

TEST(BernoulliGlm, SufficientStatisticsOfRaw) {
  const GlmDesign d = GlmDesign::make(2);
  VectorXd th = VectorXd::Zero(10);
  Rng a(10), b(10);
  const VectorXd raw = bernoulli_glm(th, a, d, true);
  const VectorXd stats = bernoulli_glm(th, b, d, false);
  EXPECT_EQ(stats(0), raw.sum());
  EXPECT_TRUE(stats.tail(9).isApprox(d.stimulus * raw));
  for (Eigen::Index i = 0; i < raw.size(); ++i) EXPECT_TRUE(raw(i) == 0.0 || raw(i) == 1.0);
}

TEST(BernoulliGlm, PriorFilterCovariance) {
  // f = F^-1 z has covariance (F^T F)^-1
  const TaskDefinition t = make_task("bernoulli_glm");
  const GlmDesign d = GlmDesign::make(0);
  const MatrixXd cov = (d.second_diff.transpose() * d.second_diff).inverse();
  Rng g(12);
  const int n = 100000;
  const MatrixXd th = sample_prior(t, n, g);
  const MatrixXd f = th.bottomRows(9);
  const MatrixXd emp = f * f.transpose() / n;
  for (int i = 0; i < 9; ++i) EXPECT_NEAR(emp(i, i), cov(i, i), 0.03 * cov(i, i)) << i;
  const double beta_var = th.row(0).squaredNorm() / n;
  EXPECT_NEAR(beta_var, 2.0, 0.04);
}

// ----------------------------------------------------------------------- SIR

TEST(Sir, PopulationConserved) {
  for (auto [b, gm] : {std::pair{0.4, 0.125}, {2.0, 0.05}, {0.1, 0.3}}) {
    const MatrixXd tr = sir_trajectory(b, gm);
    for (Eigen::Index k = 0; k < tr.cols(); ++k) EXPECT_LT(std::abs(tr.col(k).sum() - 1e6), 1e-6 * 1e6);
  }
}

TEST(Sir, NoInfectionDecaysExponentially) {
  const MatrixXd tr = sir_trajectory(0.0, 0.125);
  for (Eigen::Index k = 0; k < tr.cols(); ++k) {
    const double t = 16.0 * (k + 1);
    EXPECT_NEAR(tr(1, k), std::exp(-0.125 * t), 1e-9);
  }
}

TEST(Sir, NoRecoveryKeepsRemovedEmpty) {
  const MatrixXd tr = sir_trajectory(0.5, 0.0);
  for (Eigen::Index k = 0; k < tr.cols(); ++k) {
    EXPECT_EQ(tr(2, k), 0.0);
    EXPECT_NEAR(tr(0, k) + tr(1, k), 1e6, 1e-6 * 1e6);
  }
}

TEST(Sir, StepHalvingChangesLittle) {
  const MatrixXd a = sir_trajectory(0.4, 0.125);
  SirConfig c;
  c.step = 0.05;
  const MatrixXd b = sir_trajectory(0.4, 0.125, c);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff() / 1e6, 1e-6);
}

TEST(Sir, ObservationsAreBinomialCounts) {
  Rng g(13);
  const VectorXd y = sir(v({0.4, 0.125}), g);
  ASSERT_EQ(y.size(), 10);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    EXPECT_GE(y(i), 0.0);
    EXPECT_LE(y(i), 1000.0);
    EXPECT_EQ(y(i), std::round(y(i)));
  }
}

// ------------------------------------------------------------ Lotka-Volterra

TEST(LotkaVolterra, EquilibriumIsStationary) {
  const VectorXd th = v({0.9, 0.05, 0.8, 0.04});
  const State<2> eq{th(2) / th(3), th(0) / th(1)};
  const State<2> d = lotka_volterra_rhs(th, eq);
  EXPECT_NEAR(d[0], 0.0, 1e-12);
  EXPECT_NEAR(d[1], 0.0, 1e-12);
}

TEST(LotkaVolterra, FirstIntegralDrift) {
  const VectorXd th = make_task("lotka_volterra").reference_theta;  // prior median
  State<2> x{30, 1};
  const double h0 = lotka_volterra_invariant(th, x);
  double drift = 0;
  auto rhs = [&](const State<2>& s) { return lotka_volterra_rhs(th, s); };
  for (int k = 0; k < 2000; ++k) {
    x = rk4_step(x, 0.01, rhs);
    drift = std::max(drift, std::abs(lotka_volterra_invariant(th, x) - h0));
  }
  EXPECT_LT(drift, 1e-4);
}

TEST(LotkaVolterra, NoiselessObservationIsExact) {
  const VectorXd th = make_task("lotka_volterra").reference_theta;
  LotkaVolterraConfig c;
  c.noise_sd = 0.0;
  Rng g(14);
  const VectorXd y = lotka_volterra(th, g, c);
  const MatrixXd tr = lotka_volterra_trajectory(th, c);
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(y(i), tr(0, i));
    EXPECT_EQ(y(10 + i), tr(1, i));
  }
}

TEST(LotkaVolterra, StepHalvingChangesLittle) {
  const VectorXd th = make_task("lotka_volterra").reference_theta;
  LotkaVolterraConfig c;
  const MatrixXd a = lotka_volterra_trajectory(th, c);
  c.step = 0.005;
  const MatrixXd b = lotka_volterra_trajectory(th, c);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-6);
}

// ------------------------------------------------------------ Hodgkin-Huxley

TEST(HodgkinHuxley, EfunBranches) {
  EXPECT_DOUBLE_EQ(efun(1e-5), 1 - 5e-6);
  EXPECT_DOUBLE_EQ(efun(-1e-5), 1 + 5e-6);
  EXPECT_DOUBLE_EQ(efun(0.0), 1.0);
  EXPECT_NEAR(efun(2.0), 2.0 / (std::exp(2.0) - 1), 1e-15);
  EXPECT_NEAR(efun(-3.0), -3.0 / (std::exp(-3.0) - 1), 1e-15);
  // the two branches agree near the switch point
  EXPECT_NEAR(efun(1e-4 * (1 - 1e-12)), efun(1e-4 * (1 + 1e-12)), 1e-9);
}

TEST(HodgkinHuxley, SteadyStateInitialisation) {
  const HhRates r = hh_rates(kHhRestVoltage);
  const double m = r.am / (r.am + r.bm), h = r.ah / (r.ah + r.bh), n = r.an / (r.an + r.bn);
  EXPECT_NEAR(r.am * (1 - m) - r.bm * m, 0.0, 1e-10);
  EXPECT_NEAR(r.ah * (1 - h) - r.bh * h, 0.0, 1e-10);
  EXPECT_NEAR(r.an * (1 - n) - r.bn * n, 0.0, 1e-10);
  HhConfig c;
  c.noise = 0;
  c.current = 0;
  c.steps = 1;
  Rng g(1);
  const HhTrace tr = hodgkin_huxley_trace(make_task("hodgkin_huxley").reference_theta, g, c);
  EXPECT_EQ(tr.m[0], m);
  EXPECT_NEAR(tr.m[1], m, 1e-10);
  EXPECT_NEAR(tr.h[1], h, 1e-10);
  EXPECT_NEAR(tr.n[1], n, 1e-10);
}

TEST(HodgkinHuxley, RestIsStableWithoutInput) {
  HhConfig c;
  c.noise = 0;
  c.current = 0;
  Rng g(2);
  const VectorXd th = make_task("hodgkin_huxley").reference_theta;
  const HhTrace tr = hodgkin_huxley_trace(th, g, c);
  const VectorXd s = hh_summaries(tr, c);
  EXPECT_EQ(s(0), 0.0);
  for (double x : tr.v) EXPECT_LT(std::abs(x - kHhRestVoltage), 2.0);
}

TEST(HodgkinHuxley, SpikesUnderStimulus) {
  Rng g(3);
  const VectorXd s = hodgkin_huxley(make_task("hodgkin_huxley").reference_theta, g);
  ASSERT_EQ(s.size(), 8);
  EXPECT_GE(s(0), 3.0);
  EXPECT_GT(s(3), s(1));  // depolarised during stimulation
  EXPECT_GT(s(7), s(2));
}

// ------------------------------------------------------------------- SSA

TEST(Ssa, PureDeathMatchesExponentialDecay) {
  ReactionNetwork net;
  net.species = 1;
  net.reactions.push_back({{{0, 1}}, {{0, -1}}, 0});
  const double delta = 0.1;
  const std::vector<double> grid = {0, 5, 10, 20};
  const int reps = 200;
  std::vector<double> sum(grid.size(), 0.0);
  for (int r = 0; r < reps; ++r) {
    Rng g = rng::stream(1, static_cast<std::uint64_t>(r));
    const SsaTrajectory tr = gillespie_ssa(net, {1000}, {delta}, grid, g);
    for (std::size_t k = 0; k < grid.size(); ++k) sum[k] += static_cast<double>(tr.at(0, k));
  }
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double p = std::exp(-delta * grid[k]);
    const double mean = 1000 * p, sd = std::sqrt(1000 * p * (1 - p) / reps);
    EXPECT_LE(std::abs(sum[k] / reps - mean), 3 * sd + 1e-12) << grid[k];
  }
}

TEST(Ssa, ZeroRatesFreezeState) {
  const ReactionNetwork net = vilar_network();
  Rng g(4);
  const std::vector<double> zeros(vilar::kRates, 0.0);
  const SsaTrajectory tr = gillespie_ssa(net, vilar_initial_state(), zeros, oscillator_grid(), g);
  const auto x0 = vilar_initial_state();
  for (int s = 0; s < net.species; ++s)
    for (std::size_t k = 0; k < tr.times.size(); ++k) ASSERT_EQ(tr.at(s, k), x0[static_cast<std::size_t>(s)]);
}

TEST(Ssa, RejectsBadInput) {
  const ReactionNetwork net = vilar_network();
  Rng g(5);
  std::vector<double> rates = vilar_true_parameters();
  rates[0] = -1;
  EXPECT_THROW(gillespie_ssa(net, vilar_initial_state(), rates, oscillator_grid(), g), std::invalid_argument);
  EXPECT_THROW(gillespie_ssa(net, {1, 2}, vilar_true_parameters(), oscillator_grid(), g), std::invalid_argument);
}

TEST(Ssa, CountsStayNonnegative) {
  Rng g(6);
  const auto truth = vilar_true_parameters();
  const SsaTrajectory tr = gillespie_ssa(vilar_network(), vilar_initial_state(), truth, oscillator_grid(), g);
  for (auto c : tr.counts) EXPECT_GE(c, 0);
}

TEST(GeneticOscillator, OscillatesAtTrueParameters) {
  const VectorXd th = make_task("genetic_oscillator").reference_theta;
  int ok = 0;
  for (int s = 0; s < 20; ++s) {
    Rng g = rng::stream(static_cast<std::uint64_t>(s), 0, rng::kSimulate);
    const MatrixXd tr = oscillator_trajectories(th, g);
    ok += peaks_above(tr.row(1), 500) >= 3;
  }
  EXPECT_GE(ok, 16);
}

TEST(OscillatorSummaries, ConstantTrajectory) {
  const MatrixXd tr = MatrixXd::Constant(3, 200, 7.0);
  const VectorXd s = oscillator_summaries(tr);
  ASSERT_EQ(s.size(), 15);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(s(5 * i + 0), 7.0);
    EXPECT_EQ(s(5 * i + 1), 0.0);
    EXPECT_EQ(s(5 * i + 2), 7.0);
    EXPECT_EQ(s(5 * i + 3), 0.0);
    EXPECT_EQ(s(5 * i + 4), 7.0);
  }
}

TEST(OscillatorSummaries, SinusoidPeriod) {
  MatrixXd tr(3, 200);
  for (int k = 0; k < 200; ++k) {
    tr(0, k) = 100 + 50 * std::sin(2 * std::numbers::pi * k / 20.0);
    tr(1, k) = 10 + std::cos(2 * std::numbers::pi * k / 37.0);
    tr(2, k) = 5;
  }
  const VectorXd s = oscillator_summaries(tr);
  EXPECT_NEAR(s(3), 20.0, 1.0);
  EXPECT_NEAR(s(8), 37.0, 1.0);
  EXPECT_EQ(s(13), 0.0);
}

TEST(OscillatorSummaries, SpeciesOrderIsBlockOrder) {
  MatrixXd tr(3, 200);
  for (int k = 0; k < 200; ++k) {
    tr(0, k) = k;
    tr(1, k) = 2.0 * (k % 13);
    tr(2, k) = 300 - k;
  }
  const VectorXd s = oscillator_summaries(tr);
  MatrixXd swapped(3, 200);
  swapped << tr.row(2), tr.row(0), tr.row(1);
  const VectorXd t = oscillator_summaries(swapped);
  EXPECT_EQ(t.segment(0, 5), s.segment(10, 5));
  EXPECT_EQ(t.segment(5, 5), s.segment(0, 5));
  EXPECT_EQ(t.segment(10, 5), s.segment(5, 5));
}
