#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "condisim/rng.hpp"
#include "condisim/schedule.hpp"
#include "condisim/sim/models.hpp"

namespace condisim::sim {

/// Per-task training defaults.
struct TaskDefaults {
  int blocks = 4;
  int hidden = 64;
  ScheduleKind schedule = ScheduleKind::cosine;
  int steps = 160;
  int batch = 32;
  double lr = 1e-3;
};

/// Independent Gaussian posterior, optionally truncated to a box.
struct GaussianPosterior {
  VectorXd mean;
  VectorXd variance;
  VectorXd lower;  // -inf when untruncated
  VectorXd upper;
};

using Sampler = std::function<MatrixXd(const VectorXd& y, std::size_t n, std::uint64_t seed)>;

struct TaskDefinition {
  std::string name;
  int theta_dim = 0;
  int y_dim = 0;
  std::string prior_description;
  VectorXd lower, upper;  // prior support, +-inf where unbounded
  std::function<VectorXd(Rng&)> prior;
  std::function<VectorXd(const VectorXd&, Rng&)> simulate;
  std::function<GaussianPosterior(const VectorXd&)> analytic_posterior;  // empty if none
  Sampler reference_sampler;                                              // empty if none
  std::string reference_method;
  VectorXd reference_theta;
  VectorXd reference_y;
  TaskDefaults defaults;
  std::uint64_t task_seed = 0;
  std::string version;

  bool in_support(const VectorXd& theta) const {
    if (theta.size() != theta_dim) return false;
    for (Eigen::Index i = 0; i < theta.size(); ++i)
      if (!(theta(i) >= lower(i) && theta(i) <= upper(i))) return false;
    return true;
  }
};

inline constexpr std::uint64_t kDefaultTaskSeed = 20240501;

/// FNV-1a digest, printed in hex, for dataset and checkpoint provenance.
inline std::string version_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
  return out;
}

/// n i.i.d. prior draws, one column each.
inline MatrixXd sample_prior(const TaskDefinition& task, std::size_t n, Rng& g) {
  MatrixXd out(task.theta_dim, static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) = task.prior(g);
  return out;
}

/// Draws from an independent (truncated) Gaussian by inverse CDF.
inline MatrixXd sample_gaussian_posterior(const GaussianPosterior& post, std::size_t n, std::uint64_t seed) {
  const Eigen::Index d = post.mean.size();
  MatrixXd out(d, static_cast<Eigen::Index>(n));
  const boost::math::normal_distribution<double> std_normal;
  std::vector<double> lo(d), hi(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double sd = std::sqrt(post.variance(i));
    lo[i] = std::isfinite(post.lower(i)) ? boost::math::cdf(std_normal, (post.lower(i) - post.mean(i)) / sd) : 0.0;
    hi[i] = std::isfinite(post.upper(i)) ? boost::math::cdf(std_normal, (post.upper(i) - post.mean(i)) / sd) : 1.0;
    if (!(hi[i] > lo[i])) throw std::domain_error("truncated Gaussian has no mass inside its bounds");
  }
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t j) {
    Rng g = rng::stream(seed, j, rng::kReference);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double sd = std::sqrt(post.variance(i));
      if (lo[i] == 0.0 && hi[i] == 1.0) {
        out(i, static_cast<Eigen::Index>(j)) = post.mean(i) + sd * rng::normal(g);
        continue;
      }
      double u = rng::uniform(g, lo[i], hi[i]);
      u = std::clamp(u, 1e-300, 1.0 - 1e-16);
      double x = post.mean(i) + sd * boost::math::quantile(std_normal, u);
      out(i, static_cast<Eigen::Index>(j)) = std::clamp(x, post.lower(i), post.upper(i));
    }
  });
  return out;
}

/// Rejection ABC: simulate `per_sample * n` prior draws and keep the n whose
/// observations are closest to y in Euclidean distance.
inline MatrixXd abc_nearest(const TaskDefinition& task, const VectorXd& y, std::size_t n, std::uint64_t seed,
                            std::size_t per_sample = 1000) {
  if (n == 0) return MatrixXd(task.theta_dim, 0);
  constexpr std::size_t kChunks = 64;
  const std::size_t total = n * per_sample;
  struct Hit {
    double dist;
    std::size_t index;
    VectorXd theta;
    bool operator<(const Hit& o) const { return dist != o.dist ? dist < o.dist : index < o.index; }
  };
  std::vector<std::vector<Hit>> kept(kChunks);
  parallel_for(kChunks, [&](std::size_t c) {
    const std::size_t begin = total * c / kChunks, end = total * (c + 1) / kChunks;
    Rng g = rng::stream(seed, c, rng::kReference);
    std::priority_queue<Hit> heap;  // max-heap on distance
    for (std::size_t i = begin; i < end; ++i) {
      VectorXd theta = task.prior(g);
      double dist;
      try {
        dist = (task.simulate(theta, g) - y).norm();
      } catch (const SimulationError&) {
        continue;
      }
      if (heap.size() < n) {
        heap.push({dist, i, std::move(theta)});
      } else if (Hit{dist, i, {}} < heap.top()) {
        heap.pop();
        heap.push({dist, i, std::move(theta)});
      }
    }
    while (!heap.empty()) {
      kept[c].push_back(heap.top());
      heap.pop();
    }
  });
  std::vector<Hit> all;
  for (auto& k : kept)
    for (auto& h : k) all.push_back(std::move(h));
  const std::size_t m = std::min(n, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m), all.end());
  std::sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m),
            [](const Hit& a, const Hit& b) { return a.index < b.index; });
  MatrixXd out(task.theta_dim, static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) out.col(static_cast<Eigen::Index>(j)) = all[j].theta;
  return out;
}

namespace detail {

inline VectorXd constant(int d, double v) { return VectorXd::Constant(d, v); }

inline std::function<VectorXd(Rng&)> uniform_prior(VectorXd lo, VectorXd hi) {
  return [lo = std::move(lo), hi = std::move(hi)](Rng& g) {
    VectorXd t(lo.size());
    for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = rng::uniform(g, lo(i), hi(i));
    return t;
  };
}

inline std::function<VectorXd(Rng&)> lognormal_prior(VectorXd loc, VectorXd scale) {
  return [loc = std::move(loc), scale = std::move(scale)](Rng& g) {
    VectorXd t(loc.size());
    for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = std::exp(loc(i) + scale(i) * rng::normal(g));
    return t;
  };
}

inline VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

inline void set_box(TaskDefinition& t, VectorXd lo, VectorXd hi) {
  t.lower = lo;
  t.upper = hi;
  t.prior = uniform_prior(std::move(lo), std::move(hi));
}

inline void set_unbounded(TaskDefinition& t) {
  t.lower = constant(t.theta_dim, -std::numeric_limits<double>::infinity());
  t.upper = constant(t.theta_dim, std::numeric_limits<double>::infinity());
}

inline void set_positive(TaskDefinition& t) {
  t.lower = constant(t.theta_dim, 0.0);
  t.upper = constant(t.theta_dim, std::numeric_limits<double>::infinity());
}

inline GaussianPosterior gaussian_linear_posterior(const VectorXd& y, bool truncated) {
  // prior N(0, v), likelihood N(theta, v): posterior N(y/2, v/2)
  GaussianPosterior p;
  p.mean = y / 2.0;
  p.variance = constant(static_cast<int>(y.size()), kGaussianLinearVariance / 2.0);
  const double inf = std::numeric_limits<double>::infinity();
  p.lower = constant(static_cast<int>(y.size()), truncated ? -1.0 : -inf);
  p.upper = constant(static_cast<int>(y.size()), truncated ? 1.0 : inf);
  return p;
}

}  // namespace detail

inline const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names = {
      "two_moons", "gaussian_mixture", "gaussian_linear", "gaussian_linear_uniform",
      "slcp",      "slcp_distractors", "bernoulli_glm",   "bernoulli_glm_raw",
      "sir",       "lotka_volterra",   "hodgkin_huxley",  "genetic_oscillator"};
  return names;
}

/// Builds a task instance. `task_seed` fixes per-instance constants (GLM
/// design, distractor permutation, reference observation).
inline TaskDefinition make_task(const std::string& name, std::uint64_t task_seed = kDefaultTaskSeed) {
  using detail::constant;
  using detail::vec;
  TaskDefinition t;
  t.name = name;
  t.task_seed = task_seed;
  const auto S = ScheduleKind::scaled_linear;
  const auto Q = ScheduleKind::scaled_quadratic;
  const auto C = ScheduleKind::cosine;
  std::string constants;  // folded into the version hash

  if (name == "two_moons") {
    t.theta_dim = 2;
    t.y_dim = 2;
    t.prior_description = "U(-1,1)^2";
    detail::set_box(t, constant(2, -1), constant(2, 1));
    t.simulate = [](const VectorXd& th, Rng& g) { return two_moons(th, g); };
    t.reference_theta = vec({0.8, 0.8});
    t.defaults = {4, 64, C, 160, 32, 1e-3};
  } else if (name == "gaussian_mixture") {
    t.theta_dim = 2;
    t.y_dim = 2;
    t.prior_description = "U(-10,10)^2";
    detail::set_box(t, constant(2, -10), constant(2, 10));
    t.simulate = [](const VectorXd& th, Rng& g) { return gaussian_mixture(th, g); };
    t.reference_theta = vec({1.5, -2.0});
    t.defaults = {4, 64, C, 160, 32, 1e-3};
  } else if (name == "gaussian_linear" || name == "gaussian_linear_uniform") {
    const bool uniform = name == "gaussian_linear_uniform";
    t.theta_dim = 10;
    t.y_dim = 10;
    if (uniform) {
      t.prior_description = "U(-1,1)^10";
      detail::set_box(t, constant(10, -1), constant(10, 1));
    } else {
      t.prior_description = "N(0, 0.1 I_10)";
      detail::set_unbounded(t);
      t.prior = [](Rng& g) {
        VectorXd th(10);
        for (Eigen::Index i = 0; i < 10; ++i) th(i) = std::sqrt(kGaussianLinearVariance) * rng::normal(g);
        return th;
      };
    }
    t.simulate = [](const VectorXd& th, Rng& g) { return gaussian_linear(th, g); };
    t.analytic_posterior = [uniform](const VectorXd& y) { return detail::gaussian_linear_posterior(y, uniform); };
    t.defaults = uniform ? TaskDefaults{6, 64, C, 200, 50, 2e-4} : TaskDefaults{6, 64, S, 100, 50, 2e-4};
  } else if (name == "slcp" || name == "slcp_distractors") {
    t.theta_dim = 5;
    t.prior_description = "U(-3,3)^5";
    detail::set_box(t, constant(5, -3), constant(5, 3));
    if (name == "slcp") {
      t.y_dim = 8;
      t.simulate = [](const VectorXd& th, Rng& g) { return slcp(th, g); };
      t.defaults = {6, 128, S, 200, 32, 1e-3};
    } else {
      t.y_dim = 8 + kSlcpDistractors;
      std::vector<int> perm(static_cast<std::size_t>(t.y_dim));
      std::iota(perm.begin(), perm.end(), 0);
      Rng g = rng::stream(task_seed, 0, rng::kTask);
      std::shuffle(perm.begin(), perm.end(), g);
      for (int p : perm) constants += std::to_string(p) + ",";
      t.simulate = [perm](const VectorXd& th, Rng& g) { return slcp_distractors(th, g, perm); };
      t.defaults = {6, 128, Q, 1000, 50, 1e-3};
    }
  } else if (name == "bernoulli_glm" || name == "bernoulli_glm_raw") {
    const bool raw = name == "bernoulli_glm_raw";
    t.theta_dim = 1 + kGlmFilter;
    t.y_dim = raw ? kGlmTrials : 1 + kGlmFilter;
    t.prior_description = "beta ~ N(0,2), f ~ N(0, (F^T F)^-1)";
    detail::set_unbounded(t);
    auto design = std::make_shared<const GlmDesign>(GlmDesign::make(rng::stream_seed(task_seed, 1, rng::kTask)));
    const MatrixXd f_inv = design->second_diff.inverse();
    t.prior = [f_inv](Rng& g) {
      VectorXd th(1 + kGlmFilter);
      th(0) = std::sqrt(2.0) * rng::normal(g);
      VectorXd z(kGlmFilter);
      for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng::normal(g);
      th.tail(kGlmFilter) = f_inv * z;
      return th;
    };
    t.simulate = [design, raw](const VectorXd& th, Rng& g) { return bernoulli_glm(th, g, *design, raw); };
    constants += std::to_string(design->stimulus.sum()) + "/" + std::to_string(design->stimulus.squaredNorm());
    t.defaults = {6, 128, S, 200, 32, 1e-3};
  } else if (name == "sir") {
    t.theta_dim = 2;
    t.y_dim = 10;
    t.prior_description = "LogNormal((log 0.4, log 1/8), (0.5, 0.2))";
    detail::set_positive(t);
    t.prior = detail::lognormal_prior(vec({std::log(0.4), std::log(1.0 / 8.0)}), vec({0.5, 0.2}));
    t.simulate = [](const VectorXd& th, Rng& g) { return sir(th, g); };
    t.reference_theta = vec({0.4, 0.125});
    t.defaults = {4, 64, S, 100, 32, 1e-4};
  } else if (name == "lotka_volterra") {
    t.theta_dim = 4;
    t.y_dim = 20;
    t.prior_description = "LogNormal((-0.125, -3, -0.125, -3), 0.5)";
    detail::set_positive(t);
    t.prior = detail::lognormal_prior(vec({-0.125, -3.0, -0.125, -3.0}), constant(4, 0.5));
    t.simulate = [](const VectorXd& th, Rng& g) { return lotka_volterra(th, g); };
    t.reference_theta = vec({std::exp(-0.125), std::exp(-3.0), std::exp(-0.125), std::exp(-3.0)});
    t.defaults = {6, 128, C, 200, 50, 2e-4};
  } else if (name == "hodgkin_huxley") {
    t.theta_dim = 7;
    t.y_dim = kHhSummaries;
    t.prior_description = "U([1,60,10,0.1,40,-100,-90], [2,120,30,0.5,70,-60,-60])";
    detail::set_box(t, vec({1.0, 60, 10, 0.1, 40, -100, -90}), vec({2.0, 120, 30, 0.5, 70, -60, -60}));
    t.simulate = [](const VectorXd& th, Rng& g) { return hodgkin_huxley(th, g); };
    t.reference_theta = vec({1.0, 100, 20, 0.3, 50, -77, -65});
    t.defaults = {6, 128, Q, 1000, 50, 1e-3};
  } else if (name == "genetic_oscillator") {
    t.theta_dim = vilar::kRates;
    t.y_dim = kOscillatorSummaries;
    t.prior_description = "U(box, 15 rates)";
    detail::set_box(t, vec({0, 100, 0, 20, 10, 1, 1, 0, 0, 0, 0.5, 0, 0, 0, 0}),
                    vec({80, 600, 4, 60, 60, 7, 12, 2, 3, 0.7, 2.5, 4, 3, 70, 300}));
    t.simulate = [](const VectorXd& th, Rng& g) { return genetic_oscillator(th, g); };
    const auto truth = vilar_true_parameters();
    t.reference_theta = Eigen::Map<const VectorXd>(truth.data(), static_cast<Eigen::Index>(truth.size()));
    t.defaults = {6, 128, C, 300, 64, 1e-4};
  } else {
    throw std::invalid_argument("unknown task '" + name + "'");
  }

  if (t.reference_theta.size() == 0) {
    Rng g = rng::stream(task_seed, 0, rng::kReference);
    t.reference_theta = t.prior(g);
  }
  {
    Rng g = rng::stream(task_seed, 1, rng::kReference);
    t.reference_y = t.simulate(t.reference_theta, g);
  }

  if (t.analytic_posterior) {
    auto post = t.analytic_posterior;
    t.reference_sampler = [post](const VectorXd& y, std::size_t n, std::uint64_t seed) {
      return sample_gaussian_posterior(post(y), n, seed);
    };
    t.reference_method = "analytic";
  } else if (name == "gaussian_mixture") {
    // Posterior is the likelihood mixture in theta restricted to the prior box.
    const VectorXd lo = t.lower, hi = t.upper;
    t.reference_sampler = [lo, hi](const VectorXd& y, std::size_t n, std::uint64_t seed) {
      MatrixXd out(y.size(), static_cast<Eigen::Index>(n));
      parallel_for(n, [&](std::size_t j) {
        Rng g = rng::stream(seed, j, rng::kReference);
        for (int attempt = 0;; ++attempt) {
          if (attempt > 100000) throw std::runtime_error("gaussian_mixture reference: rejection stalled");
          const double sd = rng::uniform(g) < 0.5 ? 1.0 : 0.1;
          VectorXd th(y.size());
          for (Eigen::Index i = 0; i < th.size(); ++i) th(i) = y(i) + sd * rng::normal(g);
          if ((th.array() >= lo.array()).all() && (th.array() <= hi.array()).all()) {
            out.col(static_cast<Eigen::Index>(j)) = th;
            break;
          }
        }
      });
      return out;
    };
    t.reference_method = "rejection";
  } else if (name == "two_moons") {
    const TaskDefinition base = t;
    t.reference_sampler = [base](const VectorXd& y, std::size_t n, std::uint64_t seed) {
      return abc_nearest(base, y, n, seed);
    };
    t.reference_method = "rejection_abc";
  }

  std::string sig = "condisim-sim-v1|" + name + "|" + std::to_string(task_seed) + "|" + constants;
  t.version = version_hash(sig);
  return t;
}

}  // namespace condisim::sim
