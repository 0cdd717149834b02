#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "condisim/net.hpp"
#include "condisim/rng.hpp"
#include "condisim/schedule.hpp"
#include "condisim/standardizer.hpp"

namespace condisim {

/// sqrt(abar_t) theta0 + sqrt(1 - abar_t) eps. t = 0 is the identity.
inline Matrix forward_sample(const Matrix& theta0, int t, const Matrix& eps, const NoiseSchedule& s) {
  if (theta0.rows() != eps.rows() || theta0.cols() != eps.cols())
    throw std::invalid_argument("forward_sample: epsilon shape mismatch");
  if (t < 0 || t > s.steps()) throw std::out_of_range("forward_sample: step out of range");
  const double ab = s.alpha_bar(t);
  return std::sqrt(ab) * theta0 + std::sqrt(1.0 - ab) * eps;
}

struct GaussianStep {
  Vector mean;
  double variance = 0.0;
};

/// Closed-form q(theta_{t-1} | theta_t, theta0).
inline GaussianStep forward_posterior(const Vector& theta_t, const Vector& theta0, int t, const NoiseSchedule& s) {
  const double a = s.alpha(t);
  const double ab = s.alpha_bar(t);
  const double ab_prev = s.alpha_bar(t - 1);
  GaussianStep q;
  q.mean = (std::sqrt(ab_prev) * (1.0 - a) / (1.0 - ab)) * theta0 + (std::sqrt(a) * (1.0 - ab_prev) / (1.0 - ab)) * theta_t;
  q.variance = (1.0 - ab_prev) * a / (1.0 - ab);
  return q;
}

/// Mean of the reverse step written in terms of the injected noise.
inline Vector noise_param_mean(const Vector& theta_t, const Vector& eps, int t, const NoiseSchedule& s) {
  return (theta_t - (s.beta(t) / std::sqrt(1.0 - s.alpha_bar(t))) * eps) / std::sqrt(s.alpha(t));
}

/// (1 + lambda) eps_cond - lambda eps_uncond.
inline Matrix cfg_combine(const Matrix& eps_cond, const Matrix& eps_uncond, double lambda) {
  if (eps_cond.rows() != eps_uncond.rows() || eps_cond.cols() != eps_uncond.cols())
    throw std::invalid_argument("cfg_combine: shape mismatch");
  if (lambda == 0.0) return eps_cond;
  return (1.0 + lambda) * eps_cond - lambda * eps_uncond;
}

/// One ancestral step theta_t -> theta_{t-1}. Pass z = 0 at t = 1.
inline Matrix reverse_step(const Matrix& theta_t, const Matrix& eps_hat, int t, const NoiseSchedule& s,
                           const Matrix& z, SigmaKind sigma_kind = SigmaKind::beta) {
  const double a = s.alpha(t);
  const double coef = (1.0 - a) / std::sqrt(1.0 - s.alpha_bar(t));
  return (theta_t - coef * eps_hat) / std::sqrt(a) + s.sigma(t, sigma_kind) * z;
}

/// Per-element draws for one evaluation of the noise-prediction loss.
struct NoiseDraws {
  std::vector<int> steps;
  Matrix eps;
  std::vector<char> uncond;
};

inline NoiseDraws draw_noise(int dim, int batch, const NoiseSchedule& s, Rng& g, double p_uncond) {
  NoiseDraws d;
  d.steps.resize(batch);
  d.eps.resize(dim, batch);
  d.uncond.assign(batch, 0);
  std::uniform_int_distribution<int> step(1, s.steps());
  for (int j = 0; j < batch; ++j) {
    d.steps[j] = step(g);
    for (int i = 0; i < dim; ++i) d.eps(i, j) = rng::normal(g);
    if (p_uncond > 0.0) d.uncond[j] = rng::uniform(g) < p_uncond ? 1 : 0;
  }
  return d;
}

struct LossStats {
  std::size_t conditioned = 0;
  std::size_t unconditioned = 0;
};

/// mean_b w_t ||eps - eps_hat||^2 for fixed draws. When d_out is given it
/// receives the gradient with respect to the model output.
template <class Model>
double noise_prediction_loss(const Model& model, const NoiseSchedule& s, const Matrix& theta0, const Matrix& y,
                             const NoiseDraws& draws, double gamma_snr, ForwardCache* cache = nullptr,
                             Matrix* d_out = nullptr, LossStats* stats = nullptr) {
  const int B = static_cast<int>(theta0.cols());
  if (B == 0) throw std::invalid_argument("training_loss: empty batch");
  Matrix theta_t(theta0.rows(), B);
  std::vector<double> w(B);
  for (int j = 0; j < B; ++j) {
    const double ab = s.alpha_bar(draws.steps[j]);
    theta_t.col(j) = std::sqrt(ab) * theta0.col(j) + std::sqrt(1.0 - ab) * draws.eps.col(j);
    w[j] = s.loss_weight(draws.steps[j], gamma_snr);
  }
  DenoiserInput in;
  in.theta = &theta_t;
  in.cond = &y;
  in.steps = draws.steps;
  in.uncond = draws.uncond;
  ForwardCache local;
  ForwardCache* c = cache ? cache : &local;
  const Matrix eps_hat = model.forward(in, c);
  const Matrix diff = eps_hat - draws.eps;
  double loss = 0.0;
  for (int j = 0; j < B; ++j) loss += w[j] * diff.col(j).squaredNorm();
  loss /= B;
  if (!std::isfinite(loss)) throw std::runtime_error("training_loss: non-finite loss");
  if (d_out) {
    *d_out = diff;
    for (int j = 0; j < B; ++j) d_out->col(j) *= 2.0 * w[j] / B;
  }
  if (stats) {
    stats->conditioned += c->conditioned_columns;
    stats->unconditioned += c->null_columns;
  }
  return loss;
}

struct TrainingLoss {
  double loss = 0.0;
  DenoiserParams grads;
  LossStats stats;
};

/// Draws t, eps and condition dropout for each element, evaluates the
/// weighted noise-prediction loss and its gradient.
inline TrainingLoss training_loss(const DenoiserNetwork& net, const NoiseSchedule& s, const Matrix& theta0,
                                  const Matrix& y, Rng& g, double gamma_snr, double p_uncond) {
  const NoiseDraws draws = draw_noise(static_cast<int>(theta0.rows()), static_cast<int>(theta0.cols()), s, g, p_uncond);
  TrainingLoss out;
  ForwardCache cache;
  Matrix d_out;
  out.loss = noise_prediction_loss(net, s, theta0, y, draws, gamma_snr, &cache, &d_out, &out.stats);
  out.grads = net.backward(cache, d_out);
  return out;
}

struct GuidanceConfig {
  double lambda = 0.0;
};

struct PosteriorSamples {
  Matrix theta;  // theta_dim x kept draws
  std::size_t requested = 0;
  std::size_t excluded = 0;
  std::size_t unconditional_evaluations = 0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
};

struct SamplerOptions {
  SigmaKind sigma = SigmaKind::beta;
  /// Chains per batched evaluation. Fixed so results do not depend on threads.
  int chunk = 512;
  /// Stream index offset, so several observations can share one seed.
  std::uint64_t stream_offset = 0;
};

/// n independent reverse chains from N(0, I) at observation y0 (standardized).
/// Chain i draws all of its noise from stream (seed, i). When `standardizer`
/// is given the returned draws are mapped back to simulator units.
template <class Model>
PosteriorSamples sample_posterior(const Model& net, const NoiseSchedule& s, const Vector& y0, std::size_t n,
                                  GuidanceConfig guidance, std::uint64_t seed,
                                  const Standardizer* standardizer = nullptr, SamplerOptions opt = {}) {
  if (guidance.lambda < 0.0) throw std::invalid_argument("sample_posterior: guidance scale must be >= 0");
  const int d = net.shape().theta_dim;
  PosteriorSamples out;
  out.requested = n;
  out.lambda = guidance.lambda;
  out.seed = seed;
  if (n == 0) {
    out.theta.resize(d, 0);
    return out;
  }
  const Matrix y = y0;
  const std::size_t chunk = static_cast<std::size_t>(std::max(1, opt.chunk));
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  std::vector<Matrix> results(n_chunks);
  std::vector<std::vector<char>> alive(n_chunks);
  std::vector<std::size_t> uncond_evals(n_chunks, 0);

  parallel_for(n_chunks, [&](std::size_t c) {
    const std::size_t begin = c * chunk;
    const int m = static_cast<int>(std::min(n, begin + chunk) - begin);
    std::vector<Rng> streams;
    streams.reserve(m);
    for (int j = 0; j < m; ++j) streams.push_back(rng::stream(seed, opt.stream_offset + begin + j, rng::kChain));
    Matrix state(d, m);
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < d; ++i) state(i, j) = rng::normal(streams[j]);
    std::vector<char> ok(m, 1);
    Matrix z(d, m);
    for (int t = s.steps(); t >= 1; --t) {
      DenoiserInput in;
      in.theta = &state;
      in.cond = &y;
      in.steps = {t};
      Matrix eps = net.forward(in);
      if (guidance.lambda != 0.0) {
        DenoiserInput un;
        un.theta = &state;
        un.steps = {t};
        eps = cfg_combine(eps, net.forward(un), guidance.lambda);
        uncond_evals[c] += static_cast<std::size_t>(m);
      }
      for (int j = 0; j < m; ++j)
        for (int i = 0; i < d; ++i) z(i, j) = t > 1 ? rng::normal(streams[j]) : 0.0;
      state = reverse_step(state, eps, t, s, z, opt.sigma);
      for (int j = 0; j < m; ++j) {
        if (ok[j] && !state.col(j).allFinite()) ok[j] = 0;
        if (!ok[j]) state.col(j).setZero();
      }
    }
    results[c] = std::move(state);
    alive[c] = std::move(ok);
  });

  std::size_t kept = 0;
  for (const auto& a : alive)
    for (char v : a) kept += v ? 1 : 0;
  out.theta.resize(d, static_cast<Eigen::Index>(kept));
  Eigen::Index col = 0;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    for (Eigen::Index j = 0; j < results[c].cols(); ++j)
      if (alive[c][j]) out.theta.col(col++) = results[c].col(j);
    out.unconditional_evaluations += uncond_evals[c];
  }
  out.excluded = n - kept;
  if (standardizer) out.theta = standardizer->theta_inverse(out.theta);
  return out;
}

}  // namespace condisim
