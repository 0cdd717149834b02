#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "condisim/rng.hpp"

namespace condisim {

// Batches are column-major: one column per element.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

inline double silu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

inline Matrix silu(const Matrix& x) { return x.unaryExpr([](double v) { return silu(v); }); }
inline Matrix silu_grad(const Matrix& x) { return x.unaryExpr([](double v) { return silu_grad(v); }); }

/// gamma * h + beta, elementwise.
inline Vector film_modulate(const Vector& h, const Vector& gamma, const Vector& beta) {
  if (h.size() != gamma.size() || h.size() != beta.size())
    throw std::invalid_argument("film_modulate: shape mismatch");
  return gamma.cwiseProduct(h) + beta;
}

/// Sinusoidal embedding laid out as (sin t w_0, cos t w_0, sin t w_1, ...)
/// with w_k = 10000^(-2k/dim).
inline Vector timestep_embed(int t, int dim, int /*steps*/ = 0) {
  if (dim <= 0 || dim % 2 != 0) throw std::invalid_argument("timestep_embed: dim must be even and positive");
  Vector e(dim);
  for (int k = 0; k < dim / 2; ++k) {
    const double w = std::pow(10000.0, -2.0 * k / dim);
    e(2 * k) = std::sin(t * w);
    e(2 * k + 1) = std::cos(t * w);
  }
  return e;
}

struct Dense {
  Matrix w;
  Vector b;

  Dense() = default;
  Dense(int in, int out) : w(Matrix::Zero(out, in)), b(Vector::Zero(out)) {}

  Matrix apply(const Matrix& x) const { return (w * x).colwise() + b; }
};

struct DenoiserShape {
  int theta_dim = 0;
  int cond_dim = 0;
  int hidden = 64;
  int blocks = 4;

  bool operator==(const DenoiserShape&) const = default;
};

/// All trainable tensors of the denoiser. Also used for gradients and Adam
/// moments, which share the layout.
struct DenoiserParams {
  Dense input;                  // theta -> hidden
  std::vector<Dense> block_in;  // hidden -> hidden, FiLM applied to its output
  std::vector<Dense> block_out; // hidden -> hidden, added to the residual stream
  Dense cond1, cond2;           // f_y: cond -> hidden -> hidden
  Dense time1, time2;           // f_t: sinusoid(hidden) -> hidden -> hidden
  Dense film1, film2;           // context(2 hidden) -> hidden -> 2 hidden blocks
  Dense head;                   // hidden -> theta
  Vector null_cond;             // replaces f_y(y) for unconditional evaluations

  DenoiserParams() = default;
  explicit DenoiserParams(const DenoiserShape& s)
      : input(s.theta_dim, s.hidden),
        cond1(s.cond_dim, s.hidden),
        cond2(s.hidden, s.hidden),
        time1(s.hidden, s.hidden),
        time2(s.hidden, s.hidden),
        film1(2 * s.hidden, s.hidden),
        film2(s.hidden, 2 * s.hidden * s.blocks),
        head(s.hidden, s.theta_dim),
        null_cond(Vector::Zero(s.hidden)) {
    for (int l = 0; l < s.blocks; ++l) {
      block_in.emplace_back(s.hidden, s.hidden);
      block_out.emplace_back(s.hidden, s.hidden);
    }
  }

  void set_zero() {
    visit([](const std::string&, auto& t) { t.setZero(); }, *this);
  }

  /// Calls f(name, tensor_of_each_argument...) for every tensor, in a fixed order.
  template <class F, class... Ps>
  static void visit(F&& f, Ps&... ps) {
    auto dense = [&](const std::string& name, auto&... d) {
      f(name + ".w", d.w...);
      f(name + ".b", d.b...);
    };
    dense("input", ps.input...);
    const auto blocks = std::get<0>(std::tie(ps...)).block_in.size();
    for (std::size_t l = 0; l < blocks; ++l) {
      dense("block" + std::to_string(l) + ".in", ps.block_in[l]...);
      dense("block" + std::to_string(l) + ".out", ps.block_out[l]...);
    }
    dense("cond1", ps.cond1...);
    dense("cond2", ps.cond2...);
    dense("time1", ps.time1...);
    dense("time2", ps.time2...);
    dense("film1", ps.film1...);
    dense("film2", ps.film2...);
    dense("head", ps.head...);
    f(std::string("null_cond"), ps.null_cond...);
  }

  std::size_t size() const {
    std::size_t n = 0;
    visit([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); }, *this);
    return n;
  }
};

/// Everything backward() needs from a forward pass.
struct ForwardCache {
  int batch = 0;
  int context_cols = 0;
  Matrix theta;
  std::vector<Matrix> stream;  // residual stream entering each block, plus the final one
  std::vector<Matrix> pre_film, pre_act;
  Matrix film_out;             // raw (gamma-1, beta) per block, one column per context column
  Matrix context, film_hidden_pre;
  // condition encoder, over the distinct condition columns
  Matrix cond_in, cond_hidden_pre;
  int cond_cols = 0;
  std::vector<char> uncond;    // per context column
  // timestep encoder
  Matrix time_in, time_hidden_pre;
  std::uint64_t params_version = 0;
  // instrumentation
  std::size_t conditioned_columns = 0;
  std::size_t null_columns = 0;
};

/// Inputs to one batched evaluation of the denoiser.
///  - theta: theta_dim x B noisy parameters
///  - cond: cond_dim x B or cond_dim x 1 (shared), or nullptr for all-null
///  - steps: B entries or 1 (shared)
///  - uncond: optional per-context-column flag forcing the null embedding
struct DenoiserInput {
  const Matrix* theta = nullptr;
  const Matrix* cond = nullptr;
  std::vector<int> steps;
  std::vector<char> uncond;
};

class DenoiserNetwork {
 public:
  DenoiserNetwork() = default;

  DenoiserNetwork(const DenoiserShape& shape, std::uint64_t seed) : shape_(shape), params_(shape) {
    validate_shape();
    Rng g(rng::stream_seed(seed, 0, rng::kTrain));
    auto glorot = [&](Dense& d) {
      const double a = std::sqrt(6.0 / static_cast<double>(d.w.rows() + d.w.cols()));
      for (Eigen::Index j = 0; j < d.w.cols(); ++j)
        for (Eigen::Index i = 0; i < d.w.rows(); ++i) d.w(i, j) = rng::uniform(g, -a, a);
    };
    glorot(params_.input);
    for (auto& d : params_.block_in) glorot(d);
    for (auto& d : params_.block_out) glorot(d);
    glorot(params_.cond1);
    glorot(params_.cond2);
    glorot(params_.time1);
    glorot(params_.time2);
    glorot(params_.film1);
    glorot(params_.film2);
    // head and null embedding stay zero
  }

  DenoiserNetwork(const DenoiserShape& shape, DenoiserParams params)
      : shape_(shape), params_(std::move(params)) {
    validate_shape();
  }

  const DenoiserShape& shape() const { return shape_; }
  const DenoiserParams& params() const { return params_; }
  /// Mutable access invalidates outstanding caches.
  DenoiserParams& mutable_params() {
    ++version_;
    return params_;
  }
  std::uint64_t version() const { return version_; }

  Matrix forward(const DenoiserInput& in, ForwardCache* cache = nullptr) const {
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    const Matrix& theta = *in.theta;
    const int B = static_cast<int>(theta.cols());
    const int H = shape_.hidden;
    if (theta.rows() != shape_.theta_dim) throw std::invalid_argument("forward: theta dimension mismatch");
    if (!theta.allFinite()) throw std::invalid_argument("forward: non-finite theta");
    if (in.steps.empty()) throw std::invalid_argument("forward: no diffusion step given");
    const int cond_cols = in.cond ? static_cast<int>(in.cond->cols()) : 0;
    if (in.cond) {
      if (in.cond->rows() != shape_.cond_dim) throw std::invalid_argument("forward: condition dimension mismatch");
      if (cond_cols != 1 && cond_cols != B) throw std::invalid_argument("forward: condition batch mismatch");
    }
    const int step_cols = static_cast<int>(in.steps.size());
    if (step_cols != 1 && step_cols != B) throw std::invalid_argument("forward: step batch mismatch");
    const int ctx = std::max(step_cols, std::max(cond_cols, static_cast<int>(in.uncond.size())));
    if (ctx != 1 && ctx != B) throw std::invalid_argument("forward: context batch mismatch");

    c.batch = B;
    c.context_cols = ctx;
    c.theta = theta;
    c.params_version = version_;
    c.uncond.assign(ctx, in.cond ? 0 : 1);
    if (!in.uncond.empty()) {
      if (static_cast<int>(in.uncond.size()) != ctx) throw std::invalid_argument("forward: uncond mask size");
      for (int j = 0; j < ctx; ++j) c.uncond[j] = c.uncond[j] || in.uncond[j];
    }

    // condition embedding, evaluated only where some column needs it
    c.cond_cols = 0;
    c.conditioned_columns = 0;
    for (char u : c.uncond) c.conditioned_columns += u ? 0 : 1;
    c.null_columns = ctx - c.conditioned_columns;
    Matrix ey(H, ctx);
    if (c.conditioned_columns > 0) {
      if (!in.cond->allFinite()) throw std::invalid_argument("forward: non-finite condition");
      c.cond_cols = cond_cols;
      c.cond_in = *in.cond;
      c.cond_hidden_pre = params_.cond1.apply(c.cond_in);
      const Matrix e = params_.cond2.apply(silu(c.cond_hidden_pre));
      for (int j = 0; j < ctx; ++j) ey.col(j) = e.col(cond_cols == 1 ? 0 : j);
    }
    for (int j = 0; j < ctx; ++j)
      if (c.uncond[j]) ey.col(j) = params_.null_cond;

    c.time_in.resize(H, step_cols);
    for (int j = 0; j < step_cols; ++j) c.time_in.col(j) = timestep_embed(in.steps[j], H);
    c.time_hidden_pre = params_.time1.apply(c.time_in);
    const Matrix et = params_.time2.apply(silu(c.time_hidden_pre));

    c.context.resize(2 * H, ctx);
    c.context.topRows(H) = ey;
    for (int j = 0; j < ctx; ++j) c.context.bottomRows(H).col(j) = et.col(step_cols == 1 ? 0 : j);
    c.film_hidden_pre = params_.film1.apply(c.context);
    c.film_out = params_.film2.apply(silu(c.film_hidden_pre));

    const int L = shape_.blocks;
    c.stream.assign(L + 1, Matrix());
    c.pre_film.assign(L, Matrix());
    c.pre_act.assign(L, Matrix());
    c.stream[0] = params_.input.apply(theta);
    for (int l = 0; l < L; ++l) {
      const Matrix& h = c.stream[l];
      c.pre_film[l] = params_.block_in[l].apply(h);
      auto gamma = c.film_out.middleRows(2 * H * l, H);
      auto shift = c.film_out.middleRows(2 * H * l + H, H);
      if (ctx == 1) {
        const Vector g = gamma.col(0).array() + 1.0;
        c.pre_act[l] = (c.pre_film[l].array().colwise() * g.array()).colwise() + shift.col(0).array();
      } else {
        c.pre_act[l] = (c.pre_film[l].array() * (gamma.array() + 1.0) + shift.array()).matrix();
      }
      c.stream[l + 1] = h + params_.block_out[l].apply(silu(c.pre_act[l]));
    }
    return params_.head.apply(c.stream[L]);
  }

  /// Gradients of sum(d_out .* output) with respect to every parameter.
  DenoiserParams backward(const ForwardCache& c, const Matrix& d_out) const {
    if (c.params_version != version_ || static_cast<int>(c.stream.size()) != shape_.blocks + 1)
      throw std::logic_error("backward: stale forward cache");
    if (d_out.rows() != shape_.theta_dim || d_out.cols() != c.batch)
      throw std::invalid_argument("backward: gradient shape mismatch");
    const int H = shape_.hidden;
    const int L = shape_.blocks;
    const int ctx = c.context_cols;
    DenoiserParams g(shape_);

    auto dense_back = [](Dense& gd, const Dense& d, const Matrix& x, const Matrix& dy) {
      gd.w.noalias() += dy * x.transpose();
      gd.b += dy.rowwise().sum();
      return Matrix(d.w.transpose() * dy);
    };

    Matrix dh = dense_back(g.head, params_.head, c.stream[L], d_out);
    Matrix d_film = Matrix::Zero(2 * H * L, ctx);
    for (int l = L - 1; l >= 0; --l) {
      const Matrix act = silu(c.pre_act[l]);
      const Matrix d_act = dense_back(g.block_out[l], params_.block_out[l], act, dh);
      const Matrix d_pre = d_act.cwiseProduct(silu_grad(c.pre_act[l]));
      auto gamma = c.film_out.middleRows(2 * H * l, H);
      Matrix d_pre_film;
      if (ctx == 1) {
        const Vector gvec = gamma.col(0).array() + 1.0;
        d_pre_film = d_pre.array().colwise() * gvec.array();
        d_film.middleRows(2 * H * l, H) = d_pre.cwiseProduct(c.pre_film[l]).rowwise().sum();
        d_film.middleRows(2 * H * l + H, H) = d_pre.rowwise().sum();
      } else {
        d_pre_film = d_pre.array() * (gamma.array() + 1.0);
        d_film.middleRows(2 * H * l, H) = d_pre.cwiseProduct(c.pre_film[l]);
        d_film.middleRows(2 * H * l + H, H) = d_pre;
      }
      dh += dense_back(g.block_in[l], params_.block_in[l], c.stream[l], d_pre_film);
    }
    dense_back(g.input, params_.input, c.theta, dh);

    const Matrix d_film_hidden =
        dense_back(g.film2, params_.film2, silu(c.film_hidden_pre), d_film).cwiseProduct(silu_grad(c.film_hidden_pre));
    const Matrix d_context = dense_back(g.film1, params_.film1, c.context, d_film_hidden);

    // timestep encoder
    const int step_cols = static_cast<int>(c.time_in.cols());
    Matrix d_et(H, step_cols);
    if (step_cols == 1)
      d_et = d_context.bottomRows(H).rowwise().sum();
    else
      d_et = d_context.bottomRows(H);
    const Matrix d_time_hidden =
        dense_back(g.time2, params_.time2, silu(c.time_hidden_pre), d_et).cwiseProduct(silu_grad(c.time_hidden_pre));
    dense_back(g.time1, params_.time1, c.time_in, d_time_hidden);

    // condition encoder and null embedding
    Matrix d_ey = Matrix::Zero(H, std::max(c.cond_cols, 1));
    for (int j = 0; j < ctx; ++j) {
      if (c.uncond[j])
        g.null_cond += d_context.topRows(H).col(j);
      else
        d_ey.col(c.cond_cols == 1 ? 0 : j) += d_context.topRows(H).col(j);
    }
    if (c.conditioned_columns > 0) {
      const Matrix d_cond_hidden = dense_back(g.cond2, params_.cond2, silu(c.cond_hidden_pre), d_ey)
                                       .cwiseProduct(silu_grad(c.cond_hidden_pre));
      dense_back(g.cond1, params_.cond1, c.cond_in, d_cond_hidden);
    }
    return g;
  }

 private:
  void validate_shape() const {
    if (shape_.theta_dim <= 0 || shape_.cond_dim <= 0 || shape_.blocks <= 0)
      throw std::invalid_argument("denoiser: dimensions must be positive");
    if (shape_.hidden <= 0 || shape_.hidden % 2 != 0)
      throw std::invalid_argument("denoiser: hidden width must be even and positive");
  }

  DenoiserShape shape_;
  DenoiserParams params_;
  std::uint64_t version_ = 0;
};

/// Warmup from 0.2 eta to eta (quadratic, first 10% of steps), cosine decay
/// to `floor` until 95% of steps, then constant at `floor`.
inline double lr_at(long step, long total_steps, double eta, double floor = 1e-6) {
  const double total = static_cast<double>(total_steps);
  const double warm = 0.10 * total;
  const double decay_end = 0.95 * total;
  const double s = static_cast<double>(step);
  if (s < warm) {
    const double u = s / warm;
    return 0.2 * eta + 0.8 * eta * u * u;
  }
  if (s < decay_end) {
    const double p = (s - warm) / (decay_end - warm);
    return floor + (eta - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * p));
  }
  return floor;
}

struct AdamWConfig {
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  long step_count = 0;
  AdamWConfig config;
  DenoiserParams first_moment;
  DenoiserParams second_moment;

  OptimizerState() = default;
  OptimizerState(const DenoiserShape& shape, AdamWConfig cfg)
      : config(cfg), first_moment(shape), second_moment(shape) {}
};

inline double global_norm(const DenoiserParams& g) {
  double sq = 0.0;
  DenoiserParams::visit([&](const std::string&, const auto& t) { sq += t.squaredNorm(); }, g);
  return std::sqrt(sq);
}

/// One AdamW update with global-norm clipping and decoupled weight decay.
/// Returns false, leaving everything untouched, when the gradient is not finite.
inline bool adamw_apply(OptimizerState& state, DenoiserNetwork& net, const DenoiserParams& grads,
                        double lr_now, double clip_norm) {
  if (!(lr_now > 0.0)) throw std::invalid_argument("adamw_apply: learning rate must be positive");
  const double norm = global_norm(grads);
  if (!std::isfinite(norm)) return false;
  const double scale = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;
  const auto& cfg = state.config;
  state.step_count += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step_count));
  DenoiserParams::visit(
      [&](const std::string&, auto& w, const auto& g, auto& m, auto& v) {
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * scale * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * (scale * g).cwiseAbs2();
        w *= 1.0 - lr_now * cfg.weight_decay;
        w.array() -= lr_now * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
      },
      net.mutable_params(), grads, state.first_moment, state.second_moment);
  return true;
}

}  // namespace condisim
