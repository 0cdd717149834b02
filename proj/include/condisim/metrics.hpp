#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/binomial.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "condisim/io.hpp"
#include "condisim/net.hpp"
#include "condisim/rng.hpp"
#include "condisim/sim/tasks.hpp"

namespace condisim::metrics {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// --------------------------------------------------------------------- C2ST

struct C2stOptions {
  int folds = 5;
  int width_factor = 10;
  double lr = 1e-3;
  int batch = 200;
  int max_epochs = 100;
  int patience = 10;
  double val_fraction = 0.1;
};

struct C2stResult {
  double score = 0.0;
  int n_folds = 0;
  std::vector<double> per_fold;
};

namespace detail {

/// in -> w -> w -> 1 classifier with SiLU hidden units and a logistic output.
struct Classifier {
  std::array<MatrixXd, 3> w;
  std::array<VectorXd, 3> b;

  Classifier(int in, int width, Rng& g) {
    const int dims[4] = {in, width, width, 1};
    for (int l = 0; l < 3; ++l) {
      const double a = std::sqrt(6.0 / (dims[l] + dims[l + 1]));
      w[l] = MatrixXd(dims[l + 1], dims[l]);
      for (Eigen::Index i = 0; i < w[l].size(); ++i) w[l].data()[i] = rng::uniform(g, -a, a);
      b[l] = VectorXd::Zero(dims[l + 1]);
    }
  }

  Eigen::RowVectorXd logits(const MatrixXd& x) const {
    const MatrixXd h1 = silu(MatrixXd((w[0] * x).colwise() + b[0]));
    const MatrixXd h2 = silu(MatrixXd((w[1] * h1).colwise() + b[1]));
    return ((w[2] * h2).colwise() + b[2]).row(0);
  }
};

inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double bce(const Eigen::RowVectorXd& z, const Eigen::RowVectorXd& y) {
  double s = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) s += softplus(z(i)) - y(i) * z(i);
  return s / static_cast<double>(z.size());
}

struct Adam {
  std::array<MatrixXd, 3> mw, vw;
  std::array<VectorXd, 3> mb, vb;
  long t = 0;
  explicit Adam(const Classifier& c) {
    for (int l = 0; l < 3; ++l) {
      mw[l] = vw[l] = MatrixXd::Zero(c.w[l].rows(), c.w[l].cols());
      mb[l] = vb[l] = VectorXd::Zero(c.b[l].size());
    }
  }
};

inline void train_step(Classifier& c, Adam& opt, const MatrixXd& x, const Eigen::RowVectorXd& y, double lr) {
  const MatrixXd a1 = (c.w[0] * x).colwise() + c.b[0];
  const MatrixXd h1 = silu(a1);
  const MatrixXd a2 = (c.w[1] * h1).colwise() + c.b[1];
  const MatrixXd h2 = silu(a2);
  const Eigen::RowVectorXd z = ((c.w[2] * h2).colwise() + c.b[2]).row(0);
  const double inv_b = 1.0 / static_cast<double>(x.cols());
  Eigen::RowVectorXd dz(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) dz(i) = (1.0 / (1.0 + std::exp(-z(i))) - y(i)) * inv_b;

  std::array<MatrixXd, 3> gw;
  std::array<VectorXd, 3> gb;
  gw[2] = dz * h2.transpose();
  gb[2] = VectorXd::Constant(1, dz.sum());
  const MatrixXd d2 = (c.w[2].transpose() * dz).cwiseProduct(silu_grad(a2));
  gw[1] = d2 * h1.transpose();
  gb[1] = d2.rowwise().sum();
  const MatrixXd d1 = (c.w[1].transpose() * d2).cwiseProduct(silu_grad(a1));
  gw[0] = d1 * x.transpose();
  gb[0] = d1.rowwise().sum();

  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++opt.t;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(opt.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(opt.t));
  for (int l = 0; l < 3; ++l) {
    opt.mw[l] = b1 * opt.mw[l] + (1 - b1) * gw[l];
    opt.vw[l] = b2 * opt.vw[l] + (1 - b2) * gw[l].cwiseAbs2();
    c.w[l].array() -= lr * (opt.mw[l].array() / c1) / ((opt.vw[l].array() / c2).sqrt() + eps);
    opt.mb[l] = b1 * opt.mb[l] + (1 - b1) * gb[l];
    opt.vb[l] = b2 * opt.vb[l] + (1 - b2) * gb[l].cwiseAbs2();
    c.b[l].array() -= lr * (opt.mb[l].array() / c1) / ((opt.vb[l].array() / c2).sqrt() + eps);
  }
}

inline MatrixXd gather(const MatrixXd& x, const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end) {
  MatrixXd out(x.rows(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i) out.col(static_cast<Eigen::Index>(i - begin)) = x.col(static_cast<Eigen::Index>(idx[i]));
  return out;
}

inline Eigen::RowVectorXd gather(const Eigen::RowVectorXd& y, const std::vector<std::size_t>& idx, std::size_t begin,
                                 std::size_t end) {
  Eigen::RowVectorXd out(static_cast<Eigen::Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i) out(static_cast<Eigen::Index>(i - begin)) = y(static_cast<Eigen::Index>(idx[i]));
  return out;
}

}  // namespace detail

/// Classifier two-sample test. Samples are columns; returns mean held-out accuracy.
inline C2stResult c2st(const MatrixXd& p, const MatrixXd& q, std::uint64_t seed, const C2stOptions& opt = {}) {
  if (p.rows() != q.rows()) throw std::invalid_argument("c2st: dimension mismatch");
  if (p.cols() < 10 || q.cols() < 10) throw std::invalid_argument("c2st: need at least 10 samples per class");
  if (opt.folds < 2) throw std::invalid_argument("c2st: need at least 2 folds");
  const Eigen::Index d = p.rows(), n = p.cols() + q.cols();
  MatrixXd x(d, n);
  x << p, q;
  Eigen::RowVectorXd y(n);
  y << Eigen::RowVectorXd::Zero(p.cols()), Eigen::RowVectorXd::Ones(q.cols());
  const VectorXd mean = x.rowwise().mean();
  x.colwise() -= mean;
  const VectorXd sd = (x.cwiseAbs2().rowwise().sum() / static_cast<double>(n)).cwiseSqrt().cwiseMax(1e-12);
  x = sd.cwiseInverse().asDiagonal() * x;

  std::vector<std::size_t> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng shuffle_rng = rng::stream(seed, 0, rng::kMetric);
  std::shuffle(perm.begin(), perm.end(), shuffle_rng);

  C2stResult res;
  res.n_folds = opt.folds;
  res.per_fold.assign(static_cast<std::size_t>(opt.folds), 0.0);
  const std::size_t N = static_cast<std::size_t>(n);
  parallel_for(static_cast<std::size_t>(opt.folds), [&](std::size_t f) {
    const std::size_t t0 = N * f / opt.folds, t1 = N * (f + 1) / opt.folds;
    std::vector<std::size_t> train;
    train.reserve(N - (t1 - t0));
    for (std::size_t i = 0; i < N; ++i)
      if (i < t0 || i >= t1) train.push_back(perm[i]);
    Rng g = rng::stream(seed, 1 + f, rng::kMetric);
    std::shuffle(train.begin(), train.end(), g);
    const std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(opt.val_fraction * train.size()));
    const std::size_t n_fit = train.size() - n_val;
    const MatrixXd xv = detail::gather(x, train, n_fit, train.size());
    const Eigen::RowVectorXd yv = detail::gather(y, train, n_fit, train.size());

    detail::Classifier clf(static_cast<int>(d), opt.width_factor * static_cast<int>(d), g);
    detail::Adam adam(clf);
    detail::Classifier best = clf;
    double best_loss = detail::bce(clf.logits(xv), yv);
    int since = 0;
    std::vector<std::size_t> order(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(n_fit));
    for (int epoch = 0; epoch < opt.max_epochs && since < opt.patience; ++epoch) {
      std::shuffle(order.begin(), order.end(), g);
      for (std::size_t b = 0; b < n_fit; b += static_cast<std::size_t>(opt.batch)) {
        const std::size_t e = std::min(n_fit, b + static_cast<std::size_t>(opt.batch));
        detail::train_step(clf, adam, detail::gather(x, order, b, e), detail::gather(y, order, b, e), opt.lr);
      }
      const double loss = detail::bce(clf.logits(xv), yv);
      if (loss < best_loss) {
        best_loss = loss;
        best = clf;
        since = 0;
      } else {
        ++since;
      }
    }
    const MatrixXd xt = detail::gather(x, perm, t0, t1);
    const Eigen::RowVectorXd yt = detail::gather(y, perm, t0, t1);
    const Eigen::RowVectorXd z = best.logits(xt);
    double correct = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) correct += (z(i) > 0.0) == (yt(i) > 0.5);
    res.per_fold[f] = correct / static_cast<double>(z.size());
  });
  res.score = std::accumulate(res.per_fold.begin(), res.per_fold.end(), 0.0) / opt.folds;
  return res;
}

// ---------------------------------------------------------------------- MMD

enum class MmdEstimator { unbiased_u, biased_v };

struct MmdResult {
  double value = 0.0;
  double kernel_bandwidth = 0.0;
  MmdEstimator estimator = MmdEstimator::unbiased_u;
};

inline constexpr double kBandwidthFloor = 1e-8;

/// Median pairwise distance over an evenly strided subsample (<= max_points) of the pooled set.
inline double median_bandwidth(const MatrixXd& p, const MatrixXd& q, std::size_t max_points = 1000) {
  const std::size_t n = static_cast<std::size_t>(p.cols() + q.cols());
  const std::size_t m = std::min(n, max_points);
  MatrixXd s(p.rows(), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t k = i * n / m;
    s.col(static_cast<Eigen::Index>(i)) =
        k < static_cast<std::size_t>(p.cols()) ? p.col(static_cast<Eigen::Index>(k)) : q.col(static_cast<Eigen::Index>(k - p.cols()));
  }
  std::vector<double> dist;
  dist.reserve(m * (m - 1) / 2);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      dist.push_back((s.col(static_cast<Eigen::Index>(i)) - s.col(static_cast<Eigen::Index>(j))).norm());
  if (dist.empty()) return kBandwidthFloor;
  auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  return std::max(*mid, kBandwidthFloor);
}

namespace detail {

/// Sum of k(x_i, y_j) over all pairs, optionally skipping i == j. Fixed
/// block order keeps the result independent of the thread count.
inline double kernel_sum(const MatrixXd& x, const MatrixXd& y, double h, bool skip_diagonal) {
  constexpr Eigen::Index kBlock = 256;
  const Eigen::Index nb = (x.cols() + kBlock - 1) / kBlock;
  const Eigen::RowVectorXd yn = y.colwise().squaredNorm();
  const double scale = -1.0 / (2.0 * h * h);
  std::vector<double> partial(static_cast<std::size_t>(nb), 0.0);
  parallel_for(static_cast<std::size_t>(nb), [&](std::size_t b) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(b) * kBlock, c = std::min(kBlock, x.cols() - c0);
    const auto xb = x.middleCols(c0, c);
    MatrixXd d2 = -2.0 * xb.transpose() * y;
    d2.colwise() += xb.colwise().squaredNorm().transpose();
    d2.rowwise() += yn;
    double s = 0;
    for (Eigen::Index j = 0; j < d2.cols(); ++j)
      for (Eigen::Index i = 0; i < c; ++i) {
        if (skip_diagonal && c0 + i == j) continue;
        s += std::exp(std::max(d2(i, j), 0.0) * scale);
      }
    partial[b] = s;
  });
  return std::accumulate(partial.begin(), partial.end(), 0.0);
}

}  // namespace detail

/// Gaussian-RBF MMD^2, k(x,y) = exp(-|x-y|^2 / (2 h^2)).
inline MmdResult mmd(const MatrixXd& p, const MatrixXd& q, std::optional<double> bandwidth = std::nullopt,
                     MmdEstimator estimator = MmdEstimator::unbiased_u) {
  if (p.rows() != q.rows()) throw std::invalid_argument("mmd: dimension mismatch");
  const double n = static_cast<double>(p.cols()), m = static_cast<double>(q.cols());
  const bool u = estimator == MmdEstimator::unbiased_u;
  if (u ? (n < 2 || m < 2) : (n < 1 || m < 1)) throw std::invalid_argument("mmd: too few samples");
  MmdResult r;
  r.estimator = estimator;
  r.kernel_bandwidth = bandwidth ? std::max(*bandwidth, kBandwidthFloor) : median_bandwidth(p, q);
  if (!(r.kernel_bandwidth > 0)) throw std::invalid_argument("mmd: bandwidth must be positive");
  const double h = r.kernel_bandwidth;
  const double kxx = detail::kernel_sum(p, p, h, u), kyy = detail::kernel_sum(q, q, h, u);
  const double kxy = detail::kernel_sum(p, q, h, false);
  r.value = u ? kxx / (n * (n - 1)) + kyy / (m * (m - 1)) - 2 * kxy / (n * m)
              : kxx / (n * n) + kyy / (m * m) - 2 * kxy / (n * m);
  return r;
}

// ------------------------------------------------------------ KS uniformity

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Asymptotic Kolmogorov tail probability with the Stephens small-sample correction.
inline double kolmogorov_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 1e-3) return 1.0;
  double sum = 0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

/// One-sample KS test against U(0,1).
inline KsResult ks_uniform(std::vector<double> x) {
  if (x.empty()) throw std::invalid_argument("ks_uniform: empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = std::clamp(x[i], 0.0, 1.0);
    d = std::max({d, (i + 1) / n - u, u - i / n});
  }
  return {d, kolmogorov_pvalue(d, x.size())};
}

// ---------------------------------------------------------------------- SBC

struct RankStatistics {
  int M = 0;  // observations kept
  int L = 0;  // requested posterior draws per observation
  MatrixXd ranks;  // M x theta_dim, in [0,1]
  int skipped = 0;
};

/// Fractional rank of `truth` among `draws` (one value per draw); ties get
/// Uniform(0,1) jitter.
inline double fractional_rank(double truth, const Eigen::RowVectorXd& draws, double u) {
  double less = 0, equal = 0;
  for (Eigen::Index i = 0; i < draws.size(); ++i) {
    less += draws(i) < truth;
    equal += draws(i) == truth;
  }
  return (less + u * equal) / static_cast<double>(draws.size());
}

/// (y, L, seed) -> theta_dim x L' posterior draws, L' <= L after exclusions.
using PosteriorSampler = std::function<MatrixXd(const VectorXd& y, std::size_t L, std::uint64_t seed)>;

inline RankStatistics sbc_ranks(const sim::TaskDefinition& task, const PosteriorSampler& posterior, int M, int L,
                                std::uint64_t seed) {
  if (M < 0 || L <= 0) throw std::invalid_argument("sbc_ranks: need M >= 0 and L > 0");
  const int d = task.theta_dim;
  MatrixXd all(M, d);
  std::vector<char> keep(static_cast<std::size_t>(M), 0);
  parallel_for(static_cast<std::size_t>(M), [&](std::size_t m) {
    Rng g = rng::stream(seed, m, rng::kSbc);
    VectorXd theta, y;
    for (int attempt = 0; attempt <= 10; ++attempt) {
      theta = task.prior(g);
      try {
        y = task.simulate(theta, g);
        break;
      } catch (const sim::SimulationError&) {
        y.resize(0);
      }
    }
    if (y.size() == 0) return;
    const MatrixXd draws = posterior(y, static_cast<std::size_t>(L), rng::stream_seed(seed, m, rng::kChain));
    if (2 * draws.cols() < L) return;
    for (int i = 0; i < d; ++i)
      all(static_cast<Eigen::Index>(m), i) = fractional_rank(theta(i), draws.row(i), rng::uniform(g));
    keep[m] = 1;
  });
  RankStatistics r;
  r.L = L;
  r.M = static_cast<int>(std::count(keep.begin(), keep.end(), 1));
  r.skipped = M - r.M;
  r.ranks.resize(r.M, d);
  for (int m = 0, k = 0; m < M; ++m)
    if (keep[static_cast<std::size_t>(m)]) r.ranks.row(k++) = all.row(m);
  return r;
}

// ---------------------------------------------------------------- ECDF band

/// Simultaneous acceptance band for the ECDF of M uniform ranks, evaluated on
/// grid z_k = k/K (k = 1..K-1). Bounds are counts: an ECDF passes at z_k if
/// lower[k] <= M F(z_k) <= upper[k].
struct EcdfBand {
  int M = 0;
  double coverage = 0.9;
  double gamma = 0.0;  // adjusted pointwise level
  VectorXd z;
  Eigen::VectorXi lower, upper;

  bool contains(const std::vector<double>& ranks) const {
    std::vector<double> s = ranks;
    std::sort(s.begin(), s.end());
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      const auto c = static_cast<int>(std::upper_bound(s.begin(), s.end(), z(k)) - s.begin());
      if (c < lower(k) || c > upper(k)) return false;
    }
    return true;
  }
};

inline EcdfBand simultaneous_band(int M, double coverage = 0.9, std::uint64_t seed = 0, int replicates = 10000,
                                  int K = 0) {
  if (M < 50) throw std::invalid_argument("ecdf band needs M >= 50, got " + std::to_string(M));
  if (!(coverage > 0 && coverage < 1)) throw std::invalid_argument("ecdf band coverage must lie in (0,1)");
  if (K <= 0) K = std::min(M, 100);
  EcdfBand band;
  band.M = M;
  band.coverage = coverage;
  band.z.resize(K - 1);
  for (int k = 1; k < K; ++k) band.z(k - 1) = static_cast<double>(k) / K;
  const Eigen::Index nz = band.z.size();

  // cdf(k, c) = P(Bin(M, z_k) <= c)
  MatrixXd cdf(nz, M + 1);
  for (Eigen::Index k = 0; k < nz; ++k) {
    const boost::math::binomial_distribution<double> bin(M, band.z(k));
    for (int c = 0; c <= M; ++c) cdf(k, c) = boost::math::cdf(bin, c);
  }
  auto level = [&](Eigen::Index k, int c) {
    const double below = cdf(k, c);
    const double above = 1.0 - (c > 0 ? cdf(k, c - 1) : 0.0);
    return 2.0 * std::min(below, above);
  };

  std::vector<double> gammas(static_cast<std::size_t>(replicates));
  parallel_for(static_cast<std::size_t>(replicates), [&](std::size_t r) {
    Rng g = rng::stream(seed, r, rng::kMetric);
    std::vector<double> u(static_cast<std::size_t>(M));
    for (auto& x : u) x = rng::uniform(g);
    std::sort(u.begin(), u.end());
    double gmin = 1.0;
    for (Eigen::Index k = 0; k < nz; ++k) {
      const auto c = static_cast<int>(std::upper_bound(u.begin(), u.end(), band.z(k)) - u.begin());
      gmin = std::min(gmin, level(k, c));
    }
    gammas[r] = gmin;
  });
  std::sort(gammas.begin(), gammas.end());
  band.gamma = gammas[static_cast<std::size_t>((1.0 - coverage) * replicates)];

  band.lower.resize(nz);
  band.upper.resize(nz);
  for (Eigen::Index k = 0; k < nz; ++k) {
    // level(k, .) is unimodal in the count
    int lo = 0;
    while (lo < M && level(k, lo) < band.gamma) ++lo;
    int hi = M;
    while (hi > lo && level(k, hi) < band.gamma) --hi;
    band.lower(k) = lo;
    band.upper(k) = hi;
  }
  return band;
}

/// ECDF minus identity and band, one curve per parameter dimension.
struct EcdfCurve {
  VectorXd u, diff, band_lo, band_hi;
  bool inside = true;
};

struct EcdfResult {
  EcdfBand band;
  std::vector<EcdfCurve> curves;
};

inline EcdfResult ecdf_band(const RankStatistics& ranks, double coverage = 0.9, std::uint64_t seed = 0,
                            int replicates = 10000) {
  EcdfResult res;
  res.band = simultaneous_band(ranks.M, coverage, seed, replicates);
  const auto& z = res.band.z;
  const double M = ranks.M;
  for (Eigen::Index i = 0; i < ranks.ranks.cols(); ++i) {
    std::vector<double> col(ranks.ranks.col(i).data(), ranks.ranks.col(i).data() + ranks.ranks.rows());
    std::sort(col.begin(), col.end());
    EcdfCurve c;
    c.u = z;
    c.diff.resize(z.size());
    c.band_lo.resize(z.size());
    c.band_hi.resize(z.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      const auto cnt = static_cast<double>(std::upper_bound(col.begin(), col.end(), z(k)) - col.begin());
      c.diff(k) = cnt / M - z(k);
      c.band_lo(k) = res.band.lower(k) / M - z(k);
      c.band_hi(k) = res.band.upper(k) / M - z(k);
      if (cnt < res.band.lower(k) || cnt > res.band.upper(k)) c.inside = false;
    }
    res.curves.push_back(std::move(c));
  }
  return res;
}

inline void write_ecdf_csv(const std::filesystem::path& path, const EcdfCurve& c) {
  MatrixXd rows(c.u.size(), 4);
  rows << c.u, c.diff, c.band_lo, c.band_hi;
  io::write_csv(path, {"u", "ecdf_diff", "band_lo", "band_hi"}, rows);
}

/// Static line plot of one ECDF-difference curve with its band.
inline void write_ecdf_svg(const std::filesystem::path& path, const EcdfCurve& c, const std::string& title) {
  constexpr double W = 420, H = 300, pad = 40;
  double ymax = 0.05;
  for (Eigen::Index k = 0; k < c.u.size(); ++k)
    ymax = std::max({ymax, std::abs(c.diff(k)), std::abs(c.band_lo(k)), std::abs(c.band_hi(k))});
  ymax *= 1.1;
  auto px = [&](double u) { return pad + u * (W - 2 * pad); };
  auto py = [&](double v) { return H / 2 - v / ymax * (H / 2 - pad); };
  auto poly = [&](const VectorXd& v) {
    std::ostringstream s;
    for (Eigen::Index k = 0; k < v.size(); ++k) s << px(c.u(k)) << ',' << py(v(k)) << ' ';
    return s.str();
  };
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::ostringstream band;
  for (Eigen::Index k = 0; k < c.u.size(); ++k) band << px(c.u(k)) << ',' << py(c.band_hi(k)) << ' ';
  for (Eigen::Index k = c.u.size() - 1; k >= 0; --k) band << px(c.u(k)) << ',' << py(c.band_lo(k)) << ' ';
  out << "<polygon points=\"" << band.str() << "\" fill=\"#cccccc\"/>\n";
  out << "<line x1=\"" << pad << "\" y1=\"" << H / 2 << "\" x2=\"" << W - pad << "\" y2=\"" << H / 2
      << "\" stroke=\"black\" stroke-width=\"0.5\"/>\n";
  out << "<polyline points=\"" << poly(c.diff) << "\" fill=\"none\" stroke=\"#1f4fbf\" stroke-width=\"1.5\"/>\n";
  out << "<text x=\"" << pad << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">" << title << "</text>\n";
  out << "</svg>\n";
}

}  // namespace condisim::metrics
