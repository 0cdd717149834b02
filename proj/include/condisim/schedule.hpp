#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace condisim {

enum class ScheduleKind { linear, scaled_linear, quadratic, scaled_quadratic, cosine };

/// Which reverse-process noise scale to use: sqrt(beta_t) or the
/// forward-posterior standard deviation sqrt(beta_t (1-abar_{t-1})/(1-abar_t)).
enum class SigmaKind { beta, posterior };

inline std::string_view to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::linear: return "linear";
    case ScheduleKind::scaled_linear: return "scaled_linear";
    case ScheduleKind::quadratic: return "quadratic";
    case ScheduleKind::scaled_quadratic: return "scaled_quadratic";
    case ScheduleKind::cosine: return "cosine";
  }
  return "?";
}

inline ScheduleKind parse_schedule_kind(std::string_view s) {
  for (auto k : {ScheduleKind::linear, ScheduleKind::scaled_linear, ScheduleKind::quadratic,
                 ScheduleKind::scaled_quadratic, ScheduleKind::cosine})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown schedule kind '" + std::string(s) + "'");
}

inline std::string_view to_string(SigmaKind k) { return k == SigmaKind::beta ? "beta" : "posterior"; }

inline SigmaKind parse_sigma_kind(std::string_view s) {
  if (s == "beta") return SigmaKind::beta;
  if (s == "posterior") return SigmaKind::posterior;
  throw std::invalid_argument("unknown sigma kind '" + std::string(s) + "'");
}

/// Discrete-time variance schedule. Steps are 1..T in the public API;
/// alpha_bar(0) is defined as exactly 1.
class NoiseSchedule {
 public:
  static constexpr double kBetaStart = 1e-4;
  static constexpr double kBetaEnd = 0.02;
  static constexpr double kCosineOffset = 0.008;
  static constexpr double kMaxBeta = 0.999;
  static constexpr double kAlphaBarClamp = 1e-9;

  NoiseSchedule(ScheduleKind kind, int steps) : kind_(kind), steps_(steps) {
    if (steps < 2) throw std::invalid_argument("schedule needs T >= 2, got " + std::to_string(steps));
    beta_.resize(steps);
    const double scale = (kind == ScheduleKind::scaled_linear || kind == ScheduleKind::scaled_quadratic)
                             ? 1000.0 / steps
                             : 1.0;
    const double b0 = kBetaStart * scale;
    const double b1 = kBetaEnd * scale;
    switch (kind) {
      case ScheduleKind::linear:
      case ScheduleKind::scaled_linear:
        for (int i = 0; i < steps; ++i) beta_[i] = b0 + (b1 - b0) * i / (steps - 1);
        break;
      case ScheduleKind::quadratic:
      case ScheduleKind::scaled_quadratic: {
        const double r0 = std::sqrt(b0), r1 = std::sqrt(b1);
        for (int i = 0; i < steps; ++i) {
          const double r = r0 + (r1 - r0) * i / (steps - 1);
          beta_[i] = r * r;
        }
        break;
      }
      case ScheduleKind::cosine: {
        auto f = [&](double t) {
          const double c = std::cos((t / steps + kCosineOffset) / (1.0 + kCosineOffset) * std::numbers::pi / 2);
          return c * c;
        };
        const double f0 = f(0.0);
        double prev = 1.0;
        for (int i = 0; i < steps; ++i) {
          const double cur = f(i + 1.0) / f0;
          beta_[i] = std::min(1.0 - cur / prev, kMaxBeta);
          prev = cur;
        }
        break;
      }
    }
    finish();
  }

  /// Schedule from explicit noise rates; kind() then reports `kind` only as a label.
  static NoiseSchedule from_betas(std::vector<double> betas, ScheduleKind label = ScheduleKind::linear) {
    if (betas.size() < 2) throw std::invalid_argument("schedule needs T >= 2");
    NoiseSchedule s;
    s.kind_ = label;
    s.steps_ = static_cast<int>(betas.size());
    s.beta_ = std::move(betas);
    s.finish();
    return s;
  }

  ScheduleKind kind() const { return kind_; }
  int steps() const { return steps_; }

  const std::vector<double>& betas() const { return beta_; }
  const std::vector<double>& alpha_bars() const { return alpha_bar_; }

  double beta(int t) const { return beta_[index(t)]; }
  double alpha(int t) const { return 1.0 - beta_[index(t)]; }
  double alpha_bar(int t) const {
    if (t == 0) return 1.0;
    return alpha_bar_[index(t)];
  }
  double sigma(int t) const { return sigma_[index(t)]; }

  /// Reverse-process noise scale for the chosen variant.
  double sigma(int t, SigmaKind kind) const {
    if (kind == SigmaKind::beta) return sigma(t);
    return std::sqrt(beta(t) * (1.0 - alpha_bar(t - 1)) / (1.0 - alpha_bar(t)));
  }

  double snr(int t) const {
    const double ab = std::clamp(alpha_bar(t), kAlphaBarClamp, 1.0 - kAlphaBarClamp);
    return ab / (1.0 - ab);
  }

  /// min(SNR_t, gamma) / SNR_t.
  double loss_weight(int t, double gamma) const { return snr_loss_weight(snr(t), gamma); }

  static double snr_loss_weight(double snr, double gamma) { return std::min(snr, gamma) / snr; }

 private:
  NoiseSchedule() = default;

  void finish() {
    alpha_bar_.resize(steps_);
    sigma_.resize(steps_);
    double prod = 1.0;
    for (int i = 0; i < steps_; ++i) {
      if (!(beta_[i] > 0.0 && beta_[i] < 1.0))
        throw std::invalid_argument("schedule " + std::string(to_string(kind_)) + " with T=" +
                                    std::to_string(steps_) + " yields beta outside (0,1)");
      prod *= 1.0 - beta_[i];
      alpha_bar_[i] = prod;
      sigma_[i] = std::sqrt(beta_[i]);
    }
  }

  std::size_t index(int t) const {
    if (t < 1 || t > steps_)
      throw std::out_of_range("diffusion step " + std::to_string(t) + " outside 1.." + std::to_string(steps_));
    return static_cast<std::size_t>(t - 1);
  }

  ScheduleKind kind_ = ScheduleKind::linear;
  int steps_ = 0;
  std::vector<double> beta_;
  std::vector<double> alpha_bar_;
  std::vector<double> sigma_;
};

}  // namespace condisim
