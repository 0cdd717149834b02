#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "condisim/config.hpp"
#include "condisim/diffusion.hpp"
#include "condisim/io.hpp"
#include "condisim/metrics.hpp"
#include "condisim/net.hpp"
#include "condisim/schedule.hpp"
#include "condisim/sim/tasks.hpp"
#include "condisim/standardizer.hpp"

namespace condisim {

// ------------------------------------------------------------------ dataset

struct Dataset {
  std::string task;
  std::uint64_t seed = 0;
  std::string simulator_version;
  Matrix theta;  // theta_dim x N
  Matrix y;      // y_dim x N
  int resampled = 0;
  std::vector<std::string> failures;  // one line per failed simulation
};

inline constexpr int kMaxResamples = 10;

/// N prior/simulator pairs. Element i uses its own stream, so the result does
/// not depend on the thread count. A failed simulation is logged and the pair
/// is redrawn, up to 10 times per element.
inline Dataset generate_dataset(const sim::TaskDefinition& task, int n, std::uint64_t seed) {
  if (n < 0) throw std::invalid_argument("generate_dataset: N must be >= 0");
  Dataset ds;
  ds.task = task.name;
  ds.seed = seed;
  ds.simulator_version = task.version;
  ds.theta.resize(task.theta_dim, n);
  ds.y.resize(task.y_dim, n);
  std::vector<int> retries(static_cast<std::size_t>(n), 0);
  std::vector<std::string> errors(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    Rng g = rng::stream(seed, i, rng::kSimulate);
    for (int attempt = 0;; ++attempt) {
      const Vector th = task.prior(g);
      try {
        ds.y.col(static_cast<Eigen::Index>(i)) = task.simulate(th, g);
        ds.theta.col(static_cast<Eigen::Index>(i)) = th;
        return;
      } catch (const sim::SimulationError& e) {
        std::ostringstream msg;
        msg << "element " << i << " theta=(";
        for (Eigen::Index k = 0; k < th.size(); ++k) msg << (k ? "," : "") << io::format_double(th(k));
        msg << "): " << e.what();
        errors[i] += msg.str() + "\n";
        retries[i] = attempt + 1;
        if (attempt + 1 >= kMaxResamples)
          throw std::runtime_error("generate_dataset: simulation failed " + std::to_string(kMaxResamples) +
                                   " times in a row; last " + msg.str());
      }
    }
  });
  ds.resampled = std::accumulate(retries.begin(), retries.end(), 0);
  for (const auto& e : errors)
    if (!e.empty()) {
      std::istringstream lines(e);
      for (std::string l; std::getline(lines, l);) ds.failures.push_back(l);
    }
  return ds;
}

inline std::vector<std::string> dataset_header(int theta_dim, int y_dim) {
  std::vector<std::string> h;
  for (int i = 0; i < theta_dim; ++i) h.push_back("theta_" + std::to_string(i));
  for (int i = 0; i < y_dim; ++i) h.push_back("y_" + std::to_string(i));
  return h;
}

inline std::filesystem::path meta_path(const std::filesystem::path& csv) {
  return std::filesystem::path(csv.string() + ".meta");
}

inline void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  Matrix rows(ds.theta.cols(), ds.theta.rows() + ds.y.rows());
  rows << ds.theta.transpose(), ds.y.transpose();
  io::write_csv(path, dataset_header(static_cast<int>(ds.theta.rows()), static_cast<int>(ds.y.rows())), rows);
  io::write_report(meta_path(path), {{"task", ds.task},
                                     {"seed", std::to_string(ds.seed)},
                                     {"n", std::to_string(ds.theta.cols())},
                                     {"theta_dim", std::to_string(ds.theta.rows())},
                                     {"y_dim", std::to_string(ds.y.rows())},
                                     {"simulator_version", ds.simulator_version},
                                     {"resampled", std::to_string(ds.resampled)}});
}

inline Dataset read_dataset(const std::filesystem::path& path, const sim::TaskDefinition& task) {
  const io::Table t = io::read_csv(path);
  if (t.header != dataset_header(task.theta_dim, task.y_dim))
    throw std::runtime_error(path.string() + ": header does not match task " + task.name);
  Dataset ds;
  ds.task = task.name;
  ds.theta = t.rows.leftCols(task.theta_dim).transpose();
  ds.y = t.rows.rightCols(task.y_dim).transpose();
  if (std::filesystem::exists(meta_path(path))) {
    std::istringstream in(io::read_file(meta_path(path)));
    for (std::string line; std::getline(in, line);) {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      const std::string k = io::trim(line.substr(0, colon)), v = io::trim(line.substr(colon + 1));
      if (k == "task" && v != task.name) throw std::runtime_error(meta_path(path).string() + ": task is " + v);
      if (k == "simulator_version") ds.simulator_version = v;
      if (k == "seed") ds.seed = std::stoull(v);
    }
  }
  return ds;
}

// --------------------------------------------------------- early stopping

/// Tracks the best validation loss; epochs without improvement are counted
/// only after `start_epoch`. Epochs are 1-based.
struct EarlyStopping {
  int patience = 30;
  int start_epoch = 50;
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int stale = 0;

  /// Returns true when training should stop after this epoch.
  bool update(int epoch, double val_loss) {
    if (val_loss < best) {
      best = val_loss;
      best_epoch = epoch;
      stale = 0;
    } else if (epoch > start_epoch) {
      ++stale;
    }
    return stale >= patience;
  }

  bool improved_at(int epoch) const { return best_epoch == epoch; }
};

// ----------------------------------------------------------------- training

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainingReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  double initial_val_loss = std::numeric_limits<double>::infinity();
  std::string stop_reason;
  double wall_seconds = 0.0;
  long optimizer_steps = 0;
  std::string checkpoint_path;
  std::size_t null_gradient_nonzero_steps = 0;  // steps where null_cond received gradient
  std::vector<int> floored_coordinates;
};

/// Network, schedule and standardizer: everything needed to sample.
struct TrainedModel {
  Config config;
  std::string simulator_version;
  DenoiserNetwork net;
  NoiseSchedule schedule;
  Standardizer standardizer;
  long optimizer_steps = 0;

  TrainedModel(Config c, DenoiserNetwork n, Standardizer st, std::string version = {})
      : config(std::move(c)),
        simulator_version(std::move(version)),
        net(std::move(n)),
        schedule(config.schedule_kind, config.schedule_steps),
        standardizer(std::move(st)) {}
};

namespace detail {

inline Matrix columns(const Matrix& x, const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end) {
  Matrix out(x.rows(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i)
    out.col(static_cast<Eigen::Index>(i - begin)) = x.col(static_cast<Eigen::Index>(idx[i]));
  return out;
}

}  // namespace detail

/// Order of dataset columns: the first n_train go to training, the rest to validation.
inline std::vector<std::size_t> split_permutation(std::uint64_t seed, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng g = rng::stream(seed, 1, rng::kTrain);
  std::shuffle(perm.begin(), perm.end(), g);
  return perm;
}

inline Eigen::Index validation_count(double val_fraction, Eigen::Index n) {
  return static_cast<Eigen::Index>(std::llround(val_fraction * static_cast<double>(n)));
}

/// Validation loss on fixed per-element (t, eps) draws, evaluated in fixed chunks.
inline double validation_loss(const DenoiserNetwork& net, const NoiseSchedule& s, const Matrix& theta,
                              const Matrix& y, const NoiseDraws& draws, double gamma_snr) {
  constexpr Eigen::Index kChunk = 1024;
  const Eigen::Index n = theta.cols();
  double total = 0.0;
  for (Eigen::Index b = 0; b < n; b += kChunk) {
    const Eigen::Index m = std::min(kChunk, n - b);
    NoiseDraws part;
    part.steps.assign(draws.steps.begin() + b, draws.steps.begin() + b + m);
    part.eps = draws.eps.middleCols(b, m);
    part.uncond.assign(static_cast<std::size_t>(m), 0);
    total += noise_prediction_loss(net, s, theta.middleCols(b, m), y.middleCols(b, m), part, gamma_snr) *
             static_cast<double>(m);
  }
  return total / static_cast<double>(n);
}

struct TrainingResult {
  TrainedModel model;
  TrainingReport report;
};

/// Optional per-epoch callback, e.g. progress output.
using EpochCallback = std::function<void(const EpochRecord&)>;

inline TrainingResult train(const Config& cfg, const Dataset& data, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();
  const Eigen::Index N = data.theta.cols();
  const Eigen::Index n_val = validation_count(cfg.val_fraction, N);
  const Eigen::Index n_train = N - n_val;
  if (n_val < 1 || n_train < cfg.batch)
    throw std::invalid_argument("train: budget " + std::to_string(N) + " too small for batch " +
                                std::to_string(cfg.batch) + " with validation fraction " +
                                io::format_double(cfg.val_fraction));

  const std::vector<std::size_t> perm = split_permutation(cfg.seed, static_cast<std::size_t>(N));
  const Matrix theta_tr_raw = detail::columns(data.theta, perm, 0, static_cast<std::size_t>(n_train));
  const Matrix y_tr_raw = detail::columns(data.y, perm, 0, static_cast<std::size_t>(n_train));
  const Standardizer st = Standardizer::fit(theta_tr_raw, y_tr_raw);
  const Matrix theta_tr = st.theta_forward(theta_tr_raw), y_tr = st.y_forward(y_tr_raw);
  const Matrix theta_val =
      st.theta_forward(detail::columns(data.theta, perm, static_cast<std::size_t>(n_train), static_cast<std::size_t>(N)));
  const Matrix y_val =
      st.y_forward(detail::columns(data.y, perm, static_cast<std::size_t>(n_train), static_cast<std::size_t>(N)));

  DenoiserShape shape;
  shape.theta_dim = static_cast<int>(data.theta.rows());
  shape.cond_dim = static_cast<int>(data.y.rows());
  shape.hidden = cfg.hidden;
  shape.blocks = cfg.blocks;
  TrainedModel model(cfg, DenoiserNetwork(shape, cfg.seed), st, data.simulator_version);
  const NoiseSchedule& s = model.schedule;

  NoiseDraws val_draws;
  {
    Rng g = rng::stream(cfg.seed, 2, rng::kTrain);
    val_draws = draw_noise(shape.theta_dim, static_cast<int>(n_val), s, g, 0.0);
  }

  AdamWConfig acfg;
  acfg.weight_decay = cfg.weight_decay;
  OptimizerState opt(shape, acfg);
  TrainingResult out{model, {}};
  TrainingReport& rep = out.report;
  rep.floored_coordinates = st.floored;
  rep.initial_val_loss = validation_loss(model.net, s, theta_val, y_val, val_draws, cfg.gamma_snr);

  const long steps_per_epoch = (n_train + cfg.batch - 1) / cfg.batch;
  const long total_steps = steps_per_epoch * cfg.max_epochs;
  const double p_uncond = cfg.resolved_p_uncond();
  Rng g = rng::stream(cfg.seed, 3, rng::kTrain);
  std::vector<std::size_t> order(static_cast<std::size_t>(n_train));
  std::iota(order.begin(), order.end(), 0);
  EarlyStopping stopper{cfg.patience, cfg.patience_start_epoch};
  long step = 0;
  rep.stop_reason = "max_epochs";

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), g);
    double loss_sum = 0.0;
    long batches = 0;
    bool diverged = false;
    double lr_now = cfg.lr;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch));
      const Matrix tb = detail::columns(theta_tr, order, b, e), yb = detail::columns(y_tr, order, b, e);
      TrainingLoss tl;
      try {
        tl = training_loss(model.net, s, tb, yb, g, cfg.gamma_snr, p_uncond);
      } catch (const std::runtime_error&) {
        diverged = true;
        break;
      }
      lr_now = lr_at(step, total_steps, cfg.lr, cfg.lr_floor);
      if (!adamw_apply(opt, model.net, tl.grads, lr_now, cfg.clip_norm)) {
        diverged = true;
        break;
      }
      if (tl.grads.null_cond.squaredNorm() > 0.0) ++rep.null_gradient_nonzero_steps;
      ++step;
      loss_sum += tl.loss;
      ++batches;
    }
    if (diverged) {
      rep.stop_reason = "diverged";
      break;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(std::max(1L, batches));
    rec.lr = lr_now;
    double val;
    try {
      val = validation_loss(model.net, s, theta_val, y_val, val_draws, cfg.gamma_snr);
    } catch (const std::runtime_error&) {
      rep.stop_reason = "diverged";
      break;
    }
    rec.val_loss = val;
    rep.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    const bool stop = stopper.update(epoch, val);
    if (stopper.improved_at(epoch)) {
      out.model.net = model.net;
      out.model.optimizer_steps = step;
    }
    if (stop) {
      rep.stop_reason = "early_stopping";
      break;
    }
  }
  if (stopper.best_epoch == 0) {
    // no epoch completed: keep the initial network
    out.model.net = DenoiserNetwork(shape, cfg.seed);
  }
  rep.best_epoch = stopper.best_epoch;
  rep.best_val_loss = stopper.best;
  rep.optimizer_steps = step;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

// -------------------------------------------------------------- checkpoint

inline constexpr const char* kCheckpointMagic = "CONDISIM-CKPT-v1";

namespace detail {

inline nlohmann::json encode_tensor(const Eigen::MatrixXd& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", io::encode_doubles(m.data(), static_cast<std::size_t>(m.size()))}};
}

inline nlohmann::json encode_tensor(const Eigen::VectorXd& v) {
  return {{"rows", v.size()}, {"cols", 1}, {"data", io::encode_doubles(v.data(), static_cast<std::size_t>(v.size()))}};
}

template <class T>
void decode_tensor(const nlohmann::json& j, T& out, const std::string& name) {
  const auto rows = j.at("rows").get<Eigen::Index>(), cols = j.at("cols").get<Eigen::Index>();
  if (rows != out.rows() || cols != out.cols())
    throw std::runtime_error("checkpoint tensor " + name + " has shape " + std::to_string(rows) + "x" +
                             std::to_string(cols) + ", expected " + std::to_string(out.rows()) + "x" +
                             std::to_string(out.cols()));
  const std::vector<double> data = io::decode_doubles(j.at("data").get<std::string>());
  if (static_cast<Eigen::Index>(data.size()) != out.size())
    throw std::runtime_error("checkpoint tensor " + name + " has the wrong element count");
  std::copy(data.begin(), data.end(), out.data());
}

}  // namespace detail

inline std::string checkpoint_json(const TrainedModel& m, const TrainingReport* report = nullptr) {
  nlohmann::ordered_json j;
  j["magic"] = kCheckpointMagic;
  nlohmann::ordered_json cfg;
  for (const auto& [k, v] : m.config.to_key_values()) cfg[k] = v;
  j["config"] = cfg;
  j["simulator_version"] = m.simulator_version;
  const DenoiserShape& sh = m.net.shape();
  j["shape"] = {{"theta_dim", sh.theta_dim}, {"cond_dim", sh.cond_dim}, {"hidden", sh.hidden}, {"blocks", sh.blocks}};
  j["schedule"] = {{"kind", std::string(to_string(m.schedule.kind()))}, {"steps", m.schedule.steps()}};
  j["standardizer"] = {{"theta_shift", detail::encode_tensor(m.standardizer.theta_shift)},
                       {"theta_scale", detail::encode_tensor(m.standardizer.theta_scale)},
                       {"y_shift", detail::encode_tensor(m.standardizer.y_shift)},
                       {"y_scale", detail::encode_tensor(m.standardizer.y_scale)}};
  nlohmann::ordered_json params;
  DenoiserParams::visit([&](const std::string& name, const auto& t) { params[name] = detail::encode_tensor(t); },
                        m.net.params());
  j["params"] = params;
  j["optimizer"] = {{"step_count", m.optimizer_steps}};
  if (report) {
    j["training"] = {{"best_epoch", report->best_epoch},
                     {"best_val_loss", io::format_double(report->best_val_loss)},
                     {"epochs", report->epochs.size()},
                     {"stop_reason", report->stop_reason}};
  }
  return j.dump(1) + "\n";
}

inline void save_checkpoint(const std::filesystem::path& path, const TrainedModel& m,
                            const TrainingReport* report = nullptr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << checkpoint_json(m, report);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline TrainedModel parse_checkpoint(const std::string& text, const std::string& source = "<checkpoint>") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(source + ": not a valid checkpoint (" + e.what() + ")");
  }
  if (!j.is_object() || j.value("magic", "") != kCheckpointMagic)
    throw std::runtime_error(source + ": missing checkpoint magic " + kCheckpointMagic);
  try {
    std::map<std::string, std::string> kv;
    for (const auto& [k, v] : j.at("config").items()) kv[k] = v.get<std::string>();
    const Config cfg = Config::from_key_values(kv);
    DenoiserShape sh;
    sh.theta_dim = j.at("shape").at("theta_dim").get<int>();
    sh.cond_dim = j.at("shape").at("cond_dim").get<int>();
    sh.hidden = j.at("shape").at("hidden").get<int>();
    sh.blocks = j.at("shape").at("blocks").get<int>();
    if (parse_schedule_kind(j.at("schedule").at("kind").get<std::string>()) != cfg.schedule_kind ||
        j.at("schedule").at("steps").get<int>() != cfg.schedule_steps)
      throw std::runtime_error("schedule does not match config");
    DenoiserParams params(sh);
    const auto& pj = j.at("params");
    DenoiserParams::visit([&](const std::string& name, auto& t) { detail::decode_tensor(pj.at(name), t, name); },
                          params);
    Standardizer st;
    st.theta_shift.resize(sh.theta_dim);
    st.theta_scale.resize(sh.theta_dim);
    st.y_shift.resize(sh.cond_dim);
    st.y_scale.resize(sh.cond_dim);
    const auto& sj = j.at("standardizer");
    detail::decode_tensor(sj.at("theta_shift"), st.theta_shift, "theta_shift");
    detail::decode_tensor(sj.at("theta_scale"), st.theta_scale, "theta_scale");
    detail::decode_tensor(sj.at("y_shift"), st.y_shift, "y_shift");
    detail::decode_tensor(sj.at("y_scale"), st.y_scale, "y_scale");
    TrainedModel m(cfg, DenoiserNetwork(sh, std::move(params)), st, j.value("simulator_version", ""));
    m.optimizer_steps = j.at("optimizer").at("step_count").get<long>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(source + ": malformed checkpoint (" + e.what() + ")");
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(source + ": " + e.what());
  }
}

inline TrainedModel load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("checkpoint not found: " + path.string());
  return parse_checkpoint(io::read_file(path), path.string());
}

// ---------------------------------------------------------------- sampling

/// Posterior draws at a raw-unit observation, returned in raw units.
inline PosteriorSamples sample(const TrainedModel& m, const Vector& y_raw, std::size_t n, double guidance,
                               std::uint64_t seed, std::uint64_t stream_offset = 0) {
  if (y_raw.size() != m.net.shape().cond_dim)
    throw std::invalid_argument("observation has " + std::to_string(y_raw.size()) + " entries, model expects " +
                                std::to_string(m.net.shape().cond_dim));
  SamplerOptions opt;
  opt.sigma = m.config.sigma;
  opt.stream_offset = stream_offset;
  const Vector y = m.standardizer.y_forward(y_raw);
  return sample_posterior(m.net, m.schedule, y, n, GuidanceConfig{guidance}, seed, &m.standardizer, opt);
}

// -------------------------------------------------------------- evaluation

struct EvaluationReport {
  std::string task;
  int n = 0;
  std::size_t excluded = 0;
  std::string reference_method;
  std::optional<metrics::C2stResult> c2st;
  std::optional<metrics::MmdResult> mmd;
  std::string notice;
  Matrix posterior;  // theta_dim x kept
  Matrix reference;
};

/// Posterior draws at `y_obs` compared with reference draws (given, or from
/// the task's reference sampler).
inline EvaluationReport evaluate(const TrainedModel& m, const sim::TaskDefinition& task, const Vector& y_obs, int n,
                                 double guidance, std::uint64_t seed, const Matrix* reference = nullptr) {
  if (n < 0) throw std::invalid_argument("evaluate: budget must be >= 0");
  EvaluationReport r;
  r.task = task.name;
  r.n = n;
  if (n == 0) {
    r.notice = "empty evaluation budget; nothing sampled";
    r.posterior.resize(task.theta_dim, 0);
    return r;
  }
  const PosteriorSamples ps = sample(m, y_obs, static_cast<std::size_t>(n), guidance, seed);
  r.posterior = ps.theta;
  r.excluded = ps.excluded;
  if (reference) {
    r.reference = *reference;
    r.reference_method = "file";
  } else if (task.reference_sampler) {
    r.reference = task.reference_sampler(y_obs, static_cast<std::size_t>(n), rng::stream_seed(seed, 0, rng::kReference));
    r.reference_method = task.reference_method;
  } else {
    r.notice = "no reference posterior for task " + task.name + "; metrics skipped";
    return r;
  }
  if (r.reference.rows() != task.theta_dim) throw std::runtime_error("reference samples have the wrong dimension");
  if (r.posterior.cols() < 10 || r.reference.cols() < 10) {
    r.notice = "fewer than 10 samples on one side; metrics skipped";
    return r;
  }
  r.c2st = metrics::c2st(r.posterior, r.reference, rng::stream_seed(seed, 1, rng::kMetric));
  r.mmd = metrics::mmd(r.posterior, r.reference);
  return r;
}

// ------------------------------------------------------------- calibration

struct CalibrationResult {
  metrics::RankStatistics ranks;
  metrics::EcdfResult ecdf;
  std::vector<metrics::KsResult> ks;
};

inline constexpr int kMinCalibrationObservations = 50;

inline CalibrationResult calibrate(const TrainedModel& m, const sim::TaskDefinition& task, int M, int L,
                                   std::uint64_t seed, double coverage = 0.9, double guidance = 0.0) {
  if (M < kMinCalibrationObservations)
    throw std::invalid_argument("calibrate: M must be >= " + std::to_string(kMinCalibrationObservations) + ", got " +
                                std::to_string(M));
  if (L < 1) throw std::invalid_argument("calibrate: L must be >= 1");
  const metrics::PosteriorSampler posterior = [&](const Vector& y, std::size_t n, std::uint64_t s) {
    return sample(m, y, n, guidance, s).theta;
  };
  CalibrationResult c;
  c.ranks = metrics::sbc_ranks(task, posterior, M, L, seed);
  if (c.ranks.M < kMinCalibrationObservations)
    throw std::runtime_error("calibrate: only " + std::to_string(c.ranks.M) + " usable observations (" +
                             std::to_string(c.ranks.skipped) + " skipped)");
  c.ecdf = metrics::ecdf_band(c.ranks, coverage, rng::stream_seed(seed, 0, rng::kMetric));
  for (Eigen::Index i = 0; i < c.ranks.ranks.cols(); ++i) {
    std::vector<double> col(c.ranks.ranks.col(i).data(), c.ranks.ranks.col(i).data() + c.ranks.M);
    c.ks.push_back(metrics::ks_uniform(std::move(col)));
  }
  return c;
}

}  // namespace condisim
