#pragma once

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "condisim/config.hpp"
#include "condisim/io.hpp"
#include "condisim/metrics.hpp"
#include "condisim/pipeline.hpp"
#include "condisim/sim/tasks.hpp"

namespace condisim::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Bad command line or configuration (exit 2).
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Options {
  std::string command;
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out = "run";
  std::optional<int> threads;
  bool plots = false;
  std::optional<double> guidance;
  std::optional<int> n;
  std::string checkpoint;   // default <out>/ckpt.json
  std::string observation;  // CSV, one row in raw units
  std::string reference;    // CSV of reference posterior draws
  std::string data;         // CSV dataset for train, default <out>/dataset.csv
};

namespace detail {

inline std::map<std::string, std::string> read_config_file(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  try {
    return io::parse_key_values(in, path);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

/// File keys, then `--set` overrides, then the dedicated flags.
inline std::map<std::string, std::string> layered_keys(const Options& o, std::map<std::string, std::string> kv) {
  for (const auto& [k, v] : read_config_file(o.config_path)) kv[k] = v;
  for (const std::string& s : o.overrides) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    kv[io::trim(s.substr(0, eq))] = io::trim(s.substr(eq + 1));
  }
  if (o.seed) kv["seed"] = std::to_string(*o.seed);
  if (o.guidance) kv["sample.guidance"] = io::format_double(*o.guidance);
  if (o.n) kv["sample.n"] = std::to_string(*o.n);
  return kv;
}

inline Config resolve(const Options& o, const std::map<std::string, std::string>& base = {}) {
  const Config c = Config::from_key_values(layered_keys(o, base));
  c.validate();
  return c;
}

inline bool model_key(const std::string& k) {
  return k == "task" || k == "task.seed" || k.rfind("schedule.", 0) == 0 || k.rfind("net.", 0) == 0 ||
         k.rfind("train.", 0) == 0 || k == "budget";
}

/// Config for commands that use a checkpoint: the checkpoint's keys are the
/// base; overrides may change sampling and calibration keys only.
inline Config resolve_for_model(const Options& o, const TrainedModel& m) {
  std::map<std::string, std::string> base;
  for (const auto& [k, v] : m.config.to_key_values()) base[k] = v;
  const Config c = resolve(o, base);
  const auto got = c.to_key_values();
  for (const auto& [k, v] : got)
    if (model_key(k) && base.at(k) != v)
      throw ConfigError(k, "config key '" + k + "' is " + v + " but the checkpoint was trained with " + base.at(k));
  return c;
}

inline std::string timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

inline void write_manifest(const Options& o, const Config& c, const std::vector<std::pair<std::string, std::string>>& extra) {
  std::vector<std::pair<std::string, std::string>> kv = {{"command", o.command}, {"created", timestamp()}};
  kv.emplace_back("config_file", o.config_path.empty() ? "-" : o.config_path);
  for (const auto& s : o.overrides) kv.emplace_back("override", s);
  kv.emplace_back("threads", std::to_string(worker_threads()));
  for (const auto& p : extra) kv.push_back(p);
  for (const auto& [k, v] : c.to_key_values()) kv.emplace_back("config." + k, v);
  io::write_report(fs::path(o.out) / "manifest.txt", kv);
}

inline Vector observation(const Options& o, const sim::TaskDefinition& task) {
  if (o.observation.empty()) return task.reference_y;
  if (!fs::exists(o.observation)) throw std::runtime_error("observation file not found: " + o.observation);
  const io::Table t = io::read_csv(o.observation);
  if (t.rows.rows() != 1 || t.rows.cols() != task.y_dim)
    throw std::runtime_error(o.observation + ": expected one row of " + std::to_string(task.y_dim) + " values");
  return t.rows.row(0).transpose();
}

inline std::vector<std::string> theta_header(int d) {
  std::vector<std::string> h;
  for (int i = 0; i < d; ++i) h.push_back("theta_" + std::to_string(i));
  return h;
}

inline void write_samples(const fs::path& path, const Matrix& theta) {
  io::write_csv(path, theta_header(static_cast<int>(theta.rows())), theta.transpose());
}

/// Pairwise scatter of the first few coordinates.
inline void write_pairs_svg(const fs::path& path, const Matrix& theta) {
  const int d = std::min<int>(4, static_cast<int>(theta.rows()));
  constexpr double cell = 160, pad = 10;
  const double size = d * cell;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const Eigen::Index n = theta.cols(), stride = std::max<Eigen::Index>(1, n / 2000);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) {
      const double x0 = c * cell, y0 = r * cell;
      out << "<rect x=\"" << x0 + 1 << "\" y=\"" << y0 + 1 << "\" width=\"" << cell - 2 << "\" height=\"" << cell - 2
          << "\" fill=\"none\" stroke=\"#999\"/>\n";
      if (r == c || n == 0) {
        out << "<text x=\"" << x0 + cell / 2 << "\" y=\"" << y0 + cell / 2
            << "\" text-anchor=\"middle\" font-size=\"14\">theta_" << r << "</text>\n";
        continue;
      }
      const double xlo = theta.row(c).minCoeff(), xhi = theta.row(c).maxCoeff();
      const double ylo = theta.row(r).minCoeff(), yhi = theta.row(r).maxCoeff();
      const double sx = (cell - 2 * pad) / std::max(xhi - xlo, 1e-12), sy = (cell - 2 * pad) / std::max(yhi - ylo, 1e-12);
      for (Eigen::Index j = 0; j < n; j += stride)
        out << "<circle cx=\"" << x0 + pad + (theta(c, j) - xlo) * sx << "\" cy=\""
            << y0 + cell - pad - (theta(r, j) - ylo) * sy << "\" r=\"1\" fill=\"#1f77b4\" fill-opacity=\"0.4\"/>\n";
    }
  out << "</svg>\n";
}

inline TrainedModel load_model(const Options& o) {
  const fs::path p = o.checkpoint.empty() ? fs::path(o.out) / "ckpt.json" : fs::path(o.checkpoint);
  if (!fs::exists(p)) throw std::runtime_error("checkpoint not found: " + p.string() + " (run `train` first)");
  return load_checkpoint(p);
}

inline sim::TaskDefinition task_for(const Config& c) { return sim::make_task(c.task, c.task_seed); }

// ---------------------------------------------------------------- commands

inline int cmd_tasks(std::ostream& out) {
  out << std::left << std::setw(26) << "task" << std::setw(7) << "theta" << std::setw(7) << "y"
      << "prior\n";
  for (const std::string& name : sim::task_names()) {
    const sim::TaskDefinition t = sim::make_task(name);
    out << std::left << std::setw(26) << name << std::setw(7) << t.theta_dim << std::setw(7) << t.y_dim
        << t.prior_description << "\n";
  }
  return kExitOk;
}

inline int cmd_simulate(const Options& o, std::ostream& out) {
  const Config c = resolve(o);
  const sim::TaskDefinition task = task_for(c);
  fs::create_directories(o.out);
  const Dataset d = generate_dataset(task, c.budget, c.seed);
  write_dataset(fs::path(o.out) / "dataset.csv", d);
  write_manifest(o, c, {{"simulator_version", task.version}, {"resampled", std::to_string(d.resampled)}});
  for (const auto& f : d.failures) out << "resampled " << f << "\n";
  out << "wrote " << (fs::path(o.out) / "dataset.csv").string() << " (" << d.theta.cols() << " pairs)\n";
  return kExitOk;
}

inline int cmd_train(const Options& o, std::ostream& out) {
  const Config c = resolve(o);
  const sim::TaskDefinition task = task_for(c);
  fs::create_directories(o.out);
  const fs::path data_path = o.data.empty() ? fs::path(o.out) / "dataset.csv" : fs::path(o.data);
  Dataset d;
  std::string data_source;
  if (fs::exists(data_path)) {
    d = read_dataset(data_path, task);
    if (d.theta.cols() != c.budget)
      throw std::runtime_error(data_path.string() + " holds " + std::to_string(d.theta.cols()) +
                               " pairs but budget is " + std::to_string(c.budget));
    data_source = data_path.string();
  } else if (!o.data.empty()) {
    throw std::runtime_error("dataset not found: " + o.data);
  } else {
    d = generate_dataset(task, c.budget, c.seed);
    write_dataset(data_path, d);
    data_source = "generated";
  }
  const TrainingResult r = train(c, d, [&](const EpochRecord& e) {
    if (e.epoch == 1 || e.epoch % 10 == 0)
      out << "epoch " << e.epoch << " train " << io::format_double(e.train_loss) << " val "
          << io::format_double(e.val_loss) << "\n";
  });
  const fs::path ckpt = fs::path(o.out) / "ckpt.json";
  save_checkpoint(ckpt, r.model, &r.report);

  Matrix log(static_cast<Eigen::Index>(r.report.epochs.size()), 4);
  for (std::size_t i = 0; i < r.report.epochs.size(); ++i) {
    const EpochRecord& e = r.report.epochs[i];
    log.row(static_cast<Eigen::Index>(i)) << e.epoch, e.train_loss, e.val_loss, e.lr;
  }
  io::write_csv(fs::path(o.out) / "training_log.csv", {"epoch", "train_loss", "val_loss", "lr"}, log);
  std::string floored;
  for (int k : r.report.floored_coordinates) floored += (floored.empty() ? "" : ",") + std::to_string(k);
  io::write_report(fs::path(o.out) / "training.txt",
                   {{"task", c.task},
                    {"epochs", std::to_string(r.report.epochs.size())},
                    {"best_epoch", std::to_string(r.report.best_epoch)},
                    {"best_val_loss", io::format_double(r.report.best_val_loss)},
                    {"initial_val_loss", io::format_double(r.report.initial_val_loss)},
                    {"stop_reason", r.report.stop_reason},
                    {"optimizer_steps", std::to_string(r.report.optimizer_steps)},
                    {"wall_seconds", io::format_double(r.report.wall_seconds)},
                    {"floored_coordinates", floored.empty() ? "-" : floored},
                    {"checkpoint", ckpt.string()}});
  write_manifest(o, c, {{"dataset", data_source}, {"simulator_version", task.version}});
  if (!r.report.floored_coordinates.empty())
    out << "warning: constant coordinates, scale floored: " << floored << "\n";
  out << "stopped (" << r.report.stop_reason << ") after " << r.report.epochs.size() << " epochs; best val "
      << io::format_double(r.report.best_val_loss) << " at epoch " << r.report.best_epoch << "\n";
  out << "wrote " << ckpt.string() << "\n";
  return r.report.stop_reason == "diverged" ? kExitFailure : kExitOk;
}

inline int cmd_sample(const Options& o, std::ostream& out) {
  TrainedModel m = load_model(o);
  const Config c = resolve_for_model(o, m);
  m.config = c;
  const sim::TaskDefinition task = task_for(c);
  const Vector y = observation(o, task);
  fs::create_directories(o.out);
  const PosteriorSamples ps = sample(m, y, static_cast<std::size_t>(c.n_samples), c.guidance, c.seed);
  write_samples(fs::path(o.out) / "posterior.csv", ps.theta);
  if (o.plots) write_pairs_svg(fs::path(o.out) / "posterior_pairs.svg", ps.theta);
  write_manifest(o, c, {{"observation", o.observation.empty() ? "task reference" : o.observation},
                        {"excluded", std::to_string(ps.excluded)}});
  if (ps.excluded) out << "excluded " << ps.excluded << " non-finite draws\n";
  out << "wrote " << ps.theta.cols() << " draws to " << (fs::path(o.out) / "posterior.csv").string() << "\n";
  return kExitOk;
}

inline int cmd_evaluate(const Options& o, std::ostream& out) {
  TrainedModel m = load_model(o);
  const Config c = resolve_for_model(o, m);
  m.config = c;
  const sim::TaskDefinition task = task_for(c);
  const Vector y = observation(o, task);
  std::optional<Matrix> ref;
  if (!o.reference.empty()) {
    if (!fs::exists(o.reference)) throw std::runtime_error("reference file not found: " + o.reference);
    const io::Table t = io::read_csv(o.reference);
    if (t.rows.cols() != task.theta_dim)
      throw std::runtime_error(o.reference + ": expected " + std::to_string(task.theta_dim) + " columns");
    ref = t.rows.transpose();
  }
  fs::create_directories(o.out);
  const EvaluationReport e = evaluate(m, task, y, c.n_samples, c.guidance, c.seed, ref ? &*ref : nullptr);
  if (e.posterior.cols() > 0) write_samples(fs::path(o.out) / "posterior.csv", e.posterior);
  if (e.reference.cols() > 0 && !ref) write_samples(fs::path(o.out) / "reference.csv", e.reference);
  if (o.plots && e.posterior.cols() > 0) write_pairs_svg(fs::path(o.out) / "posterior_pairs.svg", e.posterior);
  std::vector<std::pair<std::string, std::string>> rep = {{"task", task.name},
                                                          {"n", std::to_string(e.n)},
                                                          {"excluded", std::to_string(e.excluded)},
                                                          {"guidance", io::format_double(c.guidance)}};
  if (!e.reference_method.empty()) rep.emplace_back("reference", e.reference_method);
  if (e.c2st) {
    rep.emplace_back("c2st", io::format_double(e.c2st->score));
    for (std::size_t i = 0; i < e.c2st->per_fold.size(); ++i)
      rep.emplace_back("c2st_fold_" + std::to_string(i), io::format_double(e.c2st->per_fold[i]));
  }
  if (e.mmd) {
    rep.emplace_back("mmd", io::format_double(e.mmd->value));
    rep.emplace_back("mmd_bandwidth", io::format_double(e.mmd->kernel_bandwidth));
  }
  if (!e.notice.empty()) rep.emplace_back("notice", e.notice);
  io::write_report(fs::path(o.out) / "report.txt", rep);
  write_manifest(o, c, {{"observation", o.observation.empty() ? "task reference" : o.observation},
                        {"reference_file", o.reference.empty() ? "-" : o.reference}});
  if (!e.notice.empty()) out << "notice: " << e.notice << "\n";
  if (e.c2st) out << "c2st " << io::format_double(e.c2st->score) << "\n";
  if (e.mmd) out << "mmd " << io::format_double(e.mmd->value) << "\n";
  return kExitOk;
}

inline int cmd_calibrate(const Options& o, std::ostream& out) {
  TrainedModel m = load_model(o);
  const Config c = resolve_for_model(o, m);
  m.config = c;
  const sim::TaskDefinition task = task_for(c);
  fs::create_directories(o.out);
  const CalibrationResult r = calibrate(m, task, c.sbc_m, c.sbc_l, c.seed, c.sbc_coverage, c.guidance);
  io::write_csv(fs::path(o.out) / "sbc_ranks.csv", theta_header(task.theta_dim), r.ranks.ranks);
  std::vector<std::pair<std::string, std::string>> rep = {{"task", task.name},
                                                          {"M", std::to_string(r.ranks.M)},
                                                          {"L", std::to_string(r.ranks.L)},
                                                          {"skipped", std::to_string(r.ranks.skipped)},
                                                          {"coverage", io::format_double(c.sbc_coverage)}};
  int inside = 0, ks_pass = 0;
  for (std::size_t i = 0; i < r.ecdf.curves.size(); ++i) {
    const std::string stem = "ecdf_" + std::to_string(i);
    metrics::write_ecdf_csv(fs::path(o.out) / (stem + ".csv"), r.ecdf.curves[i]);
    if (o.plots) metrics::write_ecdf_svg(fs::path(o.out) / (stem + ".svg"), r.ecdf.curves[i], "theta_" + std::to_string(i));
    inside += r.ecdf.curves[i].inside;
    ks_pass += r.ks[i].p_value > 0.01;
    rep.emplace_back("theta_" + std::to_string(i) + ".ks_p", io::format_double(r.ks[i].p_value));
    rep.emplace_back("theta_" + std::to_string(i) + ".inside_band", r.ecdf.curves[i].inside ? "yes" : "no");
  }
  rep.emplace_back("inside_band", std::to_string(inside) + "/" + std::to_string(r.ecdf.curves.size()));
  rep.emplace_back("ks_p_above_0.01", std::to_string(ks_pass) + "/" + std::to_string(r.ks.size()));
  io::write_report(fs::path(o.out) / "calibration.txt", rep);
  write_manifest(o, c, {});
  out << "inside band " << inside << "/" << r.ecdf.curves.size() << ", KS p > 0.01 " << ks_pass << "/" << r.ks.size()
      << "\n";
  return kExitOk;
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Conditional diffusion posterior estimation for simulation-based inference", "condisim"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub, bool sampling) {
    sub->add_option("--config", o.config_path, "key=value config file");
    sub->add_option("--set", o.overrides, "override a config key, key=value (repeatable)");
    sub->add_option("--seed", o.seed, "run seed");
    sub->add_option("--out", o.out, "run directory")->capture_default_str();
    sub->add_option("--threads", o.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    if (sampling) {
      sub->add_option("--checkpoint", o.checkpoint, "checkpoint file (default <out>/ckpt.json)");
      sub->add_option("--guidance", o.guidance, "classifier-free guidance strength")->check(CLI::NonNegativeNumber);
      sub->add_option("--n", o.n, "number of posterior draws")->check(CLI::NonNegativeNumber);
      sub->add_flag("--plots", o.plots, "also write SVG plots");
    }
  };
  CLI::App* tasks = app.add_subcommand("tasks", "list benchmark tasks");
  CLI::App* simulate = app.add_subcommand("simulate", "generate a training dataset");
  common(simulate, false);
  CLI::App* train_cmd = app.add_subcommand("train", "train the conditional denoiser");
  common(train_cmd, false);
  train_cmd->add_option("--data", o.data, "dataset CSV (default <out>/dataset.csv, generated if missing)");
  CLI::App* sample_cmd = app.add_subcommand("sample", "draw posterior samples");
  common(sample_cmd, true);
  sample_cmd->add_option("--observation", o.observation, "CSV with one observation row in raw units");
  CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "compare posterior draws with a reference");
  common(evaluate_cmd, true);
  evaluate_cmd->add_option("--observation", o.observation, "CSV with one observation row in raw units");
  evaluate_cmd->add_option("--reference", o.reference, "CSV of reference posterior draws");
  CLI::App* calibrate_cmd = app.add_subcommand("calibrate", "simulation-based calibration");
  common(calibrate_cmd, true);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front())
      err << sub->help();
    else
      err << app.help();
    return kExitUsage;
  }
  o.command = app.get_subcommands().front()->get_name();
  const std::size_t saved_threads = worker_threads();
  if (o.threads) worker_threads() = static_cast<std::size_t>(*o.threads);
  int code = kExitOk;
  try {
    if (o.command == "tasks") code = detail::cmd_tasks(out);
    else if (o.command == "simulate") code = detail::cmd_simulate(o, out);
    else if (o.command == "train") code = detail::cmd_train(o, out);
    else if (o.command == "sample") code = detail::cmd_sample(o, out);
    else if (o.command == "evaluate") code = detail::cmd_evaluate(o, out);
    else code = detail::cmd_calibrate(o, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    code = kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    code = kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    code = kExitFailure;
  }
  worker_threads() = saved_threads;
  (void)tasks;
  return code;
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args);
}

}  // namespace condisim::cli
