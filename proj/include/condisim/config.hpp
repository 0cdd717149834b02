#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "condisim/io.hpp"
#include "condisim/schedule.hpp"
#include "condisim/sim/tasks.hpp"

namespace condisim {

/// Bad or unknown configuration key; what() names the key.
struct ConfigError : std::invalid_argument {
  std::string key;
  ConfigError(std::string k, const std::string& msg) : std::invalid_argument(msg), key(std::move(k)) {}
};

/// Resolved run configuration. Keys are flat and dotted, e.g. `train.lr`.
struct Config {
  std::string task = "two_moons";
  std::uint64_t task_seed = sim::kDefaultTaskSeed;
  std::uint64_t seed = 0;
  int budget = 10000;

  ScheduleKind schedule_kind = ScheduleKind::cosine;
  int schedule_steps = 160;
  SigmaKind sigma = SigmaKind::beta;
  int blocks = 4;
  int hidden = 64;

  int batch = 32;
  double lr = 1e-3;
  double lr_floor = 1e-6;
  double weight_decay = 1e-4;
  double gamma_snr = 5.0;
  std::optional<double> p_uncond;  // unset: 0.1 when guidance > 0, else 0
  double clip_norm = 5.0;
  double val_fraction = 0.30;
  int patience = 30;
  int patience_start_epoch = 50;
  int max_epochs = 500;

  int n_samples = 10000;
  double guidance = 0.0;
  int sbc_m = 500;
  int sbc_l = 250;
  double sbc_coverage = 0.9;

  /// Defaults for `task` from the per-task hyperparameter table.
  static Config for_task(const std::string& task) {
    const sim::TaskDefinition t = sim::make_task(task);
    Config c;
    c.task = task;
    c.schedule_kind = t.defaults.schedule;
    c.schedule_steps = t.defaults.steps;
    c.blocks = t.defaults.blocks;
    c.hidden = t.defaults.hidden;
    c.batch = t.defaults.batch;
    c.lr = t.defaults.lr;
    return c;
  }

  double resolved_p_uncond() const { return p_uncond ? *p_uncond : (guidance > 0.0 ? 0.1 : 0.0); }

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k = {
        "task", "task.seed", "seed", "budget", "schedule.kind", "schedule.steps", "sample.sigma", "net.blocks",
        "net.hidden", "train.batch", "train.lr", "train.lr_floor", "train.weight_decay", "train.gamma_snr",
        "train.p_uncond", "train.clip_norm", "train.val_fraction", "train.patience", "train.patience_start_epoch",
        "train.max_epochs", "sample.n", "sample.guidance", "sbc.m", "sbc.l", "sbc.coverage"};
    return k;
  }

  void set(const std::string& key, const std::string& value) {
    auto fail = [&](const std::string& why) -> ConfigError {
      return ConfigError(key, "config key '" + key + "': " + why + " (got '" + value + "')");
    };
    auto as_int = [&]() {
      long long v = 0;
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc{} || p != value.data() + value.size()) throw fail("expected an integer");
      if (v < INT32_MIN || v > INT32_MAX) throw fail("integer out of range");
      return static_cast<int>(v);
    };
    auto as_u64 = [&]() {
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc{} || p != value.data() + value.size()) throw fail("expected a nonnegative integer");
      return v;
    };
    auto as_double = [&]() {
      try {
        return io::parse_double(value);
      } catch (const std::invalid_argument&) {
        throw fail("expected a number");
      }
    };
    if (key == "task") {
      if (std::find(sim::task_names().begin(), sim::task_names().end(), value) == sim::task_names().end())
        throw fail("unknown task");
      task = value;
    } else if (key == "task.seed") task_seed = as_u64();
    else if (key == "seed") seed = as_u64();
    else if (key == "budget") budget = as_int();
    else if (key == "schedule.kind") {
      try {
        schedule_kind = parse_schedule_kind(value);
      } catch (const std::invalid_argument&) {
        throw fail("unknown schedule kind");
      }
    } else if (key == "schedule.steps") schedule_steps = as_int();
    else if (key == "sample.sigma") {
      try {
        sigma = parse_sigma_kind(value);
      } catch (const std::invalid_argument&) {
        throw fail("expected beta or posterior");
      }
    } else if (key == "net.blocks") blocks = as_int();
    else if (key == "net.hidden") hidden = as_int();
    else if (key == "train.batch") batch = as_int();
    else if (key == "train.lr") lr = as_double();
    else if (key == "train.lr_floor") lr_floor = as_double();
    else if (key == "train.weight_decay") weight_decay = as_double();
    else if (key == "train.gamma_snr") gamma_snr = as_double();
    else if (key == "train.p_uncond") {
      if (value == "auto") p_uncond.reset();
      else p_uncond = as_double();
    } else if (key == "train.clip_norm") clip_norm = as_double();
    else if (key == "train.val_fraction") val_fraction = as_double();
    else if (key == "train.patience") patience = as_int();
    else if (key == "train.patience_start_epoch") patience_start_epoch = as_int();
    else if (key == "train.max_epochs") max_epochs = as_int();
    else if (key == "sample.n") n_samples = as_int();
    else if (key == "sample.guidance") guidance = as_double();
    else if (key == "sbc.m") sbc_m = as_int();
    else if (key == "sbc.l") sbc_l = as_int();
    else if (key == "sbc.coverage") sbc_coverage = as_double();
    else throw ConfigError(key, "unknown config key '" + key + "'");
  }

  std::vector<std::pair<std::string, std::string>> to_key_values() const {
    const auto d = [](double x) { return io::format_double(x); };
    return {{"task", task},
            {"task.seed", std::to_string(task_seed)},
            {"seed", std::to_string(seed)},
            {"budget", std::to_string(budget)},
            {"schedule.kind", std::string(to_string(schedule_kind))},
            {"schedule.steps", std::to_string(schedule_steps)},
            {"sample.sigma", std::string(to_string(sigma))},
            {"net.blocks", std::to_string(blocks)},
            {"net.hidden", std::to_string(hidden)},
            {"train.batch", std::to_string(batch)},
            {"train.lr", d(lr)},
            {"train.lr_floor", d(lr_floor)},
            {"train.weight_decay", d(weight_decay)},
            {"train.gamma_snr", d(gamma_snr)},
            {"train.p_uncond", p_uncond ? d(*p_uncond) : std::string("auto")},
            {"train.clip_norm", d(clip_norm)},
            {"train.val_fraction", d(val_fraction)},
            {"train.patience", std::to_string(patience)},
            {"train.patience_start_epoch", std::to_string(patience_start_epoch)},
            {"train.max_epochs", std::to_string(max_epochs)},
            {"sample.n", std::to_string(n_samples)},
            {"sample.guidance", d(guidance)},
            {"sbc.m", std::to_string(sbc_m)},
            {"sbc.l", std::to_string(sbc_l)},
            {"sbc.coverage", d(sbc_coverage)}};
  }

  void validate() const {
    auto need = [](bool ok, const char* key, const std::string& why) {
      if (!ok) throw ConfigError(key, std::string("config key '") + key + "': " + why);
    };
    need(budget >= 1, "budget", "must be >= 1");
    need(schedule_steps >= 2, "schedule.steps", "must be >= 2");
    need(blocks >= 1, "net.blocks", "must be >= 1");
    need(hidden >= 2 && hidden % 2 == 0, "net.hidden", "must be even and >= 2");
    need(batch >= 1, "train.batch", "must be >= 1");
    need(lr > 0, "train.lr", "must be > 0");
    need(lr_floor > 0, "train.lr_floor", "must be > 0");
    need(weight_decay >= 0, "train.weight_decay", "must be >= 0");
    need(gamma_snr > 0, "train.gamma_snr", "must be > 0");
    need(!p_uncond || (*p_uncond >= 0 && *p_uncond <= 1), "train.p_uncond", "must lie in [0,1]");
    need(clip_norm >= 0, "train.clip_norm", "must be >= 0");
    need(val_fraction > 0 && val_fraction < 1, "train.val_fraction", "must lie in (0,1)");
    need(patience >= 1, "train.patience", "must be >= 1");
    need(patience_start_epoch >= 0, "train.patience_start_epoch", "must be >= 0");
    need(max_epochs >= 1, "train.max_epochs", "must be >= 1");
    need(n_samples >= 0, "sample.n", "must be >= 0");
    need(guidance >= 0, "sample.guidance", "must be >= 0");
    need(sbc_m >= 0, "sbc.m", "must be >= 0");
    need(sbc_l >= 1, "sbc.l", "must be >= 1");
    need(sbc_coverage > 0 && sbc_coverage < 1, "sbc.coverage", "must lie in (0,1)");
  }

  /// Builds a config from key/value pairs: table defaults of the named task
  /// first, then every other key.
  static Config from_key_values(const std::map<std::string, std::string>& kv) {
    Config c;
    if (auto it = kv.find("task"); it != kv.end()) c.set("task", it->second);
    c = for_task(c.task);
    for (const auto& [k, v] : kv) c.set(k, v);
    return c;
  }
};

}  // namespace condisim
