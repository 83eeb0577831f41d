// Copyright 2026 The grfda Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line driver for the twin experiments.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "grfda/experiment.hpp"
#include "grfda/metrics.hpp"

namespace {

using namespace grfda;

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> ell2;
  std::optional<int> n_obs;
  std::optional<int> n_particles;
  std::string out = "out";
  bool raw_crps = false;
  bool quiet = false;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "base seed: truth=N, observations=N+1, filter=N+2");
  cmd->add_option("--ell2", o.ell2, "GRF error-model ell^2");
  cmd->add_option("--n-obs", o.n_obs, "number of observations");
  cmd->add_option("--n-particles", o.n_particles, "ensemble size");
  cmd->add_option("--out", o.out, "output directory")->capture_default_str();
  cmd->add_flag("--emit-raw-crps", o.raw_crps, "also write every gridpoint CRPS value");
  cmd->add_option("--set", o.overrides, "override a configuration key (key=value), repeatable");
  cmd->add_flag("-q,--quiet", o.quiet, "do not echo the resolved configuration");
}

ExperimentConfig resolve(const CommonOptions& o) {
  ExperimentConfig c;
  if (!o.config_path.empty()) c = parse_config_file(o.config_path);
  for (const std::string& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) {
    c.truth_seed = *o.seed;
    c.obs_seed = *o.seed + 1;
    c.filter_seed = *o.seed + 2;
  }
  if (o.ell2) c.ell2 = *o.ell2;
  if (o.n_obs) c.n_obs = *o.n_obs;
  if (o.n_particles) c.n_particles = *o.n_particles;
  if (o.raw_crps) c.emit_raw_crps = true;
  c.validate();
  return c;
}

std::filesystem::path prepare_output(const CommonOptions& o, const ExperimentConfig& c) {
  const std::filesystem::path dir(o.out);
  std::filesystem::create_directories(dir);
  const std::string text =
      format_config(c) + "# derived: climatological point std = " +
      format_double(std::sqrt(climatological_point_variance(c.model))) + "\n";
  std::ofstream(dir / "config.txt") << text;
  if (!o.quiet) std::cout << "# resolved configuration\n" << text << std::flush;
  return dir;
}

void run_points(const ExperimentConfig& c, const SweepSpec& sweep, const std::filesystem::path& dir,
                bool run_pf) {
  CsvEmitter emitter(dir, c, run_pf);
  auto last = std::chrono::steady_clock::now();
  run_sweep(
      c, sweep,
      [&](const SweepPoint& p) {
        emitter(p);
        const auto now = std::chrono::steady_clock::now();
        std::fprintf(stderr, "%s=%s n_obs=%d tau2=%.3f kf_true_rmse=%.4f", to_string(sweep.axis).data(),
                     format_double(p.value).c_str(), p.config.n_obs, p.tau.tau2,
                     median(p.kf_true.rmse));
        for (const PfReplicate& rep : p.pf) {
          const PfSummary s = summarize_pf(rep.run);
          std::fprintf(stderr, " | rep %d: median_ess=%.2f rmse=%.4f crps=%.4f", rep.replicate,
                       s.median_ess, s.median_rmse_tail, s.pooled_median_crps);
        }
        std::fprintf(stderr, " (%.1fs)\n", std::chrono::duration<double>(now - last).count());
        last = now;
      },
      SweepOptions{run_pf});
  emitter.close();
}

SweepSpec single_point(const ExperimentConfig& c) {
  SweepSpec s;
  s.axis = SweepAxis::kEll2;
  s.values = {c.ell2};
  s.runs = c.sweep.runs;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle-filter twin experiments with generalized-random-field observation errors"};
  app.require_subcommand(1);

  CommonOptions opts;
  auto* truth = app.add_subcommand("truth", "simulate the truth trajectory (truth.csv)");
  auto* observe = app.add_subcommand("observe", "synthesize observations of the truth (observations.csv)");
  auto* filter = app.add_subcommand("filter", "run the particle filter at one configuration");
  auto* kalman = app.add_subcommand("kalman", "run the Kalman filter and report tau^2");
  auto* tau = app.add_subcommand("tau", "tau^2 across the configured sweep (Kalman only)");
  auto* sweep = app.add_subcommand("sweep", "particle and Kalman filters across the configured sweep");
  for (auto* cmd : {truth, observe, filter, kalman, tau, sweep}) add_common(cmd, opts);

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig c = resolve(opts);
    const std::filesystem::path dir = prepare_output(opts, c);
    if (truth->parsed()) {
      write_truth_csv(simulate_truth(c.model, c.dt, c.n_cycles, c.truth_seed), dir / "truth.csv");
    } else if (observe->parsed()) {
      const TruthRun t = simulate_truth(c.model, c.dt, c.n_cycles, c.truth_seed);
      write_observations_csv(generate_observations(t, c.observation_operator(), c.obs_error, c.obs_seed),
                             c.dt, dir / "observations.csv");
    } else if (filter->parsed()) {
      run_points(c, single_point(c), dir, true);
    } else if (kalman->parsed()) {
      run_points(c, single_point(c), dir, false);
    } else if (tau->parsed()) {
      run_points(c, c.sweep, dir, false);
    } else if (sweep->parsed()) {
      run_points(c, c.sweep, dir, true);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
