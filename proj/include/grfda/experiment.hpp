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

// Twin-experiment orchestration: configuration, seeded truth/observation
// generation, particle-filter and Kalman runs, parameter sweeps and CSV
// output.
//
// Configuration files are flat `key = value` lines with dotted namespaces
// (model.*, time.*, obs.*, filter.*, grf.*, seed.*, sweep.*, output.*);
// `#` starts a comment. Missing keys keep their defaults and unknown keys are
// rejected. format_config() prints the fully resolved configuration in the
// same syntax.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "grfda/kalman.hpp"
#include "grfda/observation.hpp"
#include "grfda/sir_filter.hpp"
#include "grfda/spectral_dynamics.hpp"

namespace grfda {

/// Error covariance assumed by the filters.
enum class FilterErrorKind { kGrf, kDiagonal, kTrue };

enum class SweepAxis { kEll2, kNObs, kNParticles };

struct SweepSpec {
  SweepAxis axis = SweepAxis::kEll2;
  std::vector<double> values;  // defaults to 101 points on [0, 1]
  int runs = 1;                // filter replicates per value

  SweepSpec();
  void validate() const;
};

struct ExperimentConfig {
  ModelParams model;
  double dt = 0.04;
  int n_cycles = 100;

  int n_obs = 64;
  TrueErrorModel obs_error;

  int n_particles = 400;
  double resample_threshold = 0.5;
  FilterErrorKind error_kind = FilterErrorKind::kGrf;

  double ell2 = 0.0;
  double kappa = 1.0;
  double r0 = 0.36;

  std::uint64_t truth_seed = 1;
  std::uint64_t obs_seed = 2;
  std::uint64_t filter_seed = 3;

  SweepSpec sweep;

  int snapshot_cycle = 100;  // 0 disables snapshots
  int snapshot_members = 10;  // highest-weight members written
  std::vector<double> snapshot_ell2 = {0.0, 1.0};
  bool emit_raw_crps = false;
  int mode_rmse_modes = 50;

  /// Throws std::invalid_argument naming the violated constraint.
  void validate() const;
  ObservationOperator observation_operator() const;
  ErrorModel filter_error_model(const ObservationOperator& op) const;
  FilterConfig filter_config(const ObservationOperator& op, int replicate = 0) const;
  /// Whether runs at this configuration record an ensemble snapshot.
  bool wants_snapshot() const;
};

/// Sets one key; throws std::invalid_argument for unknown keys or bad values.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);

/// Parses `key = value` lines. Errors carry `source:line:`.
ExperimentConfig parse_config(std::istream& in, std::string_view source = "<config>");
ExperimentConfig parse_config_file(const std::filesystem::path& path);

/// Resolved configuration, one `key = value` per line, re-parseable.
std::string format_config(const ExperimentConfig& config);

/// "a,b,c" or "start:stop:count" (count equally spaced points, inclusive).
std::vector<double> parse_value_list(std::string_view text);

/// Shortest round-trip decimal form, locale independent.
std::string format_double(double value);

std::string_view to_string(FilterErrorKind kind);
std::string_view to_string(SweepAxis axis);

// ---------------------------------------------------------------------------

/// Per-run scalar diagnostics of a particle-filter run.
struct PfSummary {
  double median_ess = 0.0;
  double mean_ess = 0.0;
  int resample_count = 0;
  double median_rmse_tail = 0.0;  // cycles after the first `skip`
  double median_rmse = 0.0;
  double spread_rmse_ratio = 0.0;  // sum of spread / sum of RMSE
  double pooled_median_crps = 0.0;
  double pooled_mean_crps = 0.0;
};

PfSummary summarize_pf(const FilterRun& run, int skip = 10);

struct PfReplicate {
  int replicate = 0;
  std::uint64_t seed = 0;
  FilterRun run;
};

/// Everything computed for one sweep value. References stay valid only
/// for the duration of the sink call.
struct SweepPoint {
  double value = 0.0;
  const ExperimentConfig& config;
  const TruthRun& truth;
  const std::vector<ObservationSet>& observations;
  /// Kalman filter with the true error covariance; shared across points
  /// with the same N_y, `kf_true_is_new` marks its first appearance.
  const KalmanRun& kf_true;
  bool kf_true_is_new = false;
  /// Kalman filter with the filter's error model, and tau^2 from its last
  /// forecast (prior) and analysis (posterior) covariances.
  KalmanRun kf_model;
  TauReport tau;
  TauReport tau_posterior;
  std::vector<PfReplicate> pf;
};

using PointSink = std::function<void(const SweepPoint&)>;

struct SweepOptions {
  bool run_pf = true;
};

/// Runs the sweep value by value. Truth is simulated once; observations once
/// per N_y; all runs with the same N_y assimilate the same observations.
void run_sweep(const ExperimentConfig& config, const SweepSpec& sweep, const PointSink& sink,
               const SweepOptions& options = {});

/// The experiment at `config` alone: a one-point sweep at its own ell2.
void run_experiment(const ExperimentConfig& config, const PointSink& sink,
                    const SweepOptions& options = {});

/// Writes tau2.csv, mode_rmse.csv, ess.csv, rmse.csv, crps.csv, summary.csv,
/// snapshots.csv (and crps_raw.csv on request) into `dir`. Files appear
/// atomically when the writer is closed.
class CsvEmitter {
 public:
  CsvEmitter(const std::filesystem::path& dir, const ExperimentConfig& config, bool include_pf);
  ~CsvEmitter();
  CsvEmitter(const CsvEmitter&) = delete;
  CsvEmitter& operator=(const CsvEmitter&) = delete;

  void operator()(const SweepPoint& point);
  /// Renames the temporary files into place; called by the destructor if needed.
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

void sweep_and_emit(const ExperimentConfig& config, const SweepSpec& sweep,
                    const std::filesystem::path& dir, const SweepOptions& options = {});

void write_truth_csv(const TruthRun& truth, const std::filesystem::path& path);
void write_observations_csv(const std::vector<ObservationSet>& observations, double dt,
                            const std::filesystem::path& path);

}  // namespace grfda
