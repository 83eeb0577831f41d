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

// Sequential importance resampling with the transition proposal: members
// are forecast with the exact model, reweighted by the likelihood in the log
// domain, and resampled multinomially when the effective sample size drops
// below a fraction of the ensemble size.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "grfda/observation.hpp"
#include "grfda/rng.hpp"
#include "grfda/spectral_dynamics.hpp"

namespace grfda {

struct Ensemble {
  std::vector<SpectralField> members;
  Eigen::VectorXd log_weights;  // log of normalized weights
  int time_index = 0;

  int size() const { return static_cast<int>(members.size()); }
  /// Normalized weights; members with log-weight -inf get exactly zero.
  Eigen::VectorXd weights() const;
};

struct FilterConfig {
  int n_particles = 400;
  double resample_threshold = 0.5;  // fraction of N_e
  ErrorModel error_model = DiagonalErrorModel{};
  std::uint64_t seed = 3;

  void validate() const;
};

/// Grid values of every member, one column each.
Eigen::MatrixXd ensemble_to_grid(const Ensemble& ens);

Ensemble init_ensemble(const ModelParams& params, const FilterConfig& config, const RngStream& rng);

/// Adds `exponents` to the log-weights and renormalizes with max
/// subtraction. Throws std::runtime_error if no exponent is finite.
void reweight(Ensemble& ens, const Eigen::VectorXd& exponents);

/// -1/2 (y - Hx)^T R^{-1} (y - Hx) for every member column of `member_grids`.
Eigen::VectorXd log_likelihoods(const Eigen::MatrixXd& member_grids, const ObservationSet& obs,
                                const ErrorModel& model);

Ensemble assimilate_step(Ensemble ens, const ObservationSet& obs, const ErrorModel& model);

template <typename Derived>
double effective_sample_size(const Eigen::MatrixBase<Derived>& weights) {
  return 1.0 / weights.squaredNorm();
}
inline double effective_sample_size(const Ensemble& ens) {
  return effective_sample_size(ens.weights());
}

/// N_e indices drawn i.i.d. from the weights, one uniform per draw from `rng`.
std::vector<int> multinomial_indices(const Eigen::VectorXd& weights, RngStream& rng);

Ensemble resample_multinomial(const Ensemble& ens, RngStream& rng);

/// Truth trajectory on the cycle grid; index 0 is the initial condition.
struct TruthRun {
  ModelParams params;
  double dt = 0.04;
  std::vector<SpectralField> states;
  std::vector<GridField> grids;

  int n_cycles() const { return static_cast<int>(states.size()) - 1; }
};

TruthRun simulate_truth(const ModelParams& params, double dt, int n_cycles, std::uint64_t seed);

/// Observations for cycles 1..n_cycles; time_index equals the cycle.
std::vector<ObservationSet> generate_observations(const TruthRun& truth,
                                                  const ObservationOperator& op,
                                                  const TrueErrorModel& model, std::uint64_t seed);

struct CycleRecord {
  int cycle = 0;
  double ess = 0.0;  // after reweighting, before resampling
  bool resampled = false;
  double rmse = 0.0;
  double spread = 0.0;
  double median_crps = 0.0;
  double mean_crps = 0.0;
  double wall_seconds = 0.0;
  GridField posterior_mean;
};

struct EnsembleSnapshot {
  int cycle = 0;
  Eigen::MatrixXd member_grids;
  Eigen::VectorXd weights;
};

struct SirOptions {
  /// Keep every gridpoint CRPS value (n_grid x n_cycles).
  bool keep_crps = true;
  /// Keep Fourier coefficients of the posterior mean for mode diagnostics.
  bool keep_mean_spectra = true;
  std::optional<int> snapshot_cycle;
};

struct FilterRun {
  std::vector<CycleRecord> cycles;
  std::vector<double> crps_values;  // pooled, cycle-major
  std::vector<SpectralField> mean_spectra;
  std::optional<EnsembleSnapshot> snapshot;

  std::vector<double> ess_series() const;
  std::vector<double> rmse_series() const;
};

/// Full assimilation loop: forecast by truth.dt, reweight, record metrics on
/// the weighted ensemble, then resample iff ESS < threshold * N_e.
FilterRun run_sir(const TruthRun& truth, const std::vector<ObservationSet>& observations,
                  const FilterConfig& config, const SirOptions& options = {});

}  // namespace grfda
