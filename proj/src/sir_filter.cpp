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

#include "grfda/sir_filter.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <stdexcept>
#include <string>

#include "grfda/fft.hpp"
#include "grfda/metrics.hpp"

namespace grfda {

void FilterConfig::validate() const {
  if (n_particles < 1) throw std::invalid_argument("filter.n_particles must be >= 1");
  if (!(resample_threshold > 0.0 && resample_threshold <= 1.0)) {
    throw std::invalid_argument("filter.resample_threshold must lie in (0, 1]");
  }
}

namespace {

// Scalar exp: Eigen's vectorized exp flushes -inf to a denormal, not zero.
Eigen::VectorXd exact_exp(const Eigen::VectorXd& v) {
  return v.unaryExpr([](double x) { return std::exp(x); });
}

}  // namespace

Eigen::VectorXd Ensemble::weights() const { return exact_exp(log_weights); }

Eigen::MatrixXd ensemble_to_grid(const Ensemble& ens) {
  if (ens.members.empty()) return {};
  const int n = ens.members.front().n_grid();
  Eigen::MatrixXd out(n, ens.size());
  for (int i = 0; i < ens.size(); ++i) {
    const SpectralField& m = ens.members[i];
    if (m.n_grid() != n) throw std::invalid_argument("ensemble members differ in size");
    fft::synthesize_half(m.coefficients().data(), out.col(i).data(), n);
  }
  return out;
}

Ensemble init_ensemble(const ModelParams& params, const FilterConfig& config, const RngStream& rng) {
  config.validate();
  Ensemble ens;
  ens.members.reserve(config.n_particles);
  for (int i = 0; i < config.n_particles; ++i) {
    RngStream member_rng = rng.substream(static_cast<std::uint64_t>(i));
    ens.members.push_back(sample_stationary(params, member_rng));
  }
  ens.log_weights = Eigen::VectorXd::Constant(config.n_particles, -std::log(config.n_particles));
  return ens;
}

void reweight(Ensemble& ens, const Eigen::VectorXd& exponents) {
  if (exponents.size() != ens.log_weights.size()) {
    throw std::invalid_argument("one likelihood exponent per member is required");
  }
  Eigen::VectorXd lw = ens.log_weights + exponents;
  double top = -std::numeric_limits<double>::infinity();
  for (double v : lw) {
    if (std::isnan(v)) throw std::runtime_error("likelihood exponent is NaN");
    top = std::max(top, v);
  }
  if (!std::isfinite(top)) throw std::runtime_error("all likelihood exponents are -inf");
  lw.array() -= top;
  const double log_total = std::log(exact_exp(lw).sum());
  ens.log_weights = lw.array() - log_total;
}

Eigen::VectorXd log_likelihoods(const Eigen::MatrixXd& member_grids, const ObservationSet& obs,
                                const ErrorModel& model) {
  if (error_model_size(model) != obs.op.n_obs()) {
    throw std::invalid_argument("error model size does not match the observation count");
  }
  if (member_grids.rows() != obs.op.n_grid()) {
    throw std::invalid_argument("member grid length does not match the observation operator");
  }
  Eigen::VectorXd out(member_grids.cols());
  for (Eigen::Index i = 0; i < member_grids.cols(); ++i) {
    const Eigen::VectorXd innovation = obs.values - obs.op.apply(member_grids.col(i));
    out[i] = -0.5 * quadratic_form(model, innovation);
  }
  return out;
}

Ensemble assimilate_step(Ensemble ens, const ObservationSet& obs, const ErrorModel& model) {
  reweight(ens, log_likelihoods(ensemble_to_grid(ens), obs, model));
  ens.time_index = obs.time_index;
  return ens;
}

std::vector<int> multinomial_indices(const Eigen::VectorXd& weights, RngStream& rng) {
  const Eigen::Index n = weights.size();
  std::vector<double> cdf(n);
  double running = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    running += weights[i];
    cdf[i] = running;
  }
  std::vector<int> out(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double u = rng.uniform() * running;
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    out[j] = static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(), n - 1));
  }
  return out;
}

Ensemble resample_multinomial(const Ensemble& ens, RngStream& rng) {
  const std::vector<int> idx = multinomial_indices(ens.weights(), rng);
  Ensemble out;
  out.members.reserve(idx.size());
  for (int i : idx) out.members.push_back(ens.members[i]);
  out.log_weights = Eigen::VectorXd::Constant(ens.size(), -std::log(ens.size()));
  out.time_index = ens.time_index;
  return out;
}

TruthRun simulate_truth(const ModelParams& params, double dt, int n_cycles, std::uint64_t seed) {
  params.validate();
  if (n_cycles < 0) throw std::invalid_argument("n_cycles must be nonnegative");
  const RngStream base(seed, StreamPurpose::kTruth);
  TruthRun run{params, dt, {}, {}};
  RngStream init_rng = base.substream(0);
  run.states.push_back(sample_stationary(params, init_rng));
  const Propagator step(params, dt);
  for (int c = 1; c <= n_cycles; ++c) {
    SpectralField next = run.states.back();
    RngStream rng = base.substream(static_cast<std::uint64_t>(c));
    step.advance(next, rng);
    run.states.push_back(std::move(next));
  }
  for (const auto& s : run.states) run.grids.push_back(spectral_to_grid(s));
  return run;
}

std::vector<ObservationSet> generate_observations(const TruthRun& truth,
                                                  const ObservationOperator& op,
                                                  const TrueErrorModel& model, std::uint64_t seed) {
  const CorrelatedNoise noise(op, model);
  const RngStream base =
      RngStream(seed, StreamPurpose::kObservation).substream(static_cast<std::uint64_t>(op.n_obs()));
  std::vector<ObservationSet> out;
  for (int c = 1; c <= truth.n_cycles(); ++c) {
    RngStream rng = base.substream(static_cast<std::uint64_t>(c));
    out.push_back(observe_truth(truth.grids[c], op, noise, rng, c));
  }
  return out;
}

std::vector<double> FilterRun::ess_series() const {
  std::vector<double> out;
  for (const auto& c : cycles) out.push_back(c.ess);
  return out;
}

std::vector<double> FilterRun::rmse_series() const {
  std::vector<double> out;
  for (const auto& c : cycles) out.push_back(c.rmse);
  return out;
}

FilterRun run_sir(const TruthRun& truth, const std::vector<ObservationSet>& observations,
                  const FilterConfig& config, const SirOptions& options) {
  config.validate();
  const ModelParams& params = truth.params;
  if (static_cast<int>(observations.size()) != truth.n_cycles()) {
    throw std::invalid_argument("need one observation set per assimilation cycle");
  }
  for (int c = 1; c <= truth.n_cycles(); ++c) {
    const ObservationSet& obs = observations[c - 1];
    if (obs.time_index != c) {
      throw std::invalid_argument("observation time index " + std::to_string(obs.time_index) +
                                  " does not match cycle " + std::to_string(c));
    }
    if (obs.op.n_grid() != params.n_grid || obs.values.size() != obs.op.n_obs()) {
      throw std::invalid_argument("observation dimensions do not match the model grid");
    }
  }

  const RngStream init_rng(config.seed, StreamPurpose::kEnsembleInit);
  const RngStream forecast_rng(config.seed, StreamPurpose::kForecast);
  const RngStream resample_rng(config.seed, StreamPurpose::kResample);
  const Propagator step(params, truth.dt);

  Ensemble ens = init_ensemble(params, config, init_rng);
  FilterRun run;
  if (options.keep_crps) run.crps_values.reserve(static_cast<std::size_t>(params.n_grid) * truth.n_cycles());

  for (int c = 1; c <= truth.n_cycles(); ++c) {
    const auto t0 = std::chrono::steady_clock::now();
    const RngStream cycle_rng = forecast_rng.substream(static_cast<std::uint64_t>(c));
    for (int i = 0; i < ens.size(); ++i) {
      RngStream member_rng = cycle_rng.substream(static_cast<std::uint64_t>(i));
      step.advance(ens.members[i], member_rng);
    }
    ens.time_index = c;

    const Eigen::MatrixXd grids = ensemble_to_grid(ens);
    reweight(ens, log_likelihoods(grids, observations[c - 1], config.error_model));
    const Eigen::VectorXd w = ens.weights();

    CycleRecord rec;
    rec.cycle = c;
    rec.ess = effective_sample_size(w);
    if (std::isnan(rec.ess)) throw std::runtime_error("ESS is NaN at cycle " + std::to_string(c));
    rec.posterior_mean = weighted_mean(grids, w);
    rec.rmse = rmse(rec.posterior_mean, truth.grids[c]);
    rec.spread = ensemble_spread(grids, w);
    const Eigen::VectorXd crps = crps_field(grids, w, truth.grids[c]);
    rec.mean_crps = crps.mean();
    rec.median_crps = median(std::vector<double>(crps.begin(), crps.end()));
    if (options.keep_crps) run.crps_values.insert(run.crps_values.end(), crps.begin(), crps.end());
    if (options.keep_mean_spectra) run.mean_spectra.push_back(grid_to_spectral(rec.posterior_mean));
    if (options.snapshot_cycle && *options.snapshot_cycle == c) {
      run.snapshot = EnsembleSnapshot{c, grids, w};
    }

    if (rec.ess < config.resample_threshold * ens.size()) {
      RngStream rng = resample_rng.substream(static_cast<std::uint64_t>(c));
      ens = resample_multinomial(ens, rng);
      rec.resampled = true;
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    run.cycles.push_back(std::move(rec));
  }
  return run;
}

}  // namespace grfda
