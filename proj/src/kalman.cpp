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

#include "grfda/kalman.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "grfda/fft.hpp"
#include "grfda/metrics.hpp"

namespace grfda {
namespace {

Eigen::MatrixXd circulant(const Eigen::VectorXd& column) {
  const Eigen::Index n = column.size();
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) out(i, j) = column[(i - j + n) % n];
  }
  return out;
}

// Grid covariance whose Fourier coefficients have variances `mode_var`
// (k = 0..n/2): Cov(u_i, u_j) = sum_k var_k e^{i k (x_i - x_j)}.
Eigen::MatrixXd covariance_from_mode_variances(const Eigen::VectorXd& mode_var, int n) {
  return circulant(fft::circulant_column(mode_var * static_cast<double>(n), n));
}

}  // namespace

GaussianState stationary_state(const ModelParams& params) {
  params.validate();
  const int n = params.n_grid;
  Eigen::VectorXd var(n / 2 + 1);
  for (int k = 0; k <= n / 2; ++k) var[k] = stationary_variance(k, params);
  return {Eigen::VectorXd::Zero(n), covariance_from_mode_variances(var, n)};
}

GaussianState kf_forecast(GaussianState state, double dt, const ModelParams& params) {
  if (dt < 0.0) throw std::invalid_argument("forecast step dt must be nonnegative");
  const int n = params.n_grid;
  if (state.mean.size() != n || state.covariance.rows() != n || state.covariance.cols() != n) {
    throw std::invalid_argument("Gaussian state does not match the model grid");
  }
  if (dt == 0.0) return state;
  const Propagator prop(params, dt);
  const Eigen::VectorXcd& a = prop.decay_factors();

  Eigen::MatrixXd mean = state.mean;
  fft::apply_circulant_to_columns(mean, a);
  state.mean = mean.col(0);

  Eigen::MatrixXd& p = state.covariance;
  fft::apply_circulant_to_columns(p, a);  // A P
  p.transposeInPlace();                   // P A^T
  fft::apply_circulant_to_columns(p, a);  // A P A^T (transposed, symmetric)
  p += covariance_from_mode_variances(prop.noise_scales().array().square().matrix(), n);
  return state;
}

GaussianState kf_update(GaussianState state, const ObservationSet& obs, const Eigen::MatrixXd& r) {
  const ObservationOperator& op = obs.op;
  const int n_obs = op.n_obs();
  if (r.rows() != n_obs || r.cols() != n_obs || obs.values.size() != n_obs) {
    throw std::invalid_argument("kf_update: observation dimensions are inconsistent");
  }
  if (state.covariance.rows() != op.n_grid() || state.mean.size() != op.n_grid()) {
    throw std::invalid_argument("kf_update: state does not match the observation operator");
  }
  Eigen::MatrixXd& p = state.covariance;
  Eigen::MatrixXd pht(p.rows(), n_obs);  // P H^T
  for (int j = 0; j < n_obs; ++j) pht.col(j) = p.col(op.grid_index(j));
  Eigen::MatrixXd innov_cov = r;  // R + H P H^T
  for (int i = 0; i < n_obs; ++i) innov_cov.row(i) += pht.row(op.grid_index(i));

  const Eigen::LLT<Eigen::MatrixXd> llt(innov_cov);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("kf_update: innovation covariance is not positive definite");
  }
  const Eigen::VectorXd innovation = obs.values - op.apply(state.mean);
  state.mean += pht * llt.solve(innovation);

  // (I - K H) P = P - (P H^T L^{-T})(P H^T L^{-T})^T, symmetric by construction.
  const Eigen::MatrixXd w = llt.matrixL().solve(pht.transpose()).transpose();
  p.selfadjointView<Eigen::Lower>().rankUpdate(w, -1.0);
  p.triangularView<Eigen::StrictlyUpper>() = p.transpose();
  return state;
}

GaussianState kf_update(GaussianState state, const ObservationSet& obs, const ErrorModel& model) {
  return kf_update(std::move(state), obs, covariance_matrix(model));
}

AliasedGaussianState::AliasedGaussianState(const ModelParams& params, int n_obs)
    : mean_(params.n_grid) {
  params.validate();
  const int n = params.n_grid;
  if (n_obs < 1 || n % n_obs != 0) {
    throw std::invalid_argument("n_obs=" + std::to_string(n_obs) + " does not divide n_grid=" +
                                std::to_string(n));
  }
  const int size = n / n_obs;
  blocks_.resize(n_obs);
  for (int m = 0; m < n_obs; ++m) {
    Eigen::VectorXd var(size);
    for (int j = 0; j < size; ++j) {
      var[j] = stationary_variance(SpectralField::wavenumber_at(m + j * n_obs, n), params);
    }
    blocks_[m] = var.cast<std::complex<double>>().asDiagonal();
  }
}

void AliasedGaussianState::forecast(const Propagator& step) {
  const int n = n_grid();
  const int n_obs = this->n_obs();
  const Eigen::VectorXcd& a = step.decay_factors();
  const Eigen::VectorXd& sd = step.noise_scales();
  if (a.size() != n / 2 + 1) throw std::invalid_argument("propagator does not match the state");
  auto& c = mean_.coefficients();
  for (int i = 0; i <= n / 2; ++i) c[i] *= a[i];
  mean_.mirror_negative_modes();

  const int size = n / n_obs;
  Eigen::VectorXcd d(size);
  Eigen::VectorXd q(size);
  for (int m = 0; m < n_obs; ++m) {
    for (int j = 0; j < size; ++j) {
      const int i = m + j * n_obs;
      d[j] = i <= n / 2 ? a[i] : std::conj(a[n - i]);
      q[j] = sd[std::min(i, n - i)] * sd[std::min(i, n - i)];
    }
    Eigen::MatrixXcd& cov = blocks_[m];
    cov = d.asDiagonal() * cov * d.conjugate().asDiagonal();
    cov.diagonal() += q.cast<std::complex<double>>();
  }
}

void AliasedGaussianState::update(const Eigen::VectorXd& y, const Eigen::VectorXd& r_eig) {
  const int n = n_grid();
  const int n_obs = this->n_obs();
  if (y.size() != n_obs || r_eig.size() != n_obs) {
    throw std::invalid_argument("observation dimensions are inconsistent with the state");
  }
  const Eigen::VectorXcd y_half = fft::forward_half(y) / static_cast<double>(n_obs);
  auto& c = mean_.coefficients();
  const int size = n / n_obs;
  for (int m = 0; m < n_obs; ++m) {
    const std::complex<double> y_hat =
        m <= n_obs / 2 ? y_half[m] : std::conj(y_half[n_obs - m]);
    Eigen::MatrixXcd& cov = blocks_[m];
    const Eigen::VectorXcd gain = cov.rowwise().sum();  // C 1
    const double innov_var = gain.sum().real() + r_eig[m] / n_obs;
    if (!(innov_var > 0.0)) {
      throw std::runtime_error("innovation variance is not positive for alias class " +
                               std::to_string(m));
    }
    std::complex<double> predicted = 0.0;
    for (int j = 0; j < size; ++j) predicted += c[m + j * n_obs];
    const std::complex<double> step = (y_hat - predicted) / innov_var;
    for (int j = 0; j < size; ++j) c[m + j * n_obs] += gain[j] * step;
    cov.noalias() -= gain * gain.adjoint() / innov_var;
  }
  c[0] = c[0].real();
  c[n / 2] = c[n / 2].real();
  mean_.mirror_negative_modes();
}

double AliasedGaussianState::grid_trace() const {
  double total = 0.0;
  for (const auto& b : blocks_) total += b.diagonal().real().sum();
  return total * n_grid();
}

Eigen::MatrixXd AliasedGaussianState::observed_covariance() const {
  const int n_obs = this->n_obs();
  Eigen::VectorXd s(n_obs);
  for (int m = 0; m < n_obs; ++m) s[m] = blocks_[m].sum().real();
  Eigen::VectorXd column(n_obs);
  for (int d = 0; d < n_obs; ++d) {
    double total = 0.0;
    for (int m = 0; m < n_obs; ++m) {
      total += s[m] * std::cos(2.0 * std::numbers::pi * static_cast<double>(m * d) / n_obs);
    }
    column[d] = total;
  }
  return circulant(column);
}

GaussianState AliasedGaussianState::to_grid() const {
  const int n = n_grid();
  const int n_obs = this->n_obs();
  const int size = n / n_obs;
  // F(x, k) = e^{i kappa_k x}; only the integer wavenumber matters on the grid.
  Eigen::MatrixXcd f(n, n);
  for (int k = 0; k < n; ++k) {
    const int wn = SpectralField::wavenumber_at(k, n);
    for (int x = 0; x < n; ++x) {
      f(x, k) = std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(wn) * x / n);
    }
  }
  Eigen::MatrixXcd full = Eigen::MatrixXcd::Zero(n, n);
  for (int m = 0; m < n_obs; ++m)
    for (int a = 0; a < size; ++a)
      for (int b = 0; b < size; ++b) full(m + a * n_obs, m + b * n_obs) = blocks_[m](a, b);
  GaussianState out;
  out.mean = spectral_to_grid(mean_);
  out.covariance = (f * full * f.adjoint()).real();
  return out;
}

namespace {

Eigen::MatrixXd observed_block(const Eigen::MatrixXd& cov, const ObservationOperator& op) {
  const int n_obs = op.n_obs();
  Eigen::MatrixXd out(n_obs, n_obs);
  for (int i = 0; i < n_obs; ++i)
    for (int j = 0; j < n_obs; ++j) out(i, j) = cov(op.grid_index(i), op.grid_index(j));
  return out;
}

void check_alignment(const TruthRun& truth, const std::vector<ObservationSet>& observations) {
  if (static_cast<int>(observations.size()) != truth.n_cycles()) {
    throw std::invalid_argument("need one observation set per assimilation cycle");
  }
  for (int c = 1; c <= truth.n_cycles(); ++c) {
    if (observations[c - 1].time_index != c) {
      throw std::invalid_argument("observation time index misaligned at cycle " +
                                  std::to_string(c));
    }
  }
}

KalmanRun run_kf_dense(const TruthRun& truth, const std::vector<ObservationSet>& observations,
                       const ErrorModel& model) {
  const Eigen::MatrixXd r = covariance_matrix(model);
  KalmanRun run;
  GaussianState state = stationary_state(truth.params);
  for (int c = 1; c <= truth.n_cycles(); ++c) {
    const ObservationSet& obs = observations[c - 1];
    state = kf_forecast(std::move(state), truth.dt, truth.params);
    run.prior_trace.push_back(state.covariance.trace());
    if (c == truth.n_cycles()) run.final_prior_observed = observed_block(state.covariance, obs.op);
    state = kf_update(std::move(state), obs, r);
    run.posterior_trace.push_back(state.covariance.trace());
    if (c == truth.n_cycles()) {
      run.final_posterior_observed = observed_block(state.covariance, obs.op);
    }
    run.rmse.push_back(rmse(state.mean, truth.grids[c]));
    run.mean_spectra.push_back(grid_to_spectral(state.mean));
    run.means.push_back(state.mean);
  }
  return run;
}

KalmanRun run_kf_aliased(const TruthRun& truth, const std::vector<ObservationSet>& observations,
                         const Eigen::VectorXd& r_eig) {
  KalmanRun run;
  run.used_aliased_blocks = true;
  AliasedGaussianState state(truth.params, static_cast<int>(r_eig.size()));
  const Propagator step(truth.params, truth.dt);
  for (int c = 1; c <= truth.n_cycles(); ++c) {
    state.forecast(step);
    run.prior_trace.push_back(state.grid_trace());
    if (c == truth.n_cycles()) run.final_prior_observed = state.observed_covariance();
    state.update(observations[c - 1].values, r_eig);
    run.posterior_trace.push_back(state.grid_trace());
    if (c == truth.n_cycles()) run.final_posterior_observed = state.observed_covariance();
    GridField mean = spectral_to_grid(state.mean());
    run.rmse.push_back(rmse(mean, truth.grids[c]));
    run.mean_spectra.push_back(state.mean());
    run.means.push_back(std::move(mean));
  }
  return run;
}

}  // namespace

KalmanRun run_kf(const TruthRun& truth, const std::vector<ObservationSet>& observations,
                 const ErrorModel& model, const KalmanOptions& options) {
  check_alignment(truth, observations);
  for (const auto& obs : observations) {
    if (obs.op.n_grid() != truth.params.n_grid || obs.op.n_obs() != error_model_size(model)) {
      throw std::invalid_argument("observation network does not match the model or error model");
    }
  }
  if (!options.force_dense) {
    if (auto r_eig = circulant_spectrum(model)) return run_kf_aliased(truth, observations, *r_eig);
  }
  return run_kf_dense(truth, observations, model);
}

ModePosterior mode_posterior_stats(double sigma2, double gamma2, std::complex<double> prior_mean,
                                   std::complex<double> observed) {
  if (!(sigma2 >= 0.0) || !(gamma2 >= 0.0)) {
    throw std::invalid_argument("mode variances must be nonnegative");
  }
  if (std::isinf(gamma2)) return {prior_mean, sigma2};
  if (sigma2 + gamma2 == 0.0) return {prior_mean, 0.0};
  if (std::isinf(sigma2)) return {observed, gamma2};
  const double gain = sigma2 / (sigma2 + gamma2);
  return {prior_mean + gain * (observed - prior_mean), sigma2 * gamma2 / (sigma2 + gamma2)};
}

TauReport tau_from_eigenvalues(Eigen::VectorXd lambda2) {
  TauReport rep;
  lambda2 = lambda2.cwiseMax(0.0);
  std::sort(lambda2.begin(), lambda2.end());
  rep.tau2 = (lambda2.array() * (1.5 * lambda2.array() + 1.0)).sum();
  rep.lambda2 = std::move(lambda2);
  rep.required_ensemble = std::exp(rep.tau2 / 2.0);
  rep.log10_required_ensemble = rep.tau2 / (2.0 * std::log(10.0));
  return rep;
}

TauReport snyder_tau_squared_observed(const Eigen::MatrixXd& observed_cov,
                                      const ErrorModel& model) {
  const int n_obs = error_model_size(model);
  if (observed_cov.rows() != n_obs || observed_cov.cols() != n_obs) {
    throw std::invalid_argument("error model size does not match the observation count");
  }
  const Eigen::MatrixXd hph = 0.5 * (observed_cov + observed_cov.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> prior_eig(hph, Eigen::EigenvaluesOnly);
  const double scale = prior_eig.eigenvalues().cwiseAbs().maxCoeff();
  if (prior_eig.eigenvalues().minCoeff() < -1e-10 * scale) {
    throw std::invalid_argument("prior covariance is not positive semidefinite");
  }

  const Eigen::MatrixXd r_isqrt = inverse_sqrt_matrix(model);
  Eigen::MatrixXd m = r_isqrt * hph * r_isqrt;
  m = 0.5 * (m + m.transpose()).eval();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return tau_from_eigenvalues(es.eigenvalues());
}

TauReport snyder_tau_squared(const Eigen::MatrixXd& prior_cov, const ObservationOperator& op,
                             const ErrorModel& model) {
  if (prior_cov.rows() != op.n_grid() || prior_cov.cols() != op.n_grid()) {
    throw std::invalid_argument("prior covariance does not match the observation operator");
  }
  if (error_model_size(model) != op.n_obs()) {
    throw std::invalid_argument("error model size does not match the observation count");
  }
  return snyder_tau_squared_observed(observed_block(prior_cov, op), model);
}

double PowerLaw::operator()(double k) const { return coefficient * std::pow(k, exponent); }

namespace {

// int_1^n c k^p dk
double power_integral(double c, double p, double n) {
  if (p == -1.0) return c * std::log(n);
  return c * (std::pow(n, p + 1.0) - 1.0) / (p + 1.0);
}

}  // namespace

PowerLawTau powerlaw_tau(const PowerLaw& sigma2, const PowerLaw& gamma2, int n_obs) {
  if (n_obs < 1) throw std::invalid_argument("n_obs must be positive");
  if (!(sigma2.coefficient > 0.0) || !(gamma2.coefficient > 0.0)) {
    throw std::invalid_argument("power-law spectra must be positive");
  }
  PowerLawTau out;
  for (int k = 1; k <= n_obs; ++k) {
    const double l2 = sigma2(k) / gamma2(k);
    out.discrete_sum += l2 * (1.5 * l2 + 1.0);
  }
  // lambda^2 = c k^p, so lambda^2 (1.5 lambda^2 + 1) = 1.5 c^2 k^{2p} + c k^p.
  const double c = sigma2.coefficient / gamma2.coefficient;
  const double p = sigma2.exponent - gamma2.exponent;
  out.integral = power_integral(1.5 * c * c, 2.0 * p, n_obs) + power_integral(c, p, n_obs);
  return out;
}

}  // namespace grfda
