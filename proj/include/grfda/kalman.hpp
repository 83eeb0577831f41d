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

// Exact Kalman filter for the linear-Gaussian testbed and the
// effective-dimension diagnostic tau^2 = sum lambda^2 (3/2 lambda^2 + 1),
// where lambda^2 are eigenvalues of R^{-1/2} H P H^T R^{-1/2}.

#pragma once

#include <complex>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "grfda/observation.hpp"
#include "grfda/sir_filter.hpp"
#include "grfda/spectral_dynamics.hpp"

namespace grfda {

/// Grid-space mean and covariance.
struct GaussianState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Zero mean with the climatological (circulant) covariance.
GaussianState stationary_state(const ModelParams& params);

/// Exact linear propagation: mean by the decay factors, covariance
/// A P A^T + Q with A and Q Fourier-diagonal, applied through FFTs.
GaussianState kf_forecast(GaussianState state, double dt, const ModelParams& params);

GaussianState kf_update(GaussianState state, const ObservationSet& obs, const ErrorModel& model);
GaussianState kf_update(GaussianState state, const ObservationSet& obs, const Eigen::MatrixXd& r);

/// Fourier-space Gaussian state for point observations at a uniform stride
/// with a circulant error covariance.
///
/// On the observation grid, wavenumbers k and k + j N_y are indistinguishable,
/// and neither the dynamics nor a circulant R couples different residues
/// m = k mod N_y. The coefficient covariance therefore stays block-diagonal
/// with N_y blocks of size n/N_y, and the grid-space update
/// P - P H^T (R + H P H^T)^{-1} H P decouples into one scalar observation
/// per block: with s_m = 1^T C_m 1 and observed coefficient yhat_m,
///   C_m <- C_m - (C_m 1)(C_m 1)^H / (s_m + r_m / N_y).
/// This is algebraically identical to the dense grid-space filter.
class AliasedGaussianState {
 public:
  /// Zero mean with the climatological covariance.
  AliasedGaussianState(const ModelParams& params, int n_obs);

  int n_grid() const { return mean_.n_grid(); }
  int n_obs() const { return static_cast<int>(blocks_.size()); }
  const SpectralField& mean() const { return mean_; }
  /// Covariance of (uhat_{m}, uhat_{m + N_y}, ...) in FFT index order.
  const Eigen::MatrixXcd& block(int m) const { return blocks_[m]; }

  void forecast(const Propagator& step);
  /// `r_eig` are the circulant eigenvalues of R (see circulant_spectrum).
  void update(const Eigen::VectorXd& y, const Eigen::VectorXd& r_eig);

  /// sum_i Var(u(x_i)) over the model grid.
  double grid_trace() const;
  /// H P H^T, an N_y x N_y circulant matrix.
  Eigen::MatrixXd observed_covariance() const;
  /// Dense grid-space equivalent; O(n^3), meant for small grids.
  GaussianState to_grid() const;

 private:
  SpectralField mean_;
  std::vector<Eigen::MatrixXcd> blocks_;
};

struct KalmanOptions {
  /// Use the dense grid-space filter even when R is circulant.
  bool force_dense = false;
};

struct KalmanRun {
  std::vector<GridField> means;  // posterior, cycles 1..n
  std::vector<double> rmse;
  std::vector<double> prior_trace;
  std::vector<double> posterior_trace;
  /// H P H^T for the forecast and analysis covariances of the last cycle.
  Eigen::MatrixXd final_prior_observed;
  Eigen::MatrixXd final_posterior_observed;
  std::vector<SpectralField> mean_spectra;
  bool used_aliased_blocks = false;
};

/// Alternates forecast / update from the stationary prior over the
/// observation cycles; keeps the last forecast covariance (observed part)
/// for tau^2. Uses AliasedGaussianState when R is circulant.
KalmanRun run_kf(const TruthRun& truth, const std::vector<ObservationSet>& observations,
                 const ErrorModel& model, const KalmanOptions& options = {});

struct ModePosterior {
  std::complex<double> mean;
  double variance = 0.0;
};

/// Posterior of one Fourier mode with prior variance sigma2 and observation
/// error variance gamma2 (may be +infinity).
ModePosterior mode_posterior_stats(double sigma2, double gamma2, std::complex<double> prior_mean,
                                   std::complex<double> observed);

struct TauReport {
  Eigen::VectorXd lambda2;  // ascending
  double tau2 = 0.0;
  double required_ensemble = 1.0;  // exp(tau2 / 2)
  double log10_required_ensemble = 0.0;
};

/// tau^2 from eigenvalues, clipping roundoff negatives to zero.
TauReport tau_from_eigenvalues(Eigen::VectorXd lambda2);

/// tau^2 for the grid-space prior covariance observed through `op` with error model `model`.
/// Throws std::invalid_argument if H P H^T has an eigenvalue below -1e-10 * ||H P H^T||.
TauReport snyder_tau_squared(const Eigen::MatrixXd& prior_cov, const ObservationOperator& op,
                             const ErrorModel& model);
/// Same, starting from the observed prior covariance H P H^T.
TauReport snyder_tau_squared_observed(const Eigen::MatrixXd& observed_cov, const ErrorModel& model);

/// coefficient * k^exponent.
struct PowerLaw {
  double coefficient = 1.0;
  double exponent = 0.0;
  double operator()(double k) const;
};

struct PowerLawTau {
  double discrete_sum = 0.0;  // sum_{k=1}^{N_y}
  double integral = 0.0;      // int_1^{N_y} dk
};

/// tau^2 for lambda_k^2 = sigma2(k) / gamma2(k) with power-law spectra.
PowerLawTau powerlaw_tau(const PowerLaw& sigma2, const PowerLaw& gamma2, int n_obs);

}  // namespace grfda
