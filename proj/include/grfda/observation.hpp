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

// Observation network, the correlated error model used to synthesize
// observations, and the generalized-random-field (GRF) error model used for
// assimilation.
//
// The GRF covariance is R = r0 C with C a discretization of
// (1 - ell^2 d^2/dx^2)^kappa on the periodic observation grid. Its
// eigenvectors are discrete Fourier modes on the observation grid with
// eigenvalues r0 (1 + 2 (ell^2/delta^2)(1 - cos(2 pi m / N_y)))^kappa, so the
// constant mode keeps variance r0 while small scales are inflated.

#pragma once

#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "grfda/rng.hpp"
#include "grfda/spectral_dynamics.hpp"

namespace grfda {

/// Point sampling of a periodic grid at a uniform stride.
class ObservationOperator {
 public:
  ObservationOperator(int n_grid, int n_obs, double domain_length);

  int n_grid() const { return n_grid_; }
  int n_obs() const { return n_obs_; }
  int stride() const { return n_grid_ / n_obs_; }
  double domain_length() const { return domain_length_; }
  /// Distance between neighbouring observations.
  double delta() const { return domain_length_ / n_obs_; }
  int grid_index(int obs) const { return obs * stride(); }
  std::vector<int> indices() const;

  /// Shortest periodic distance between observation locations i and j.
  double distance(int i, int j) const;

  template <typename Derived>
  Eigen::VectorXd apply(const Eigen::MatrixBase<Derived>& grid) const {
    Eigen::VectorXd out(n_obs_);
    for (int i = 0; i < n_obs_; ++i) out[i] = grid(grid_index(i));
    return out;
  }

 private:
  int n_grid_;
  int n_obs_;
  double domain_length_;
};

struct TrueErrorModel {
  double variance = 0.36;
  double corr_length = 0.06;
};

struct GrfErrorModel {
  double r0 = 0.36;
  double ell2 = 0.0;
  double kappa = 1.0;
  int n_obs = 64;
  double delta = 0.0;

  static GrfErrorModel for_operator(const ObservationOperator& op, double ell2, double r0 = 0.36,
                                    double kappa = 1.0);
  void validate() const;
  double ratio() const { return ell2 / (delta * delta); }
};

struct ObservationSet {
  Eigen::VectorXd values;
  ObservationOperator op;
  int time_index = 0;
};

/// r0 exp(-dist/L) with periodic distances.
Eigen::MatrixXd true_error_covariance(const ObservationOperator& op, const TrueErrorModel& model);

/// Draws correlated errors through a fixed Cholesky factor of the true covariance.
class CorrelatedNoise {
 public:
  CorrelatedNoise(const ObservationOperator& op, const TrueErrorModel& model);
  Eigen::VectorXd sample(RngStream& rng) const;
  const Eigen::MatrixXd& factor() const { return lower_; }

 private:
  Eigen::MatrixXd lower_;
};

ObservationSet observe_truth(const GridField& truth, const ObservationOperator& op,
                             const CorrelatedNoise& noise, RngStream& rng, int time_index = 0);
ObservationSet observe_truth(const GridField& truth, const ObservationOperator& op,
                             const TrueErrorModel& model, RngStream& rng, int time_index = 0);

/// Eigenvalues of R indexed by observation-grid frequency m = 0..N_y-1.
Eigen::VectorXd grf_spectrum(const GrfErrorModel& model);

/// Dense periodic tridiagonal covariance; kappa must be 1.
Eigen::MatrixXd grf_matrix(const GrfErrorModel& model);

/// Solves a periodic (cyclic) tridiagonal system with constant diagonal
/// `diag` and constant off-diagonal/corner entries `off`, via the
/// Sherman-Morrison corrected Thomas algorithm. Requires n >= 3.
Eigen::VectorXd solve_cyclic_tridiagonal(double diag, double off, const Eigen::VectorXd& rhs);

/// d^T R^{-1} d. Uses the cyclic tridiagonal solve for kappa == 1 and
/// spectral division otherwise.
double grf_quadratic_form(const GrfErrorModel& model, const Eigen::VectorXd& d);
/// Spectral-division route for any kappa.
double grf_quadratic_form_spectral(const GrfErrorModel& model, const Eigen::VectorXd& d);

/// Circulant smoothing operator S = C^{-1/2}, so that |S d|^2 = d^T C^{-1} d.
class SmoothingOperator {
 public:
  explicit SmoothingOperator(const GrfErrorModel& model);
  Eigen::VectorXd apply(const Eigen::VectorXd& d) const;
  Eigen::MatrixXd matrix() const;
  const Eigen::VectorXd& gains() const { return gains_; }

 private:
  Eigen::VectorXd gains_;  // per frequency m = 0..N_y/2
  int n_;
};

SmoothingOperator smoothing_factor(const GrfErrorModel& model);

/// -1/2 |S R0^{-1/2} (y - H x)|^2.
double smoothed_weight_exponent(const GrfErrorModel& model, const ObservationOperator& op,
                                const ObservationSet& y, const GridField& x);

// ---------------------------------------------------------------------------
// Error models as seen by the filters.

/// Spatially uncorrelated errors with common variance.
struct DiagonalErrorModel {
  double variance = 0.36;
  int n_obs = 64;
};

/// Arbitrary SPD covariance, factorized once.
class DenseErrorModel {
 public:
  explicit DenseErrorModel(Eigen::MatrixXd cov);
  const Eigen::MatrixXd& covariance() const { return cov_; }
  double quadratic_form(const Eigen::VectorXd& d) const;

 private:
  Eigen::MatrixXd cov_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

using ErrorModel = std::variant<DiagonalErrorModel, GrfErrorModel, DenseErrorModel>;

int error_model_size(const ErrorModel& model);
double quadratic_form(const ErrorModel& model, const Eigen::VectorXd& d);
Eigen::MatrixXd covariance_matrix(const ErrorModel& model);
/// Eigenvalues r_m (m = 0..N_y-1, r_m = sum_j R_{0j} e^{-2 pi i m j / N_y})
/// when R is circulant to 1e-12 relative; std::nullopt otherwise.
std::optional<Eigen::VectorXd> circulant_spectrum(const ErrorModel& model);
/// Symmetric R^{-1/2}: spectral for diagonal/GRF models, eigendecomposition otherwise.
Eigen::MatrixXd inverse_sqrt_matrix(const ErrorModel& model);

}  // namespace grfda
