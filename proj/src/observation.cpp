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

#include "grfda/observation.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "grfda/fft.hpp"

namespace grfda {

ObservationOperator::ObservationOperator(int n_grid, int n_obs, double domain_length)
    : n_grid_(n_grid), n_obs_(n_obs), domain_length_(domain_length) {
  if (n_obs < 1 || n_grid < 1) throw std::invalid_argument("observation counts must be positive");
  if (n_grid % n_obs != 0) {
    throw std::invalid_argument("obs.n_obs=" + std::to_string(n_obs) +
                                " does not divide model.n_grid=" + std::to_string(n_grid));
  }
  if (!(domain_length > 0.0)) throw std::invalid_argument("domain length must be positive");
}

std::vector<int> ObservationOperator::indices() const {
  std::vector<int> out(n_obs_);
  for (int i = 0; i < n_obs_; ++i) out[i] = grid_index(i);
  return out;
}

double ObservationOperator::distance(int i, int j) const {
  const int steps = std::abs(i - j) % n_obs_;
  return std::min(steps, n_obs_ - steps) * delta();
}

GrfErrorModel GrfErrorModel::for_operator(const ObservationOperator& op, double ell2, double r0,
                                          double kappa) {
  GrfErrorModel m{r0, ell2, kappa, op.n_obs(), op.delta()};
  m.validate();
  return m;
}

void GrfErrorModel::validate() const {
  if (!(r0 > 0.0)) throw std::invalid_argument("grf.r0 must be positive");
  if (!(ell2 >= 0.0)) throw std::invalid_argument("grf.ell2 must be nonnegative");
  if (!(kappa > 0.0)) throw std::invalid_argument("grf.kappa must be positive");
  if (n_obs < 1) throw std::invalid_argument("GRF model needs at least one observation");
  if (!(delta > 0.0)) throw std::invalid_argument("GRF observation spacing must be positive");
}

Eigen::MatrixXd true_error_covariance(const ObservationOperator& op, const TrueErrorModel& model) {
  const int n = op.n_obs();
  Eigen::MatrixXd cov(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      cov(i, j) = model.variance * std::exp(-op.distance(i, j) / model.corr_length);
    }
  }
  return cov;
}

CorrelatedNoise::CorrelatedNoise(const ObservationOperator& op, const TrueErrorModel& model) {
  if (!(model.variance >= 0.0) || !(model.corr_length > 0.0)) {
    throw std::invalid_argument("true error model needs variance >= 0 and corr_length > 0");
  }
  if (model.variance == 0.0) {
    lower_ = Eigen::MatrixXd::Zero(op.n_obs(), op.n_obs());
    return;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(true_error_covariance(op, model));
  if (llt.info() != Eigen::Success) throw std::runtime_error("true error covariance is not SPD");
  lower_ = llt.matrixL();
}

Eigen::VectorXd CorrelatedNoise::sample(RngStream& rng) const {
  Eigen::VectorXd z(lower_.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return lower_.triangularView<Eigen::Lower>() * z;
}

ObservationSet observe_truth(const GridField& truth, const ObservationOperator& op,
                             const CorrelatedNoise& noise, RngStream& rng, int time_index) {
  if (truth.size() != op.n_grid()) throw std::invalid_argument("truth length must equal n_grid");
  return {op.apply(truth) + noise.sample(rng), op, time_index};
}

ObservationSet observe_truth(const GridField& truth, const ObservationOperator& op,
                             const TrueErrorModel& model, RngStream& rng, int time_index) {
  return observe_truth(truth, op, CorrelatedNoise(op, model), rng, time_index);
}

Eigen::VectorXd grf_spectrum(const GrfErrorModel& model) {
  model.validate();
  const int n = model.n_obs;
  Eigen::VectorXd eig(n);
  for (int m = 0; m < n; ++m) {
    const double base = 1.0 + 2.0 * model.ratio() * (1.0 - std::cos(2.0 * std::numbers::pi * m / n));
    eig[m] = model.r0 * std::pow(base, model.kappa);
  }
  eig[0] = model.r0;
  return eig;
}

Eigen::MatrixXd grf_matrix(const GrfErrorModel& model) {
  model.validate();
  if (model.kappa != 1.0) {
    throw std::invalid_argument("grf_matrix is defined for kappa == 1 only; use grf_spectrum");
  }
  const int n = model.n_obs;
  const double diag = model.r0 * (1.0 + 2.0 * model.ratio());
  const double off = -model.r0 * model.ratio();
  Eigen::MatrixXd mat = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    mat(i, i) += diag;
    if (n > 1) {
      mat(i, (i + 1) % n) += off;
      mat(i, (i + n - 1) % n) += off;
    }
  }
  return mat;
}

Eigen::VectorXd solve_cyclic_tridiagonal(double diag, double off, const Eigen::VectorXd& rhs) {
  const Eigen::Index n = rhs.size();
  if (n < 3) throw std::invalid_argument("cyclic tridiagonal solve needs n >= 3");
  if (off == 0.0) return rhs / diag;

  // A = T + u v^T with T tridiagonal, u = (gamma, 0, ..., 0, off)^T and
  // v = (1, 0, ..., 0, off/gamma)^T.
  const double gamma = -diag;
  Eigen::VectorXd main = Eigen::VectorXd::Constant(n, diag);
  main[0] -= gamma;
  main[n - 1] -= off * off / gamma;

  // Thomas algorithm on T for two right-hand sides at once.
  Eigen::MatrixXd rhs2(n, 2);
  rhs2.col(0) = rhs;
  rhs2.col(1).setZero();
  rhs2(0, 1) = gamma;
  rhs2(n - 1, 1) = off;

  Eigen::VectorXd upper(n);
  upper[0] = off / main[0];
  rhs2.row(0) /= main[0];
  for (Eigen::Index i = 1; i < n; ++i) {
    const double denom = main[i] - off * upper[i - 1];
    if (denom == 0.0 || !std::isfinite(denom)) {
      throw std::runtime_error("cyclic tridiagonal solve broke down (zero pivot)");
    }
    upper[i] = off / denom;
    rhs2.row(i) = (rhs2.row(i) - off * rhs2.row(i - 1)) / denom;
  }
  for (Eigen::Index i = n - 2; i >= 0; --i) rhs2.row(i) -= upper[i] * rhs2.row(i + 1);

  const auto y = rhs2.col(0);
  const auto z = rhs2.col(1);
  const double vy = y[0] + off / gamma * y[n - 1];
  const double vz = z[0] + off / gamma * z[n - 1];
  return y - (vy / (1.0 + vz)) * z;
}

namespace {

double diagonal_quadratic_form(double variance, const Eigen::VectorXd& d) {
  return (d.array() * (d.array() / variance)).sum();
}

// Eigenvalues at frequencies m = 0..n/2 and the matching real-FFT weights.
Eigen::VectorXd half_spectrum(const GrfErrorModel& model) {
  return grf_spectrum(model).head(model.n_obs / 2 + 1);
}

}  // namespace

double grf_quadratic_form_spectral(const GrfErrorModel& model, const Eigen::VectorXd& d) {
  const int n = model.n_obs;
  if (d.size() != n) throw std::invalid_argument("innovation length must equal n_obs");
  if (n % 2 != 0) {
    // Odd sizes are outside the uniform-stride use; fall back to dense algebra.
    Eigen::VectorXd eig = grf_spectrum(model);
    Eigen::MatrixXcd dft(n, n);
    for (int m = 0; m < n; ++m)
      for (int j = 0; j < n; ++j) dft(m, j) = std::polar(1.0, -2.0 * std::numbers::pi * m * j / n);
    const Eigen::VectorXcd dhat = dft * d.cast<std::complex<double>>();
    return (dhat.array().abs2() / eig.array()).sum() / n;
  }
  const Eigen::VectorXcd dhat = fft::forward_half(d);
  const Eigen::VectorXd eig = half_spectrum(model);
  double total = 0.0;
  for (int m = 0; m <= n / 2; ++m) {
    const double weight = (m == 0 || m == n / 2) ? 1.0 : 2.0;
    total += weight * std::norm(dhat[m]) / eig[m];
  }
  return total / n;
}

double grf_quadratic_form(const GrfErrorModel& model, const Eigen::VectorXd& d) {
  model.validate();
  if (d.size() != model.n_obs) throw std::invalid_argument("innovation length must equal n_obs");
  if (model.ell2 == 0.0) return diagonal_quadratic_form(model.r0, d);
  if (model.kappa != 1.0 || model.n_obs < 3) return grf_quadratic_form_spectral(model, d);
  const double diag = model.r0 * (1.0 + 2.0 * model.ratio());
  const double off = -model.r0 * model.ratio();
  return d.dot(solve_cyclic_tridiagonal(diag, off, d));
}

SmoothingOperator::SmoothingOperator(const GrfErrorModel& model) : n_(model.n_obs) {
  if (n_ % 2 != 0) throw std::invalid_argument("smoothing operator needs an even n_obs");
  gains_ = (half_spectrum(model) / model.r0).array().rsqrt();
}

Eigen::VectorXd SmoothingOperator::apply(const Eigen::VectorXd& d) const {
  if (d.size() != n_) throw std::invalid_argument("vector length must equal n_obs");
  Eigen::VectorXcd dhat = fft::forward_half(d);
  dhat.array() *= gains_.array() / static_cast<double>(n_);
  return fft::synthesize_half(dhat, n_);
}

Eigen::MatrixXd SmoothingOperator::matrix() const {
  const Eigen::VectorXd column = fft::circulant_column(gains_, n_);
  Eigen::MatrixXd out(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) out(i, j) = column[((i - j) % n_ + n_) % n_];
  return out;
}

SmoothingOperator smoothing_factor(const GrfErrorModel& model) { return SmoothingOperator(model); }

double smoothed_weight_exponent(const GrfErrorModel& model, const ObservationOperator& op,
                                const ObservationSet& y, const GridField& x) {
  const Eigen::VectorXd innovation = (y.values - op.apply(x)) / std::sqrt(model.r0);
  return -0.5 * smoothing_factor(model).apply(innovation).squaredNorm();
}

DenseErrorModel::DenseErrorModel(Eigen::MatrixXd cov) : cov_(std::move(cov)), llt_(cov_) {
  if (llt_.info() != Eigen::Success) throw std::invalid_argument("error covariance is not SPD");
}

double DenseErrorModel::quadratic_form(const Eigen::VectorXd& d) const {
  return llt_.matrixL().solve(d).squaredNorm();
}

int error_model_size(const ErrorModel& model) {
  return std::visit(
      [](const auto& m) -> int {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DenseErrorModel>) {
          return static_cast<int>(m.covariance().rows());
        } else {
          return m.n_obs;
        }
      },
      model);
}

double quadratic_form(const ErrorModel& model, const Eigen::VectorXd& d) {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DiagonalErrorModel>) {
          if (d.size() != m.n_obs) throw std::invalid_argument("innovation length mismatch");
          return diagonal_quadratic_form(m.variance, d);
        } else if constexpr (std::is_same_v<T, GrfErrorModel>) {
          return grf_quadratic_form(m, d);
        } else {
          return m.quadratic_form(d);
        }
      },
      model);
}

Eigen::MatrixXd covariance_matrix(const ErrorModel& model) {
  return std::visit(
      [](const auto& m) -> Eigen::MatrixXd {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DiagonalErrorModel>) {
          return m.variance * Eigen::MatrixXd::Identity(m.n_obs, m.n_obs);
        } else if constexpr (std::is_same_v<T, GrfErrorModel>) {
          if (m.kappa == 1.0) return grf_matrix(m);
          // General kappa: circulant with the spectrum as eigenvalues.
          const int n = m.n_obs;
          const Eigen::VectorXd column = fft::circulant_column(half_spectrum(m), n);
          Eigen::MatrixXd out(n, n);
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) out(i, j) = column[((i - j) % n + n) % n];
          return out;
        } else {
          return m.covariance();
        }
      },
      model);
}

std::optional<Eigen::VectorXd> circulant_spectrum(const ErrorModel& model) {
  if (const auto* d = std::get_if<DiagonalErrorModel>(&model)) {
    return Eigen::VectorXd::Constant(d->n_obs, d->variance);
  }
  if (const auto* g = std::get_if<GrfErrorModel>(&model)) return grf_spectrum(*g);
  const Eigen::MatrixXd& cov = std::get<DenseErrorModel>(model).covariance();
  const Eigen::Index n = cov.rows();
  const double tol = 1e-12 * cov.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (std::abs(cov(i, j) - cov(0, (j - i + n) % n)) > tol) return std::nullopt;
  Eigen::VectorXd eig(n);
  for (Eigen::Index m = 0; m < n; ++m) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      total += cov(0, j) * std::cos(2.0 * std::numbers::pi * static_cast<double>(m * j) / n);
    }
    eig[m] = total;
  }
  return eig;
}

Eigen::MatrixXd inverse_sqrt_matrix(const ErrorModel& model) {
  return std::visit(
      [&](const auto& m) -> Eigen::MatrixXd {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DiagonalErrorModel>) {
          return Eigen::MatrixXd::Identity(m.n_obs, m.n_obs) / std::sqrt(m.variance);
        } else if constexpr (std::is_same_v<T, GrfErrorModel>) {
          if (m.n_obs % 2 == 0) {
            const Eigen::VectorXd column =
                fft::circulant_column(half_spectrum(m).array().rsqrt().matrix(), m.n_obs);
            const int n = m.n_obs;
            Eigen::MatrixXd out(n, n);
            for (int i = 0; i < n; ++i)
              for (int j = 0; j < n; ++j) out(i, j) = column[((i - j) % n + n) % n];
            return out;
          }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance_matrix(model));
        return es.eigenvectors() * es.eigenvalues().array().rsqrt().matrix().asDiagonal() *
               es.eigenvectors().transpose();
      },
      model);
}

}  // namespace grfda
