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

// Exact simulation of the periodic linear stochastic advection-diffusion
// equation
//
//   du = (-b - c d/dx + nu d^2/dx^2) u dt + dF,
//
// in Fourier space, where each coefficient is an independent complex
// Ornstein-Uhlenbeck process.
//
// Fourier convention: u(x) = sum_k uhat_k exp(i kappa_k x) over integer
// k in [-n/2+1, n/2], with kappa_k = 2 pi k / L the physical wavenumber.
// Coefficients are stored in FFT order: index j holds k = j for j <= n/2
// and k = j - n otherwise.
//
// Amplitude: the per-mode law dF_k = zeta_k dW_k with complex dW_k leaves the
// scale of a *real* field open. FourierConvention::kRealPart (default) takes
// the real part of the field built from independent complex modes, which
// halves every mode variance; kComplexCoefficient uses the complex law for
// uhat_k directly. The convention only rescales variances, never the dynamics.

#pragma once

#include <complex>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "grfda/rng.hpp"

namespace grfda {

using GridField = Eigen::VectorXd;

enum class FourierConvention { kRealPart, kComplexCoefficient };

struct ModelParams {
  double b = 1.0;
  double c = 2.0 * std::numbers::pi;
  double nu = 1.0 / 9.0;
  double domain_length = 2.0 * std::numbers::pi;
  int n_grid = 2048;
  FourierConvention convention = FourierConvention::kRealPart;

  /// Throws std::invalid_argument naming the violated constraint.
  void validate() const;
  double wavenumber(int k) const { return 2.0 * std::numbers::pi * k / domain_length; }
  double dx() const { return domain_length / n_grid; }
  /// Multiplier on E|uhat_k|^2 implied by `convention` (1/2 or 1).
  double mode_variance_scale() const {
    return convention == FourierConvention::kRealPart ? 0.5 : 1.0;
  }
};

/// Spectral coefficients of a real periodic field, FFT-ordered.
class SpectralField {
 public:
  SpectralField() = default;
  explicit SpectralField(int n_grid) : coeffs_(Eigen::VectorXcd::Zero(n_grid)) {}
  explicit SpectralField(Eigen::VectorXcd coeffs) : coeffs_(std::move(coeffs)) {}

  int n_grid() const { return static_cast<int>(coeffs_.size()); }
  int nyquist() const { return n_grid() / 2; }

  static int index_of(int k, int n_grid) { return k >= 0 ? k : k + n_grid; }
  static int wavenumber_at(int index, int n_grid) {
    return index <= n_grid / 2 ? index : index - n_grid;
  }

  std::complex<double> coefficient(int k) const { return coeffs_[index_of(k, n_grid())]; }
  std::complex<double>& coefficient(int k) { return coeffs_[index_of(k, n_grid())]; }

  const Eigen::VectorXcd& coefficients() const { return coeffs_; }
  Eigen::VectorXcd& coefficients() { return coeffs_; }

  /// Exact check: c(-k) == conj(c(k)) and the k=0 / Nyquist entries are real.
  bool is_hermitian() const;

  /// Overwrites negative wavenumbers with conjugates of the positive ones.
  void mirror_negative_modes();

 private:
  Eigen::VectorXcd coeffs_;
};

/// theta_k = b + i kappa c + nu kappa^2.
std::complex<double> mode_rate(int k, const ModelParams& params);

/// zeta_k = (1 + |k|)^(-1/2).
double noise_amplitude(int k);

/// E|uhat_k(t+dt) - uhat_k(t) e^{-theta dt}|^2
///   = scale * zeta^2 (1 - e^{-2 Re(theta) dt}) / (2 Re(theta)),
/// with scale = params.mode_variance_scale().
double ou_increment_variance(int k, double dt, const ModelParams& params);

/// Climatological E|uhat_k|^2, the dt -> infinity limit of the increment variance.
double stationary_variance(int k, const ModelParams& params);

/// Sum of stationary_variance over all modes: the pointwise climatological
/// variance of the grid field.
double climatological_point_variance(const ModelParams& params);

SpectralField sample_stationary(const ModelParams& params, RngStream& rng);

/// Deterministic part of the exact update: uhat_k e^{-theta_k dt}.
SpectralField decay(const SpectralField& state, double dt, const ModelParams& params);

/// Exact OU transition over dt. Throws std::invalid_argument for dt < 0.
SpectralField propagate(const SpectralField& state, double dt, const ModelParams& params,
                        RngStream& rng);

/// Precomputed per-mode decay factors and noise scales for a fixed step.
/// Draw order matches propagate(), so both produce identical output for the
/// same stream.
class Propagator {
 public:
  Propagator(const ModelParams& params, double dt);

  double dt() const { return dt_; }
  void advance(SpectralField& state, RngStream& rng) const;

  const Eigen::VectorXcd& decay_factors() const { return decay_; }
  const Eigen::VectorXd& noise_scales() const { return noise_sd_; }

 private:
  double dt_;
  Eigen::VectorXcd decay_;    // k = 0..n/2
  Eigen::VectorXd noise_sd_;  // k = 0..n/2
};

/// Grid values u(x_j), x_j = j L / n. Throws std::invalid_argument for
/// non-Hermitian input.
GridField spectral_to_grid(const SpectralField& state);
SpectralField grid_to_spectral(const GridField& grid);

}  // namespace grfda
