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

#include "grfda/spectral_dynamics.hpp"

#include <cmath>
#include <string>

#include "grfda/fft.hpp"

namespace grfda {

void ModelParams::validate() const {
  if (!(b > 0.0)) throw std::invalid_argument("model.b must be positive");
  if (!(nu > 0.0)) throw std::invalid_argument("model.nu must be positive");
  if (!(domain_length > 0.0)) throw std::invalid_argument("model.domain_length must be positive");
  if (n_grid < 2 || (n_grid & (n_grid - 1)) != 0) {
    throw std::invalid_argument("model.n_grid must be a power of two >= 2, got " +
                                std::to_string(n_grid));
  }
}

bool SpectralField::is_hermitian() const {
  const int n = n_grid();
  if (n == 0) return true;
  if (coeffs_[0].imag() != 0.0 || coeffs_[n / 2].imag() != 0.0) return false;
  for (int k = 1; k < n / 2; ++k) {
    if (coeffs_[n - k] != std::conj(coeffs_[k])) return false;
  }
  return true;
}

void SpectralField::mirror_negative_modes() {
  const int n = n_grid();
  for (int k = 1; k < n / 2; ++k) coeffs_[n - k] = std::conj(coeffs_[k]);
}

std::complex<double> mode_rate(int k, const ModelParams& params) {
  const double kappa = params.wavenumber(k);
  return {params.b + params.nu * kappa * kappa, kappa * params.c};
}

double noise_amplitude(int k) { return 1.0 / std::sqrt(1.0 + std::abs(k)); }

double ou_increment_variance(int k, double dt, const ModelParams& params) {
  const double rate = mode_rate(k, params).real();
  const double zeta = noise_amplitude(k);
  // -expm1 keeps precision for small rate*dt.
  return params.mode_variance_scale() * zeta * zeta * (-std::expm1(-2.0 * rate * dt)) / (2.0 * rate);
}

double stationary_variance(int k, const ModelParams& params) {
  const double zeta = noise_amplitude(k);
  return params.mode_variance_scale() * zeta * zeta / (2.0 * mode_rate(k, params).real());
}

double climatological_point_variance(const ModelParams& params) {
  double total = 0.0;
  for (int j = 0; j < params.n_grid; ++j) {
    total += stationary_variance(SpectralField::wavenumber_at(j, params.n_grid), params);
  }
  return total;
}

namespace {

// Fills modes k = 0..n/2 with independent draws of variance var(k); k=0 and
// Nyquist draws are real with the same second moment. One block per mode.
template <typename ScaleFn>
void add_mode_noise(SpectralField& state, RngStream& rng, ScaleFn&& sd) {
  const int n = state.n_grid();
  auto& c = state.coefficients();
  for (int k = 0; k <= n / 2; ++k) {
    const double s = sd(k);
    if (k == 0 || k == n / 2) {
      c[k] += s * rng.normal_pair().first;
    } else {
      c[k] += s * rng.complex_normal();
    }
  }
  state.mirror_negative_modes();
}

}  // namespace

SpectralField sample_stationary(const ModelParams& params, RngStream& rng) {
  params.validate();
  SpectralField out(params.n_grid);
  add_mode_noise(out, rng, [&](int k) { return std::sqrt(stationary_variance(k, params)); });
  return out;
}

SpectralField decay(const SpectralField& state, double dt, const ModelParams& params) {
  if (dt < 0.0) throw std::invalid_argument("propagation step dt must be nonnegative");
  SpectralField out = state;
  const int n = state.n_grid();
  auto& c = out.coefficients();
  for (int k = 0; k <= n / 2; ++k) c[k] *= std::exp(-mode_rate(k, params) * dt);
  // Nyquist: the advection term makes e^{-theta dt} complex there, but a real
  // field's Nyquist mode cannot carry a phase; keep its modulus decay only.
  if (n >= 2) c[n / 2] = state.coefficients()[n / 2] * std::exp(-mode_rate(n / 2, params).real() * dt);
  out.mirror_negative_modes();
  return out;
}

SpectralField propagate(const SpectralField& state, double dt, const ModelParams& params,
                        RngStream& rng) {
  if (dt < 0.0) throw std::invalid_argument("propagation step dt must be nonnegative");
  SpectralField out = state;
  Propagator(params, dt).advance(out, rng);
  return out;
}

Propagator::Propagator(const ModelParams& params, double dt) : dt_(dt) {
  params.validate();
  if (dt < 0.0) throw std::invalid_argument("propagation step dt must be nonnegative");
  const int half = params.n_grid / 2;
  decay_.resize(half + 1);
  noise_sd_.resize(half + 1);
  for (int k = 0; k <= half; ++k) {
    decay_[k] = std::exp(-mode_rate(k, params) * dt);
    noise_sd_[k] = std::sqrt(ou_increment_variance(k, dt, params));
  }
  decay_[half] = std::exp(-mode_rate(half, params).real() * dt);
}

void Propagator::advance(SpectralField& state, RngStream& rng) const {
  auto& c = state.coefficients();
  const int half = static_cast<int>(decay_.size()) - 1;
  if (state.n_grid() != 2 * half) throw std::invalid_argument("state size does not match propagator");
  for (int k = 0; k <= half; ++k) c[k] *= decay_[k];
  add_mode_noise(state, rng, [&](int k) { return noise_sd_[k]; });
}

GridField spectral_to_grid(const SpectralField& state) {
  if (!state.is_hermitian()) {
    throw std::invalid_argument("spectral_to_grid requires Hermitian-symmetric coefficients");
  }
  const int n = state.n_grid();
  return fft::synthesize_half(state.coefficients().head(n / 2 + 1), n);
}

SpectralField grid_to_spectral(const GridField& grid) {
  const int n = static_cast<int>(grid.size());
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("grid length must be even");
  Eigen::VectorXcd full(n);
  full.head(n / 2 + 1) = fft::forward_half(grid) / static_cast<double>(n);
  full[0] = full[0].real();
  full[n / 2] = full[n / 2].real();
  SpectralField out(std::move(full));
  out.mirror_negative_modes();
  return out;
}

}  // namespace grfda
