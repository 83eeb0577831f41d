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

// Thin real-to-complex transform helpers over Eigen's FFT module.
// Plans are cached per thread.

#pragma once

#include <Eigen/Dense>

namespace grfda::fft {

/// X_m = sum_j x_j e^{-2 pi i j m / n}, m = 0..n/2 (unnormalized).
void forward_half(const double* src, std::complex<double>* dst, int n);

/// x_j = sum_m X_m e^{+2 pi i j m / n} over the full Hermitian spectrum
/// implied by m = 0..n/2 (unnormalized synthesis).
void synthesize_half(const std::complex<double>* src, double* dst, int n);

inline Eigen::VectorXcd forward_half(const Eigen::VectorXd& x) {
  Eigen::VectorXcd out(x.size() / 2 + 1);
  forward_half(x.data(), out.data(), static_cast<int>(x.size()));
  return out;
}

inline Eigen::VectorXd synthesize_half(const Eigen::VectorXcd& half, int n) {
  Eigen::VectorXd out(n);
  synthesize_half(half.data(), out.data(), n);
  return out;
}

/// Applies the real circulant operator with eigenvalues `eig` (indexed
/// m = 0..n/2, Hermitian extension implied) to every column of `mat` in place.
void apply_circulant_to_columns(Eigen::MatrixXd& mat, const Eigen::VectorXcd& eig);

/// First column of the real symmetric circulant matrix whose eigenvalue at
/// frequency m is eig[m], m = 0..n/2.
Eigen::VectorXd circulant_column(const Eigen::VectorXd& eig, int n);

}  // namespace grfda::fft
