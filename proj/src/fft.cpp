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

#include "grfda/fft.hpp"

#include <unsupported/Eigen/FFT>

namespace grfda::fft {
namespace {

Eigen::FFT<double>& engine() {
  thread_local Eigen::FFT<double> fft = [] {
    Eigen::FFT<double> f;
    f.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    f.SetFlag(Eigen::FFT<double>::Unscaled);
    return f;
  }();
  return fft;
}

}  // namespace

void forward_half(const double* src, std::complex<double>* dst, int n) {
  engine().fwd(dst, src, n);
}

void synthesize_half(const std::complex<double>* src, double* dst, int n) {
  engine().inv(dst, src, n);
}

void apply_circulant_to_columns(Eigen::MatrixXd& mat, const Eigen::VectorXcd& eig) {
  const int n = static_cast<int>(mat.rows());
  Eigen::VectorXcd work(n / 2 + 1);
  const double inv_n = 1.0 / n;
  for (Eigen::Index col = 0; col < mat.cols(); ++col) {
    double* column = mat.col(col).data();
    forward_half(column, work.data(), n);
    work.array() *= eig.array() * inv_n;
    synthesize_half(work.data(), column, n);
  }
}

Eigen::VectorXd circulant_column(const Eigen::VectorXd& eig, int n) {
  Eigen::VectorXcd half = eig.cast<std::complex<double>>() / static_cast<double>(n);
  return synthesize_half(half, n);
}

}  // namespace grfda::fft
