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

// Verification metrics for weighted ensembles.

#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "grfda/spectral_dynamics.hpp"

namespace grfda {

template <typename DerivedA, typename DerivedB>
double rmse(const Eigen::MatrixBase<DerivedA>& estimate, const Eigen::MatrixBase<DerivedB>& truth) {
  if (estimate.size() != truth.size() || estimate.size() == 0) {
    throw std::invalid_argument("rmse: fields must be nonempty and of equal length");
  }
  return std::sqrt((estimate - truth).squaredNorm() / static_cast<double>(estimate.size()));
}

/// Values with nonnegative weights summing to one.
struct WeightedSample {
  std::vector<double> values;
  std::vector<double> weights;

  static WeightedSample uniform(std::vector<double> values);
  void validate() const;
};

/// CRPS of a weighted empirical distribution, energy form
///   sum_i w_i |x_i - y| - 1/2 sum_ij w_i w_j |x_i - x_j|,
/// evaluated in O(N log N) through sorted partial sums.
double crps_weighted(std::span<const double> values, std::span<const double> weights, double obs);
inline double crps_weighted(const WeightedSample& sample, double obs) {
  return crps_weighted(sample.values, sample.weights, obs);
}

/// Per-gridpoint CRPS. `members` holds one grid field per column.
Eigen::VectorXd crps_field(const Eigen::MatrixXd& members, const Eigen::VectorXd& weights,
                           const GridField& truth);

/// Square root of the spatially averaged weighted ensemble variance.
double ensemble_spread(const Eigen::MatrixXd& members, const Eigen::VectorXd& weights);

/// Weighted ensemble mean, one grid value per row of `members`.
inline GridField weighted_mean(const Eigen::MatrixXd& members, const Eigen::VectorXd& weights) {
  return members * weights;
}

/// Time-averaged RMS error of each of the first `n_modes` Fourier
/// coefficients (k = 0..n_modes-1), divided by that mode's climatological
/// standard deviation.
Eigen::VectorXd normalized_mode_rmse(std::span<const SpectralField> means,
                                     std::span<const SpectralField> truths,
                                     const ModelParams& params, int n_modes = 50);

struct BoxplotSummary {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  int outliers = 0;
  double mean = 0.0;
  int count = 0;
};

/// Quantile with linear interpolation between order statistics (the
/// "type 7" convention). `sorted` must be ascending and nonempty.
double quantile_sorted(std::span<const double> sorted, double p);
double median(std::vector<double> values);

/// Quartiles plus Tukey whiskers (most extreme data within 1.5 IQR).
BoxplotSummary summarize_boxplot(std::span<const double> series);

}  // namespace grfda
