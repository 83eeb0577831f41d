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

#include "grfda/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace grfda {

WeightedSample WeightedSample::uniform(std::vector<double> values) {
  const std::size_t n = values.size();
  return {std::move(values), std::vector<double>(n, n ? 1.0 / static_cast<double>(n) : 0.0)};
}

void WeightedSample::validate() const {
  if (values.size() != weights.size() || values.empty()) {
    throw std::invalid_argument("weighted sample needs equal, nonzero numbers of values and weights");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("weights must sum to one");
}

namespace {

struct Atom {
  double x;
  double w;
};

// Energy form over atoms already sorted by value.
double crps_sorted(std::span<const Atom> atoms, double obs) {
  double abs_term = 0.0;
  double pair_term = 0.0;  // sum_{i<j} w_i w_j (x_j - x_i)
  double cum_w = 0.0;
  double cum_wx = 0.0;
  for (const Atom& a : atoms) {
    abs_term += a.w * std::abs(a.x - obs);
    pair_term += a.w * (a.x * cum_w - cum_wx);
    cum_w += a.w;
    cum_wx += a.w * a.x;
  }
  // The two terms are computed independently, so rounding can leave a tiny
  // negative residue for a point mass at the observation.
  return std::max(0.0, abs_term - pair_term);
}

}  // namespace

double crps_weighted(std::span<const double> values, std::span<const double> weights, double obs) {
  if (values.size() != weights.size() || values.empty()) {
    throw std::invalid_argument("crps_weighted: values and weights must be nonempty, equal length");
  }
  std::vector<Atom> atoms(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) atoms[i] = {values[i], weights[i]};
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });
  return crps_sorted(atoms, obs);
}

Eigen::VectorXd crps_field(const Eigen::MatrixXd& members, const Eigen::VectorXd& weights,
                           const GridField& truth) {
  if (members.cols() != weights.size() || members.rows() != truth.size()) {
    throw std::invalid_argument("crps_field: dimension mismatch");
  }
  const Eigen::Index n_points = members.rows();
  const Eigen::Index n_members = members.cols();
  // Row-major copy so each grid point's member values are contiguous.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = members;
  Eigen::VectorXd out(n_points);
  std::vector<Atom> atoms(n_members);
  for (Eigen::Index p = 0; p < n_points; ++p) {
    for (Eigen::Index i = 0; i < n_members; ++i) atoms[i] = {rows(p, i), weights[i]};
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });
    out[p] = crps_sorted(atoms, truth[p]);
  }
  return out;
}

double ensemble_spread(const Eigen::MatrixXd& members, const Eigen::VectorXd& weights) {
  if (members.cols() != weights.size()) throw std::invalid_argument("ensemble_spread: size mismatch");
  if (members.cols() <= 1) return 0.0;
  const Eigen::VectorXd mean = members * weights;
  const Eigen::VectorXd second = members.array().square().matrix() * weights;
  const Eigen::ArrayXd var = (second.array() - mean.array().square()).max(0.0);
  return std::sqrt(var.mean());
}

Eigen::VectorXd normalized_mode_rmse(std::span<const SpectralField> means,
                                     std::span<const SpectralField> truths,
                                     const ModelParams& params, int n_modes) {
  if (means.size() != truths.size() || means.empty()) {
    throw std::invalid_argument("normalized_mode_rmse: series must be aligned and nonempty");
  }
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(n_modes);
  for (std::size_t t = 0; t < means.size(); ++t) {
    for (int k = 0; k < n_modes; ++k) {
      sq[k] += std::norm(means[t].coefficient(k) - truths[t].coefficient(k));
    }
  }
  Eigen::VectorXd out(n_modes);
  for (int k = 0; k < n_modes; ++k) {
    out[k] = std::sqrt(sq[k] / static_cast<double>(means.size()) / stationary_variance(k, params));
  }
  return out;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty series");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, 0.5);
}

BoxplotSummary summarize_boxplot(std::span<const double> series) {
  if (series.empty()) throw std::invalid_argument("summarize_boxplot: empty series");
  std::vector<double> sorted(series.begin(), series.end());
  std::sort(sorted.begin(), sorted.end());
  BoxplotSummary s;
  s.count = static_cast<int>(sorted.size());
  s.median = quantile_sorted(sorted, 0.5);
  s.q1 = quantile_sorted(sorted, 0.25);
  s.q3 = quantile_sorted(sorted, 0.75);
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / s.count;
  const double iqr = s.q3 - s.q1;
  const double lo_fence = s.q1 - 1.5 * iqr;
  const double hi_fence = s.q3 + 1.5 * iqr;
  s.whisker_low = s.q1;
  s.whisker_high = s.q3;
  for (double v : sorted) {
    if (v < lo_fence || v > hi_fence) {
      ++s.outliers;
      continue;
    }
    s.whisker_low = std::min(s.whisker_low, v);
    s.whisker_high = std::max(s.whisker_high, v);
  }
  return s;
}

}  // namespace grfda
