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

#include "property_checks.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>
#include <utility>
#include <vector>

#include <unistd.h>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "grfda/experiment.hpp"
#include "grfda/kalman.hpp"
#include "grfda/metrics.hpp"
#include "grfda/observation.hpp"
#include "grfda/rng.hpp"
#include "grfda/sir_filter.hpp"
#include "grfda/spectral_dynamics.hpp"

namespace grfda::checks {
namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

Eigen::VectorXd random_normal(int n, RngStream& rng) {
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) out[i] = rng.normal();
  return out;
}

// Exact integral of (F(x) - 1{x >= y})^2 for a weighted step CDF: the
// integrand is constant between consecutive breakpoints.
double crps_by_integration(std::vector<std::pair<double, double>> atoms, double y) {
  std::sort(atoms.begin(), atoms.end());
  std::vector<double> knots;
  for (const auto& a : atoms) knots.push_back(a.first);
  knots.push_back(y);
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
    double cdf = 0.0;
    for (const auto& a : atoms) {
      if (a.first <= knots[j]) cdf += a.second;
    }
    const double step = knots[j] >= y ? 1.0 : 0.0;
    total += (cdf - step) * (cdf - step) * (knots[j + 1] - knots[j]);
  }
  return total;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

CheckResult grf_quadratic_form_routes() {
  CheckResult r;
  const std::vector<std::pair<int, double>> models = {
      {64, 0.0}, {16, 0.3}, {32, 0.05}, {64, 1.0}, {128, 0.7}};
  RngStream rng = RngStream(11, StreamPurpose::kTest).substream(1);
  double worst = 0.0;
  for (const auto& [n_obs, ell2] : models) {
    const ObservationOperator op(2048, n_obs, 2.0 * std::numbers::pi);
    const GrfErrorModel model = GrfErrorModel::for_operator(op, ell2);
    const Eigen::LLT<Eigen::MatrixXd> dense(grf_matrix(model));
    const SmoothingOperator smooth = smoothing_factor(model);
    for (int v = 0; v < 100; ++v) {
      const Eigen::VectorXd d = random_normal(n_obs, rng);
      const double oracle = dense.matrixL().solve(d).squaredNorm();
      const double routes[] = {grf_quadratic_form(model, d), grf_quadratic_form_spectral(model, d),
                               smooth.apply(d).squaredNorm() / model.r0};
      for (double q : routes) worst = std::max(worst, std::abs(q - oracle) / oracle);
    }
  }
  if (worst > 1e-8) r.fail("max relative deviation " + fmt(worst) + " > 1e-8");
  else r.detail = "max relative deviation " + fmt(worst);
  return r;
}

CheckResult crps_matches_integral() {
  CheckResult r;
  RngStream rng = RngStream(12, StreamPurpose::kTest).substream(2);
  double worst = 0.0;
  for (int s = 0; s < 1000; ++s) {
    const int n = 1 + static_cast<int>(rng.uniform() * 40.0);
    std::vector<double> values(n);
    std::vector<double> weights(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      // Rounding some values creates ties.
      values[i] = s % 4 == 0 ? std::round(2.0 * rng.normal()) : rng.normal();
      weights[i] = s % 3 == 0 ? 1.0 : rng.uniform();
      total += weights[i];
    }
    for (double& w : weights) w /= total;
    const double y = s % 5 == 0 ? values[0] : 1.5 * rng.normal();
    std::vector<std::pair<double, double>> atoms;
    for (int i = 0; i < n; ++i) atoms.emplace_back(values[i], weights[i]);
    const double oracle = crps_by_integration(atoms, y);
    const double got = crps_weighted(values, weights, y);
    worst = std::max(worst, std::abs(got - oracle) / std::max(1.0, oracle));
  }
  if (worst > 1e-6) r.fail("max deviation " + fmt(worst) + " > 1e-6");
  else r.detail = "max deviation " + fmt(worst);
  return r;
}

CheckResult ou_moments() {
  CheckResult r;
  ModelParams params;
  params.n_grid = 8;
  SpectralField start(params.n_grid);
  start.coefficient(0) = 0.7;
  start.coefficient(1) = {1.0, 0.5};
  start.coefficient(2) = {-0.3, 0.8};
  start.coefficient(3) = {0.2, -1.1};
  start.coefficient(4) = -0.4;
  start.mirror_negative_modes();

  const int reps = 100000;
  double worst_z = 0.0;
  for (double dt : {0.04, 0.5}) {
    const Propagator step(params, dt);
    const RngStream base = RngStream(13, StreamPurpose::kTest).substream(static_cast<std::uint64_t>(dt * 1000));
    const int half = params.n_grid / 2;
    std::vector<std::complex<double>> sum(half + 1, 0.0);
    std::vector<double> sum_sq(half + 1, 0.0);
    std::vector<std::complex<double>> expect(half + 1);
    for (int k = 0; k <= half; ++k) {
      const std::complex<double> theta = mode_rate(k, params);
      // The Nyquist coefficient of a real field cannot rotate; only its modulus decays.
      expect[k] = start.coefficient(k) *
                  (k == half ? std::exp(-theta.real() * dt) : std::exp(-theta * dt));
    }
    for (int i = 0; i < reps; ++i) {
      SpectralField s = start;
      RngStream rng = base.substream(static_cast<std::uint64_t>(i));
      step.advance(s, rng);
      for (int k = 0; k <= half; ++k) {
        sum[k] += s.coefficient(k);
        sum_sq[k] += std::norm(s.coefficient(k) - expect[k]);
      }
    }
    for (int k = 0; k <= half; ++k) {
      const double var = ou_increment_variance(k, dt, params);
      const bool real_mode = (k == 0 || k == half);
      const std::complex<double> mean = sum[k] / static_cast<double>(reps);
      const double se_component = std::sqrt((real_mode ? var : var / 2.0) / reps);
      worst_z = std::max(worst_z, std::abs(mean.real() - expect[k].real()) / se_component);
      if (!real_mode) worst_z = std::max(worst_z, std::abs(mean.imag() - expect[k].imag()) / se_component);
      if (real_mode && mean.imag() != 0.0) r.fail("real mode acquired an imaginary part");
      // |z|^2 is var * Exp(1) for complex modes, var * chi^2_1 for real ones.
      const double se_var = var * (real_mode ? std::numbers::sqrt2 : 1.0) / std::sqrt(reps);
      worst_z = std::max(worst_z, std::abs(sum_sq[k] / reps - var) / se_var);
    }
  }
  if (worst_z > 5.0) r.fail("largest deviation " + fmt(worst_z) + " standard errors");
  else r.detail = "largest deviation " + fmt(worst_z) + " standard errors";
  return r;
}

CheckResult diagonal_case_eigenvalues() {
  CheckResult r;
  ModelParams params;
  params.n_grid = 32;
  const int n = params.n_grid;
  const ObservationOperator op(n, n, params.domain_length);  // H = I
  const Eigen::MatrixXd prior = stationary_state(params).covariance;
  double worst = 0.0;
  const std::vector<ErrorModel> models = {GrfErrorModel::for_operator(op, 0.3),
                                          GrfErrorModel::for_operator(op, 0.0),
                                          DiagonalErrorModel{0.36, n}};
  for (const ErrorModel& model : models) {
    const Eigen::VectorXd gamma2 = *circulant_spectrum(model);
    Eigen::VectorXd expected(n);
    for (int m = 0; m < n; ++m) {
      // Circulant eigenvalue of the grid covariance at frequency m.
      const double sigma2 = n * stationary_variance(SpectralField::wavenumber_at(m, n), params);
      expected[m] = sigma2 / gamma2[m];
    }
    std::sort(expected.begin(), expected.end());
    const TauReport rep = snyder_tau_squared(prior, op, model);
    const double scale = expected.maxCoeff();
    worst = std::max(worst, (rep.lambda2 - expected).cwiseAbs().maxCoeff() / scale);
  }
  if (worst > 1e-8) r.fail("max relative deviation " + fmt(worst) + " > 1e-8");
  else r.detail = "max relative deviation " + fmt(worst);
  return r;
}

CheckResult powerlaw_limits() {
  CheckResult r;
  const double n5 = std::pow(512.0, 5);
  const PowerLawTau steep = powerlaw_tau({1.0, -2.0}, {1.0, -4.0}, 512);
  const double rel = std::abs(steep.discrete_sum / (0.3 * n5) - 1.0);
  if (rel > 0.1) r.fail("discrete sum off (3/10)N^5 by " + fmt(rel));
  const double int_rel = std::abs(steep.integral / (0.3 * n5) - 1.0);
  if (int_rel > 0.01) r.fail("integral off (3/10)N^5 by " + fmt(int_rel));
  const PowerLawTau flat = powerlaw_tau({1.0, -2.0}, {1.0, 0.0}, 1000000);
  if (std::abs(flat.integral - 1.5) > 1e-5) r.fail("flat integral " + fmt(flat.integral) + " != 3/2");
  const double sum_limit = std::numbers::pi * std::numbers::pi / 6.0 +
                           1.5 * std::pow(std::numbers::pi, 4) / 90.0;
  if (std::abs(flat.discrete_sum - sum_limit) > 1e-5) {
    r.fail("flat discrete sum " + fmt(flat.discrete_sum) + " != " + fmt(sum_limit));
  }
  if (r.pass) {
    r.detail = "sum/(0.3 N^5) - 1 = " + fmt(rel) + ", flat integral " + fmt(flat.integral);
  }
  return r;
}

CheckResult kalman_update_properties() {
  CheckResult r;
  RngStream rng = RngStream(14, StreamPurpose::kTest).substream(3);

  // PSD ordering for several error models on a strided network.
  {
    ModelParams params;
    params.n_grid = 64;
    const ObservationOperator op(params.n_grid, 16, params.domain_length);
    const GaussianState prior = kf_forecast(stationary_state(params), 0.04, params);
    const std::vector<ErrorModel> models = {
        DiagonalErrorModel{0.36, 16}, GrfErrorModel::for_operator(op, 0.5),
        DenseErrorModel(true_error_covariance(op, TrueErrorModel{}))};
    for (const ErrorModel& model : models) {
      const ObservationSet obs{random_normal(16, rng), op, 1};
      const GaussianState post = kf_update(prior, obs, model);
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(prior.covariance - post.covariance,
                                                              Eigen::EigenvaluesOnly);
      const double bound = -1e-8 * prior.covariance.norm();
      if (es.eigenvalues().minCoeff() < bound) {
        r.fail("P_prior - P_post has eigenvalue " + fmt(es.eigenvalues().minCoeff()));
      }
    }
  }

  // Fully diagonal case (H = I, R = r I): each Fourier mode is an
  // independent scalar problem.
  {
    ModelParams params;
    params.n_grid = 32;
    const int n = params.n_grid;
    const double r_var = 0.36;
    const ObservationOperator op(n, n, params.domain_length);
    GaussianState prior = stationary_state(params);
    RngStream mean_rng = rng.substream(7);
    prior.mean = spectral_to_grid(sample_stationary(params, mean_rng));
    const ObservationSet obs{random_normal(n, rng), op, 1};
    const GaussianState post = kf_update(prior, obs, DiagonalErrorModel{r_var, n});

    const SpectralField prior_hat = grid_to_spectral(prior.mean);
    const SpectralField obs_hat = grid_to_spectral(obs.values);
    const SpectralField post_hat = grid_to_spectral(post.mean);
    double worst = 0.0;
    for (int k = 0; k <= n / 2; ++k) {
      const double sigma2 = stationary_variance(k, params);
      const double gamma2 = r_var / n;  // variance of a DFT coefficient of white noise
      const ModePosterior expect =
          mode_posterior_stats(sigma2, gamma2, prior_hat.coefficient(k), obs_hat.coefficient(k));
      worst = std::max(worst, std::abs(post_hat.coefficient(k) - expect.mean) /
                                  std::max(1.0, std::abs(expect.mean)));
      // E|uhat_k|^2 = f^H P f / n^2 with f = e^{i k x}.
      Eigen::VectorXcd f(n);
      for (int x = 0; x < n; ++x) f[x] = std::polar(1.0, 2.0 * std::numbers::pi * k * x / n);
      const double var =
          (f.adjoint() * post.covariance.cast<std::complex<double>>() * f)(0).real() / (n * n);
      worst = std::max(worst, std::abs(var - expect.variance) / expect.variance);
    }
    if (worst > 1e-10) r.fail("per-mode deviation " + fmt(worst) + " > 1e-10");
    else if (r.pass) r.detail = "per-mode deviation " + fmt(worst);
  }
  return r;
}

CheckResult ess_resampling_invariants() {
  CheckResult r;
  RngStream rng = RngStream(15, StreamPurpose::kTest).substream(4);
  const int n = 50;
  for (int trial = 0; trial < 20; ++trial) {
    Ensemble a;
    a.members.assign(n, SpectralField(4));
    a.log_weights = Eigen::VectorXd::Constant(n, -std::log(n));
    Ensemble b = a;
    const Eigen::VectorXd e = 5.0 * random_normal(n, rng);
    reweight(a, e);
    reweight(b, (e.array() + 123.456).matrix());
    const double ess_a = effective_sample_size(a);
    const double ess_b = effective_sample_size(b);
    if (std::abs(ess_a - ess_b) > 1e-9 * ess_a) r.fail("ESS not invariant to a common exponent shift");
    if (ess_a < 1.0 - 1e-12 || ess_a > n + 1e-9) r.fail("ESS outside [1, N]: " + fmt(ess_a));
    if (std::abs(a.weights().sum() - 1.0) > 1e-12) r.fail("weights not normalized");
  }

  Eigen::VectorXd one_hot = Eigen::VectorXd::Zero(n);
  one_hot[7] = 1.0;
  if (effective_sample_size(one_hot) != 1.0) r.fail("one-hot ESS != 1");
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(n, 1.0 / n);
  if (std::abs(effective_sample_size(uniform) - n) > 1e-9) r.fail("uniform ESS != N");

  // One-hot weights resample onto the single live member.
  for (int i : multinomial_indices(one_hot, rng)) {
    if (i != 7) r.fail("one-hot resampling picked member " + std::to_string(i));
  }

  // Resampled ensembles carry uniform weights and copies of existing members.
  Ensemble ens;
  for (int i = 0; i < n; ++i) {
    SpectralField f(4);
    f.coefficient(0) = i;
    ens.members.push_back(f);
  }
  ens.log_weights = Eigen::VectorXd::Constant(n, -std::log(n));
  reweight(ens, random_normal(n, rng));
  const Ensemble res = resample_multinomial(ens, rng);
  if (res.size() != n) r.fail("resampling changed the ensemble size");
  if (std::abs(effective_sample_size(res) - n) > 1e-9) r.fail("post-resampling ESS != N");
  for (const auto& m : res.members) {
    const double id = m.coefficient(0).real();
    if (id < 0 || id >= n || id != std::floor(id)) r.fail("resampled member is not a copy");
  }

  // Multinomial counts match the weights (chi-square, 9 dof, p ~ 1e-4 cut).
  Eigen::VectorXd w(10);
  w << 0.02, 0.05, 0.08, 0.1, 0.15, 0.2, 0.1, 0.1, 0.12, 0.08;
  std::vector<double> counts(10, 0.0);
  const int rounds = 10000;
  for (int t = 0; t < rounds; ++t) {
    for (int i : multinomial_indices(w, rng)) counts[i] += 1.0;
  }
  double chi2 = 0.0;
  const double draws = 10.0 * rounds;
  for (int i = 0; i < 10; ++i) {
    const double expect = draws * w[i];
    chi2 += (counts[i] - expect) * (counts[i] - expect) / expect;
  }
  if (chi2 > 33.7) r.fail("multinomial chi-square " + fmt(chi2) + " > 33.7");
  if (r.pass) r.detail = "multinomial chi2 = " + fmt(chi2) + " (9 dof)";
  return r;
}

CheckResult determinism() {
  CheckResult r;
  ExperimentConfig c;
  c.model.n_grid = 64;
  c.n_obs = 16;
  c.n_particles = 24;
  c.n_cycles = 12;
  c.snapshot_cycle = 12;
  c.snapshot_ell2 = {0.5};
  c.emit_raw_crps = true;
  c.mode_rmse_modes = 8;
  SweepSpec sweep;
  sweep.values = {0.0, 0.5};
  sweep.runs = 2;

  const auto root = std::filesystem::temp_directory_path() /
                    ("grfda_determinism_" + std::to_string(::getpid()));
  const auto a = root / "a";
  const auto b = root / "b";
  sweep_and_emit(c, sweep, a);
  sweep_and_emit(c, sweep, b);
  int files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(a)) {
    ++files;
    const auto name = entry.path().filename();
    if (!std::filesystem::exists(b / name)) {
      r.fail(name.string() + " missing from the second run");
    } else if (read_file(entry.path()) != read_file(b / name)) {
      r.fail(name.string() + " differs between identical runs");
    }
  }
  std::filesystem::remove_all(root);
  if (files < 8) r.fail("expected 8 CSV files, found " + std::to_string(files));
  if (r.pass) r.detail = std::to_string(files) + " CSV files byte-identical";
  return r;
}

}  // namespace grfda::checks
