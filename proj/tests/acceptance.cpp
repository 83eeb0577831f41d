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

// Full-size acceptance run. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. `--only 1,3` restricts the run to some criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "grfda/experiment.hpp"
#include "grfda/metrics.hpp"
#include "property_checks.hpp"

namespace {

using namespace grfda;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

void report(int id, const std::string& name, const Verdict& v) {
  std::printf("criterion %d [%s] %s: %s\n", id, v.pass ? "PASS" : "FAIL", name.c_str(),
              v.detail.c_str());
  std::fflush(stdout);
}

std::vector<double> ell2_grid() { return parse_value_list("0:1:11"); }

/// Per-ell2 particle-filter and Kalman diagnostics from one sweep.
struct PointStats {
  double ell2 = 0.0;
  std::vector<PfSummary> pf;  // one per replicate
  double kf_true_tail_rmse = 0.0;
  double tau2 = 0.0;
};

constexpr int kSkipCycles = 10;  // RMSE statistics use the final 90 of 100 cycles

std::vector<PointStats> pf_sweep(const ExperimentConfig& config, const SweepSpec& sweep) {
  std::vector<PointStats> out;
  const auto t0 = Clock::now();
  run_sweep(config, sweep, [&](const SweepPoint& p) {
    PointStats s;
    s.ell2 = p.config.ell2;
    s.tau2 = p.tau.tau2;
    for (const PfReplicate& r : p.pf) s.pf.push_back(summarize_pf(r.run, kSkipCycles));
    const auto& kf = p.kf_true.rmse;
    s.kf_true_tail_rmse = median(std::vector<double>(kf.begin() + kSkipCycles, kf.end()));
    std::fprintf(stderr, "  n_obs=%d %s=%g  median ESS %.1f  tail RMSE %.3f  CRPS %.4f  (%.0fs)\n",
                 p.config.n_obs, std::string(to_string(sweep.axis)).c_str(), p.value,
                 s.pf.front().median_ess, s.pf.front().median_rmse_tail,
                 s.pf.front().pooled_median_crps, seconds_since(t0));
    out.push_back(std::move(s));
  });
  return out;
}

const PointStats& at(const std::vector<PointStats>& pts, double ell2) {
  for (const auto& p : pts) {
    if (std::abs(p.ell2 - ell2) < 1e-12) return p;
  }
  throw std::logic_error("ell2 value missing from sweep");
}

template <typename F>
double median_over_replicates(const PointStats& p, F field) {
  std::vector<double> v;
  for (const auto& s : p.pf) v.push_back(field(s));
  return median(v);
}

Verdict criterion_tau(const ExperimentConfig& base) {
  SweepSpec sweep;
  sweep.values = ell2_grid();
  std::vector<double> tau2;
  const auto t0 = Clock::now();
  run_sweep(base, sweep, [&](const SweepPoint& p) { tau2.push_back(p.tau.tau2); },
            {.run_pf = false});
  const double elapsed = seconds_since(t0);
  bool decreasing = true;
  for (std::size_t i = 1; i < tau2.size(); ++i) decreasing &= tau2[i] < tau2[i - 1];
  const bool at0 = tau2.front() >= 90.0 && tau2.front() <= 150.0;
  const bool at1 = tau2.back() >= 13.0 && tau2.back() <= 23.0;
  std::string curve;
  for (double t : tau2) curve += (curve.empty() ? "" : " ") + fmt(t, 3);
  return {at0 && at1 && decreasing && elapsed <= 600.0,
          "tau2(0)=" + fmt(tau2.front()) + (at0 ? " in" : " NOT in") + " [90,150], tau2(1)=" +
              fmt(tau2.back()) + (at1 ? " in" : " NOT in") + " [13,23], strictly decreasing=" +
              (decreasing ? "yes" : "no") + ", runtime " + fmt(elapsed, 3) + "s (<=600s); curve: " +
              curve};
}

struct EssNumbers {
  double r03 = 0.0, r1 = 0.0, mean_frac = 0.0;
  bool pass() const { return r03 >= 5.0 && r1 >= 15.0 && mean_frac >= 0.05 && mean_frac <= 0.30; }
  bool marginal() const {
    return r03 >= 0.8 * 5.0 && r1 >= 0.8 * 15.0 && mean_frac >= 0.8 * 0.05 &&
           mean_frac <= 0.30 / 0.8;
  }
};

EssNumbers ess_numbers(const std::vector<PointStats>& pts, int n_particles) {
  auto med = [](const PfSummary& s) { return s.median_ess; };
  const double e0 = median_over_replicates(at(pts, 0.0), med);
  EssNumbers n;
  n.r03 = median_over_replicates(at(pts, 0.3), med) / e0;
  n.r1 = median_over_replicates(at(pts, 1.0), med) / e0;
  n.mean_frac =
      median_over_replicates(at(pts, 1.0), [](const PfSummary& s) { return s.mean_ess; }) /
      n_particles;
  return n;
}

Verdict criterion_ess(const ExperimentConfig& base, const std::vector<PointStats>& pts) {
  EssNumbers n = ess_numbers(pts, base.n_particles);
  std::string seeds = "1 seed";
  if (!n.pass() && n.marginal()) {
    std::fprintf(stderr, "criterion 2 marginal on one seed; rerunning with 3 filter seeds\n");
    SweepSpec sweep;
    sweep.values = {0.0, 0.3, 1.0};
    sweep.runs = 3;
    n = ess_numbers(pf_sweep(base, sweep), base.n_particles);
    seeds = "median of 3 seeds";
  }
  return {n.pass(), "ESS(0.3)/ESS(0)=" + fmt(n.r03, 3) + " (>=5), ESS(1)/ESS(0)=" + fmt(n.r1, 3) +
                        " (>=15), mean ESS(1)/N_e=" + fmt(n.mean_frac, 3) + " (in [0.05,0.30]), " +
                        seeds};
}

Verdict criterion_rmse(const std::vector<PointStats>& pts) {
  double worst = 0.0, worst_ell2 = 0.0;
  for (const auto& p : pts) {
    const double r = p.pf.front().median_rmse_tail;
    if (r > worst) {
      worst = r;
      worst_ell2 = p.ell2;
    }
  }
  return {worst < 0.6, "max over ell2 of median PF RMSE (final 90 cycles)=" + fmt(worst, 3) +
                           " at ell2=" + fmt(worst_ell2, 2) + " (<0.6)"};
}

Verdict criterion_kalman(const std::vector<PointStats>& pts) {
  const double kf = pts.front().kf_true_tail_rmse;
  const bool in_range = kf >= 0.24 && kf <= 0.40;
  int beaten = 0;
  double closest = 1e300;
  for (const auto& p : pts) {
    const double pf = p.pf.front().median_rmse_tail;
    beaten += kf < pf;
    closest = std::min(closest, pf - kf);
  }
  const bool all = beaten == static_cast<int>(pts.size());
  return {in_range && all,
          "KF(true R) median RMSE=" + fmt(kf, 3) + (in_range ? " in" : " NOT in") +
              " [0.24,0.40]; KF < PF at " + std::to_string(beaten) + "/" +
              std::to_string(pts.size()) + " ell2 values (smallest margin " + fmt(closest, 3) + ")"};
}

double argmin_ell2(const std::vector<PointStats>& pts) {
  const auto it = std::min_element(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.pf.front().pooled_median_crps < b.pf.front().pooled_median_crps;
  });
  return it->ell2;
}

Verdict criterion_crps(const ExperimentConfig& base, const std::vector<PointStats>& pts64) {
  const double c0 = at(pts64, 0.0).pf.front().pooled_median_crps;
  const double c3 = at(pts64, 0.3).pf.front().pooled_median_crps;
  const bool drop = c3 <= 0.9 * c0;
  SweepSpec sweep;
  sweep.values = ell2_grid();
  std::map<int, double> best;
  for (int n_obs : {16, 128}) {
    ExperimentConfig c = base;
    c.n_obs = n_obs;
    best[n_obs] = argmin_ell2(pf_sweep(c, sweep));
  }
  const bool shift = best[128] > best[16];
  return {drop && shift, "N_y=64 CRPS(0)=" + fmt(c0, 4) + " CRPS(0.3)=" + fmt(c3, 4) + " (drop " +
                             fmt(100.0 * (1.0 - c3 / c0), 3) + "%, need >=10%); optimal ell2 " +
                             fmt(best[16], 2) + " at N_y=16 vs " + fmt(best[128], 2) +
                             " at N_y=128 (need larger at 128)"};
}

Verdict criterion_spread(const std::vector<PointStats>& pts) {
  const double s0 = at(pts, 0.0).pf.front().spread_rmse_ratio;
  const double s1 = at(pts, 1.0).pf.front().spread_rmse_ratio;
  return {s1 >= 1.5 * s0, "spread/RMSE " + fmt(s0, 3) + " at ell2=0, " + fmt(s1, 3) +
                              " at ell2=1 (ratio " + fmt(s1 / s0, 3) + ", need >=1.5)"};
}

Verdict criterion_ensemble_size(const ExperimentConfig& base) {
  ExperimentConfig c = base;
  c.ell2 = 0.3;
  SweepSpec sweep;
  sweep.axis = SweepAxis::kNParticles;
  sweep.values = {100, 200, 400, 800, 1600};
  std::vector<double> crps;
  for (const auto& p : pf_sweep(c, sweep)) crps.push_back(p.pf.front().pooled_mean_crps);
  bool ok = true;
  std::string curve;
  for (std::size_t i = 0; i < crps.size(); ++i) {
    if (i > 0) ok &= crps[i] <= 1.02 * crps[i - 1];
    curve += (curve.empty() ? "" : ", ") + fmt(sweep.values[i], 4) + ":" + fmt(crps[i], 4);
  }
  return {ok, "mean CRPS by N_e {" + curve + "} nonincreasing within 2%"};
}

Verdict criterion_properties() {
  const std::vector<std::pair<const char*, std::function<checks::CheckResult()>>> suites = {
      {"a grf_quadratic_form", checks::grf_quadratic_form_routes},
      {"b crps_integral", checks::crps_matches_integral},
      {"c ou_moments", checks::ou_moments},
      {"d diagonal_eigenvalues", checks::diagonal_case_eigenvalues},
      {"e powerlaw_tau", checks::powerlaw_limits},
      {"f kalman_update", checks::kalman_update_properties},
      {"g ess_resampling", checks::ess_resampling_invariants},
      {"h determinism", checks::determinism},
  };
  const auto t0 = Clock::now();
  bool all = true;
  std::string detail;
  for (const auto& [name, run] : suites) {
    const checks::CheckResult r = run();
    all &= r.pass;
    detail += std::string(detail.empty() ? "" : ", ") + name + (r.pass ? " ok" : " FAILED (" + r.detail + ")");
  }
  const double elapsed = seconds_since(t0);
  return {all && elapsed < 120.0, detail + "; " + fmt(elapsed, 3) + "s (<120s)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance run for the grfda twin experiment"};
  std::vector<int> only;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8}
                                              : std::set<int>(only.begin(), only.end());
  const auto want = [&](int id) { return selected.count(id) > 0; };

  ExperimentConfig base;
  base.snapshot_cycle = 0;
  base.validate();

  int failures = 0;
  const auto record = [&](int id, const std::string& name, const Verdict& v) {
    report(id, name, v);
    failures += v.pass ? 0 : 1;
  };

  try {
    if (want(1)) record(1, "tau2 sweep", criterion_tau(base));

    std::vector<PointStats> main_sweep;
    if (want(2) || want(3) || want(4) || want(5) || want(6)) {
      std::fprintf(stderr, "particle-filter sweep over 11 ell2 values at N_y=64\n");
      SweepSpec sweep;
      sweep.values = ell2_grid();
      main_sweep = pf_sweep(base, sweep);
    }
    if (want(2)) record(2, "ESS improvement", criterion_ess(base, main_sweep));
    if (want(3)) record(3, "RMSE robustness", criterion_rmse(main_sweep));
    if (want(4)) record(4, "Kalman baseline", criterion_kalman(main_sweep));
    if (want(5)) record(5, "CRPS improvement", criterion_crps(base, main_sweep));
    if (want(6)) record(6, "spread recovery", criterion_spread(main_sweep));
    if (want(7)) record(7, "ensemble-size sweep", criterion_ensemble_size(base));
    if (want(8)) record(8, "property suites", criterion_properties());
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 2;
  }

  std::printf("%d of %zu criteria failed\n", failures, selected.size());
  return failures == 0 ? 0 : 1;
}
