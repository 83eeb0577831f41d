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

#include "grfda/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "grfda/metrics.hpp"

namespace grfda {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(std::string_view key, std::string_view text) {
  text = trim(text);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(out)) {
    throw std::invalid_argument(std::string(key) + ": expected a finite number, got '" +
                                std::string(text) + "'");
  }
  return out;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view text) {
  text = trim(text);
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument(std::string(key) + ": expected an integer, got '" +
                                std::string(text) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw std::invalid_argument(std::string(key) + ": expected true or false, got '" +
                              std::string(text) + "'");
}

std::string format_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  return out;
}

struct Setting {
  std::string_view key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Setting number(std::string_view key, T ExperimentConfig::*field) {
  return {key,
          [key, field](ExperimentConfig& c, std::string_view v) {
            if constexpr (std::is_floating_point_v<T>) {
              c.*field = parse_double(key, v);
            } else {
              c.*field = parse_int<T>(key, v);
            }
          },
          [field](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.*field);
            } else {
              return std::to_string(c.*field);
            }
          }};
}

template <typename T>
Setting model_number(std::string_view key, T ModelParams::*field) {
  return {key,
          [key, field](ExperimentConfig& c, std::string_view v) {
            if constexpr (std::is_floating_point_v<T>) {
              c.model.*field = parse_double(key, v);
            } else {
              c.model.*field = parse_int<T>(key, v);
            }
          },
          [field](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(c.model.*field);
            } else {
              return std::to_string(c.model.*field);
            }
          }};
}

const std::vector<Setting>& settings() {
  static const std::vector<Setting> table = {
      model_number("model.b", &ModelParams::b),
      model_number("model.c", &ModelParams::c),
      model_number("model.nu", &ModelParams::nu),
      model_number("model.domain_length", &ModelParams::domain_length),
      model_number("model.n_grid", &ModelParams::n_grid),
      {"model.convention",
       [](ExperimentConfig& c, std::string_view v) {
         v = trim(v);
         if (v == "real_part") {
           c.model.convention = FourierConvention::kRealPart;
         } else if (v == "complex_coefficient") {
           c.model.convention = FourierConvention::kComplexCoefficient;
         } else {
           throw std::invalid_argument(
               "model.convention: expected real_part or complex_coefficient, got '" +
               std::string(v) + "'");
         }
       },
       [](const ExperimentConfig& c) -> std::string {
         return c.model.convention == FourierConvention::kRealPart ? "real_part"
                                                                   : "complex_coefficient";
       }},
      number("time.dt", &ExperimentConfig::dt),
      number("time.n_cycles", &ExperimentConfig::n_cycles),
      number("obs.n_obs", &ExperimentConfig::n_obs),
      {"obs.variance",
       [](ExperimentConfig& c, std::string_view v) {
         c.obs_error.variance = parse_double("obs.variance", v);
       },
       [](const ExperimentConfig& c) { return format_double(c.obs_error.variance); }},
      {"obs.corr_length",
       [](ExperimentConfig& c, std::string_view v) {
         c.obs_error.corr_length = parse_double("obs.corr_length", v);
       },
       [](const ExperimentConfig& c) { return format_double(c.obs_error.corr_length); }},
      number("filter.n_particles", &ExperimentConfig::n_particles),
      number("filter.resample_threshold", &ExperimentConfig::resample_threshold),
      {"filter.error_model",
       [](ExperimentConfig& c, std::string_view v) {
         v = trim(v);
         if (v == "grf") {
           c.error_kind = FilterErrorKind::kGrf;
         } else if (v == "diagonal") {
           c.error_kind = FilterErrorKind::kDiagonal;
         } else if (v == "true") {
           c.error_kind = FilterErrorKind::kTrue;
         } else {
           throw std::invalid_argument("filter.error_model: expected grf, diagonal or true, got '" +
                                       std::string(v) + "'");
         }
       },
       [](const ExperimentConfig& c) { return std::string(to_string(c.error_kind)); }},
      number("grf.ell2", &ExperimentConfig::ell2),
      number("grf.kappa", &ExperimentConfig::kappa),
      number("grf.r0", &ExperimentConfig::r0),
      number("seed.truth", &ExperimentConfig::truth_seed),
      number("seed.obs", &ExperimentConfig::obs_seed),
      number("seed.filter", &ExperimentConfig::filter_seed),
      {"sweep.axis",
       [](ExperimentConfig& c, std::string_view v) {
         v = trim(v);
         if (v == "ell2") {
           c.sweep.axis = SweepAxis::kEll2;
         } else if (v == "n_obs") {
           c.sweep.axis = SweepAxis::kNObs;
         } else if (v == "n_particles") {
           c.sweep.axis = SweepAxis::kNParticles;
         } else {
           throw std::invalid_argument("sweep.axis: expected ell2, n_obs or n_particles, got '" +
                                       std::string(v) + "'");
         }
       },
       [](const ExperimentConfig& c) { return std::string(to_string(c.sweep.axis)); }},
      {"sweep.values",
       [](ExperimentConfig& c, std::string_view v) { c.sweep.values = parse_value_list(v); },
       [](const ExperimentConfig& c) { return format_list(c.sweep.values); }},
      {"sweep.runs",
       [](ExperimentConfig& c, std::string_view v) { c.sweep.runs = parse_int<int>("sweep.runs", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.sweep.runs); }},
      number("output.snapshot_cycle", &ExperimentConfig::snapshot_cycle),
      number("output.snapshot_members", &ExperimentConfig::snapshot_members),
      {"output.snapshot_ell2",
       [](ExperimentConfig& c, std::string_view v) {
         c.snapshot_ell2 = trim(v).empty() ? std::vector<double>{} : parse_value_list(v);
       },
       [](const ExperimentConfig& c) { return format_list(c.snapshot_ell2); }},
      {"output.raw_crps",
       [](ExperimentConfig& c, std::string_view v) {
         c.emit_raw_crps = parse_bool("output.raw_crps", v);
       },
       [](const ExperimentConfig& c) -> std::string { return c.emit_raw_crps ? "true" : "false"; }},
      number("output.mode_rmse_modes", &ExperimentConfig::mode_rmse_modes),
  };
  return table;
}

bool is_integral(double v) { return std::floor(v) == v && std::abs(v) < 1e9; }

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

std::string_view to_string(FilterErrorKind kind) {
  switch (kind) {
    case FilterErrorKind::kGrf: return "grf";
    case FilterErrorKind::kDiagonal: return "diagonal";
    case FilterErrorKind::kTrue: return "true";
  }
  return "?";
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kEll2: return "ell2";
    case SweepAxis::kNObs: return "n_obs";
    case SweepAxis::kNParticles: return "n_particles";
  }
  return "?";
}

std::vector<double> parse_value_list(std::string_view text) {
  text = trim(text);
  if (text.empty()) throw std::invalid_argument("value list is empty");
  if (text.find(':') != std::string_view::npos) {
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (true) {
      const auto next = text.find(':', pos);
      parts.push_back(text.substr(pos, next - pos));
      if (next == std::string_view::npos) break;
      pos = next + 1;
    }
    if (parts.size() != 3) throw std::invalid_argument("range must be start:stop:count");
    const double start = parse_double("range start", parts[0]);
    const double stop = parse_double("range stop", parts[1]);
    const int count = parse_int<int>("range count", parts[2]);
    if (count < 1) throw std::invalid_argument("range count must be >= 1");
    std::vector<double> out(count);
    for (int i = 0; i < count; ++i) {
      out[i] = count == 1 ? start : start + (stop - start) * i / (count - 1);
    }
    if (count > 1) out.back() = stop;
    return out;
  }
  std::vector<double> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = text.find(',', pos);
    out.push_back(parse_double("value list", text.substr(pos, next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

SweepSpec::SweepSpec() : values(parse_value_list("0:1:101")) {}

void SweepSpec::validate() const {
  if (values.empty()) throw std::invalid_argument("sweep.values must be nonempty");
  if (runs < 1) throw std::invalid_argument("sweep.runs must be >= 1");
  for (double v : values) {
    if (axis == SweepAxis::kEll2 && !(v >= 0.0)) {
      throw std::invalid_argument("sweep.values: ell2 must be nonnegative");
    }
    if (axis != SweepAxis::kEll2 && (!is_integral(v) || v < 1.0)) {
      throw std::invalid_argument("sweep.values: " + std::string(to_string(axis)) +
                                  " values must be positive integers");
    }
  }
}

void ExperimentConfig::validate() const {
  model.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("time.dt must be positive");
  if (n_cycles < 1) throw std::invalid_argument("time.n_cycles must be >= 1");
  if (n_obs < 1) throw std::invalid_argument("obs.n_obs must be >= 1");
  if (model.n_grid % n_obs != 0) {
    throw std::invalid_argument("obs.n_obs=" + std::to_string(n_obs) +
                                " does not divide model.n_grid=" + std::to_string(model.n_grid));
  }
  if (!(obs_error.variance > 0.0)) throw std::invalid_argument("obs.variance must be positive");
  if (!(obs_error.corr_length > 0.0)) {
    throw std::invalid_argument("obs.corr_length must be positive");
  }
  if (n_particles < 1) throw std::invalid_argument("filter.n_particles must be >= 1");
  if (!(resample_threshold > 0.0 && resample_threshold <= 1.0)) {
    throw std::invalid_argument("filter.resample_threshold must lie in (0, 1]");
  }
  if (!(ell2 >= 0.0)) throw std::invalid_argument("grf.ell2 must be nonnegative");
  if (!(kappa > 0.0)) throw std::invalid_argument("grf.kappa must be positive");
  if (!(r0 > 0.0)) throw std::invalid_argument("grf.r0 must be positive");
  if (snapshot_cycle < 0 || snapshot_cycle > n_cycles) {
    throw std::invalid_argument("output.snapshot_cycle must lie in [0, time.n_cycles]");
  }
  if (snapshot_members < 1) throw std::invalid_argument("output.snapshot_members must be >= 1");
  if (mode_rmse_modes < 1 || mode_rmse_modes > model.n_grid / 2) {
    throw std::invalid_argument("output.mode_rmse_modes must lie in [1, model.n_grid / 2]");
  }
  sweep.validate();
  if (sweep.axis == SweepAxis::kNObs) {
    for (double v : sweep.values) {
      if (model.n_grid % static_cast<int>(v) != 0) {
        throw std::invalid_argument("sweep value n_obs=" + format_double(v) +
                                    " does not divide model.n_grid=" +
                                    std::to_string(model.n_grid));
      }
    }
  }
}

ObservationOperator ExperimentConfig::observation_operator() const {
  return ObservationOperator(model.n_grid, n_obs, model.domain_length);
}

ErrorModel ExperimentConfig::filter_error_model(const ObservationOperator& op) const {
  switch (error_kind) {
    case FilterErrorKind::kGrf: return GrfErrorModel::for_operator(op, ell2, r0, kappa);
    case FilterErrorKind::kDiagonal: return DiagonalErrorModel{r0, op.n_obs()};
    case FilterErrorKind::kTrue: return DenseErrorModel(true_error_covariance(op, obs_error));
  }
  throw std::logic_error("unhandled error model kind");
}

FilterConfig ExperimentConfig::filter_config(const ObservationOperator& op, int replicate) const {
  FilterConfig out;
  out.n_particles = n_particles;
  out.resample_threshold = resample_threshold;
  out.error_model = filter_error_model(op);
  out.seed = filter_seed + static_cast<std::uint64_t>(replicate);
  return out;
}

bool ExperimentConfig::wants_snapshot() const {
  if (snapshot_cycle == 0) return false;
  return std::any_of(snapshot_ell2.begin(), snapshot_ell2.end(),
                     [&](double v) { return std::abs(v - ell2) <= 1e-9; });
}

void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value) {
  key = trim(key);
  for (const auto& s : settings()) {
    if (s.key == key) {
      s.set(config, value);
      return;
    }
  }
  throw std::invalid_argument("unknown key '" + std::string(key) + "'");
}

ExperimentConfig parse_config(std::istream& in, std::string_view source) {
  ExperimentConfig config;
  std::map<std::string, int, std::less<>> seen;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view text = line;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const std::string where = std::string(source) + ":" + std::to_string(number) + ": ";
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument(where + "expected 'key = value', got '" + std::string(text) + "'");
    }
    const std::string key(trim(text.substr(0, eq)));
    if (const auto it = seen.find(key); it != seen.end()) {
      throw std::invalid_argument(where + "duplicate key '" + key + "' (first set on line " +
                                  std::to_string(it->second) + ")");
    }
    seen.emplace(key, number);
    try {
      apply_setting(config, key, text.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + e.what());
    }
  }
  config.validate();
  return config;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  return parse_config(in, path.string());
}

std::string format_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& s : settings()) {
    out += s.key;
    out += " = ";
    out += s.get(config);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

PfSummary summarize_pf(const FilterRun& run, int skip) {
  if (run.cycles.empty()) throw std::invalid_argument("summarize_pf: empty run");
  PfSummary out;
  const std::vector<double> ess = run.ess_series();
  const std::vector<double> rmse_all = run.rmse_series();
  out.median_ess = median(ess);
  out.mean_ess = std::accumulate(ess.begin(), ess.end(), 0.0) / static_cast<double>(ess.size());
  out.median_rmse = median(rmse_all);
  const auto tail_begin = rmse_all.begin() + std::min<std::ptrdiff_t>(skip, rmse_all.size() - 1);
  out.median_rmse_tail = median(std::vector<double>(tail_begin, rmse_all.end()));
  double spread = 0.0;
  double err = 0.0;
  for (const auto& c : run.cycles) {
    spread += c.spread;
    err += c.rmse;
    out.resample_count += c.resampled ? 1 : 0;
  }
  out.spread_rmse_ratio = err > 0.0 ? spread / err : 0.0;
  if (!run.crps_values.empty()) {
    out.pooled_median_crps = median(run.crps_values);
    out.pooled_mean_crps = std::accumulate(run.crps_values.begin(), run.crps_values.end(), 0.0) /
                           static_cast<double>(run.crps_values.size());
  }
  return out;
}

namespace {

ExperimentConfig at_value(const ExperimentConfig& base, SweepAxis axis, double value) {
  ExperimentConfig c = base;
  switch (axis) {
    case SweepAxis::kEll2: c.ell2 = value; break;
    case SweepAxis::kNObs: c.n_obs = static_cast<int>(value); break;
    case SweepAxis::kNParticles: c.n_particles = static_cast<int>(value); break;
  }
  c.validate();
  return c;
}

}  // namespace

void run_sweep(const ExperimentConfig& config, const SweepSpec& sweep, const PointSink& sink,
               const SweepOptions& options) {
  config.validate();
  sweep.validate();
  const TruthRun truth =
      simulate_truth(config.model, config.dt, config.n_cycles, config.truth_seed);
  std::map<int, std::vector<ObservationSet>> observations;
  std::map<int, KalmanRun> kf_true;

  for (double value : sweep.values) {
    const ExperimentConfig point_config = at_value(config, sweep.axis, value);
    const ObservationOperator op = point_config.observation_operator();
    auto obs_it = observations.find(op.n_obs());
    if (obs_it == observations.end()) {
      obs_it = observations
                   .emplace(op.n_obs(), generate_observations(truth, op, point_config.obs_error,
                                                              point_config.obs_seed))
                   .first;
    }
    bool kf_true_is_new = false;
    auto kf_it = kf_true.find(op.n_obs());
    if (kf_it == kf_true.end()) {
      const ErrorModel true_model = DenseErrorModel(true_error_covariance(op, point_config.obs_error));
      kf_it = kf_true.emplace(op.n_obs(), run_kf(truth, obs_it->second, true_model)).first;
      kf_true_is_new = true;
    }

    const ErrorModel model = point_config.filter_error_model(op);
    SweepPoint point{value, point_config, truth, obs_it->second, kf_it->second, kf_true_is_new,
                     {}, {}, {}, {}};
    point.kf_model = run_kf(truth, obs_it->second, model);
    point.tau = snyder_tau_squared_observed(point.kf_model.final_prior_observed, model);
    point.tau_posterior = snyder_tau_squared_observed(point.kf_model.final_posterior_observed, model);

    if (options.run_pf) {
      SirOptions sir;
      if (point_config.wants_snapshot()) sir.snapshot_cycle = point_config.snapshot_cycle;
      for (int r = 0; r < sweep.runs; ++r) {
        const FilterConfig fc = point_config.filter_config(op, r);
        point.pf.push_back({r, fc.seed, run_sir(truth, obs_it->second, fc, sir)});
      }
    }
    sink(point);
  }
}

void run_experiment(const ExperimentConfig& config, const PointSink& sink,
                    const SweepOptions& options) {
  SweepSpec one;
  one.axis = SweepAxis::kEll2;
  one.values = {config.ell2};
  one.runs = 1;
  run_sweep(config, one, sink, options);
}

// ---------------------------------------------------------------------------

namespace {

/// Buffered CSV file written under a temporary name and renamed on commit.
class CsvFile {
 public:
  CsvFile(std::filesystem::path path, std::string_view header)
      : path_(std::move(path)), tmp_(path_.string() + ".tmp"), out_(tmp_, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write " + tmp_.string());
    out_ << header << '\n';
  }

  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ",") << text(fields), first = false), ...);
    out_ << '\n';
  }

  void commit() {
    if (committed_) return;
    out_.close();
    if (!out_) throw std::runtime_error("failed writing " + tmp_.string());
    std::filesystem::rename(tmp_, path_);
    committed_ = true;
  }

 private:
  static std::string text(double v) { return format_double(v); }
  static std::string text(int v) { return std::to_string(v); }
  static std::string text(std::uint64_t v) { return std::to_string(v); }
  static std::string text(std::string_view v) { return std::string(v); }
  static std::string text(const char* v) { return v; }

  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

}  // namespace

struct CsvEmitter::Impl {
  std::filesystem::path dir;
  bool include_pf;
  bool raw_crps;
  std::unique_ptr<CsvFile> tau2, mode_rmse, rmse, ess, crps, summary, snapshots, crps_raw;
};

CsvEmitter::CsvEmitter(const std::filesystem::path& dir, const ExperimentConfig& config,
                       bool include_pf)
    : impl_(std::make_unique<Impl>(
          Impl{dir, include_pf, config.emit_raw_crps, {}, {}, {}, {}, {}, {}, {}, {}})) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory " + dir.string());
  }
  Impl& d = *impl_;
  d.tau2 = std::make_unique<CsvFile>(
      dir / "tau2.csv",
      "n_obs,ell2,tau2,required_ensemble,log10_required_ensemble,tau2_posterior");
  d.mode_rmse = std::make_unique<CsvFile>(dir / "mode_rmse.csv",
                                          "filter,n_obs,ell2,n_particles,replicate,mode,normalized_rmse");
  d.rmse = std::make_unique<CsvFile>(dir / "rmse.csv",
                                     "filter,n_obs,ell2,n_particles,replicate,cycle,rmse,spread");
  if (include_pf) {
    d.ess = std::make_unique<CsvFile>(dir / "ess.csv",
                                      "n_obs,ell2,n_particles,replicate,cycle,ess,resampled");
    d.crps = std::make_unique<CsvFile>(dir / "crps.csv",
                                       "n_obs,ell2,n_particles,replicate,median_crps,mean_crps");
    d.summary = std::make_unique<CsvFile>(
        dir / "summary.csv",
        "n_obs,ell2,n_particles,replicate,seed,median_ess,mean_ess,resample_count,median_rmse,"
        "median_rmse_tail,spread_rmse_ratio,pooled_median_crps,pooled_mean_crps,kf_true_median_rmse");
    d.snapshots = std::make_unique<CsvFile>(
        dir / "snapshots.csv",
        "n_obs,ell2,n_particles,replicate,cycle,series,member,weight,index,x,value");
    if (d.raw_crps) {
      d.crps_raw = std::make_unique<CsvFile>(dir / "crps_raw.csv",
                                             "n_obs,ell2,n_particles,replicate,cycle,grid_index,crps");
    }
  }
}

CsvEmitter::~CsvEmitter() {
  try {
    close();
  } catch (...) {
  }
}

void CsvEmitter::close() {
  Impl& d = *impl_;
  for (auto* f : {&d.tau2, &d.mode_rmse, &d.rmse, &d.ess, &d.crps, &d.summary, &d.snapshots,
                  &d.crps_raw}) {
    if (*f) (*f)->commit();
  }
}

void CsvEmitter::operator()(const SweepPoint& p) {
  Impl& d = *impl_;
  const ExperimentConfig& c = p.config;
  const ModelParams& params = c.model;
  const int n_obs = c.n_obs;
  const std::span<const SpectralField> truth_states(p.truth.states.data() + 1,
                                                    p.truth.states.size() - 1);

  d.tau2->row(n_obs, c.ell2, p.tau.tau2, p.tau.required_ensemble, p.tau.log10_required_ensemble,
              p.tau_posterior.tau2);

  auto kf_rows = [&](std::string_view label, const KalmanRun& kf, std::string_view ell2) {
    for (std::size_t t = 0; t < kf.rmse.size(); ++t) {
      const double spread = std::sqrt(kf.posterior_trace[t] / params.n_grid);
      d.rmse->row(label, n_obs, ell2, "", "", static_cast<int>(t + 1), kf.rmse[t], spread);
    }
    const Eigen::VectorXd mr =
        normalized_mode_rmse(kf.mean_spectra, truth_states, params, c.mode_rmse_modes);
    for (int k = 0; k < mr.size(); ++k) d.mode_rmse->row(label, n_obs, ell2, "", "", k, mr[k]);
  };
  const std::string ell2_text = format_double(c.ell2);
  if (p.kf_true_is_new) kf_rows("kf_true", p.kf_true, "");
  kf_rows("kf_model", p.kf_model, ell2_text);

  if (!d.include_pf) return;
  const double kf_true_median = median(p.kf_true.rmse);
  for (const PfReplicate& rep : p.pf) {
    const FilterRun& run = rep.run;
    for (const CycleRecord& cr : run.cycles) {
      d.ess->row(n_obs, c.ell2, c.n_particles, rep.replicate, cr.cycle, cr.ess,
                 cr.resampled ? 1 : 0);
      d.rmse->row("pf", n_obs, ell2_text, c.n_particles, rep.replicate, cr.cycle, cr.rmse,
                  cr.spread);
    }
    const PfSummary s = summarize_pf(run);
    d.crps->row(n_obs, c.ell2, c.n_particles, rep.replicate, s.pooled_median_crps,
                s.pooled_mean_crps);
    d.summary->row(n_obs, c.ell2, c.n_particles, rep.replicate, rep.seed, s.median_ess, s.mean_ess,
                   s.resample_count, s.median_rmse, s.median_rmse_tail, s.spread_rmse_ratio,
                   s.pooled_median_crps, s.pooled_mean_crps, kf_true_median);
    if (!run.mean_spectra.empty()) {
      const Eigen::VectorXd mr =
          normalized_mode_rmse(run.mean_spectra, truth_states, params, c.mode_rmse_modes);
      for (int k = 0; k < mr.size(); ++k) {
        d.mode_rmse->row("pf", n_obs, ell2_text, c.n_particles, rep.replicate, k, mr[k]);
      }
    }
    if (d.crps_raw) {
      const int n = params.n_grid;
      for (std::size_t i = 0; i < run.crps_values.size(); ++i) {
        d.crps_raw->row(n_obs, c.ell2, c.n_particles, rep.replicate, static_cast<int>(i / n) + 1,
                        static_cast<int>(i % n), run.crps_values[i]);
      }
    }
    if (run.snapshot) {
      const EnsembleSnapshot& snap = *run.snapshot;
      const int cycle = snap.cycle;
      auto emit = [&](std::string_view series, int member, double weight, const auto& values,
                      double spacing) {
        for (Eigen::Index i = 0; i < values.size(); ++i) {
          d.snapshots->row(n_obs, c.ell2, c.n_particles, rep.replicate, cycle, series, member,
                           weight, static_cast<int>(i), spacing * static_cast<double>(i), values[i]);
        }
      };
      std::vector<int> order(snap.weights.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return snap.weights[a] > snap.weights[b]; });
      const int shown = std::min<int>(c.snapshot_members, static_cast<int>(order.size()));
      for (int j = 0; j < shown; ++j) {
        const int m = order[j];
        emit("member", m, snap.weights[m], snap.member_grids.col(m), params.dx());
      }
      emit("posterior_mean", -1, 1.0, run.cycles[cycle - 1].posterior_mean, params.dx());
      emit("truth", -1, 1.0, p.truth.grids[cycle], params.dx());
      const ObservationSet& obs = p.observations[cycle - 1];
      emit("observation", -1, 1.0, obs.values, obs.op.delta());
    }
  }
}

void sweep_and_emit(const ExperimentConfig& config, const SweepSpec& sweep,
                    const std::filesystem::path& dir, const SweepOptions& options) {
  CsvEmitter emitter(dir, config, options.run_pf);
  run_sweep(config, sweep, [&](const SweepPoint& p) { emitter(p); }, options);
  emitter.close();
}

void write_truth_csv(const TruthRun& truth, const std::filesystem::path& path) {
  CsvFile f(path, "cycle,time,grid_index,x,value");
  const double dx = truth.params.dx();
  for (std::size_t t = 0; t < truth.grids.size(); ++t) {
    const GridField& g = truth.grids[t];
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      f.row(static_cast<int>(t), truth.dt * static_cast<double>(t), static_cast<int>(i),
            dx * static_cast<double>(i), g[i]);
    }
  }
  f.commit();
}

void write_observations_csv(const std::vector<ObservationSet>& observations, double dt,
                            const std::filesystem::path& path) {
  CsvFile f(path, "n_obs,cycle,time,obs_index,grid_index,x,value");
  for (const ObservationSet& obs : observations) {
    for (int j = 0; j < obs.op.n_obs(); ++j) {
      f.row(obs.op.n_obs(), obs.time_index, dt * obs.time_index, j, obs.op.grid_index(j),
            obs.op.delta() * j, obs.values[j]);
    }
  }
  f.commit();
}

}  // namespace grfda
