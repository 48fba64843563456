#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "walltherm/inverse.hpp"
#include "walltherm/timeutil.hpp"

namespace walltherm::harness {

// Named parameter bundles for the two working configurations: a fast desk
// network and the full-size one.
struct Preset {
  std::string name;
  std::vector<int> layer_sizes;
  pinn::TrainConfig train;
  inverse::InverseConfig inverse;
};

Preset desk_preset();
Preset paper_preset();
Preset preset_by_name(const std::string& name);

struct ScenarioSpec {
  std::string id;
  CivilDate day;
  double true_k = 2.0;
  std::string protocol = "t4_18";  // "t4_18" or "t1_5"
  bool spin_up = false;            // precondition the truth run for 3 days
  std::uint64_t seed = 1;
};

fvm::ThermographSchedule schedule_for_protocol(const std::string& protocol);

struct RunSettings {
  physics::WallSpec wall;  // conductivity overridden by each scenario
  physics::IndoorConditions indoor;
  weather::EnvOptions env_options;
  double k_min = 0.5;
  double k_max = 6.0;
  double scaler_margin = 5.0;
  fvm::SolverOptions fvm_options;
  inverse::EstimateOptions estimate;
  double spin_up_hours = 72.0;
};

struct ScenarioResult {
  ScenarioSpec spec;
  std::string season;
  double k_hat = 0.0;
  double abs_error = 0.0;
  double rel_error = 0.0;
  bool converged = false;
  std::string stop_reason;
  double initial_profile_mae = 0.0;  // K; 0 when the truth starts steady
  int outer_iters = 0;
  std::int64_t inner_steps = 0;
  double runtime_s = 0.0;
};

// Simulates the ground truth, extracts thermographs and runs the estimator.
// Artifacts (thermographs, k trace) land in artifact_dir when given.
ScenarioResult run_scenario(const ScenarioSpec& spec, const RunSettings& settings,
                            const std::vector<weather::RawWeatherRecord>& records,
                            const std::filesystem::path& artifact_dir = {});

// Mean absolute difference in kelvin between the network prediction and the
// reference solution on a dense space-time grid.
double forward_mae(const net::NetParams& params, const physics::Scaler& scaler,
                   double k_dim, const fvm::FieldHistory& truth, double dx = 5e-4,
                   double dt = 300.0);

// ---- statistics ----

struct BootstrapOptions {
  int n_resamples = 10000;
  int resample_size = 0;  // 0: same as the input length
  double confidence = 0.95;
  std::uint64_t seed = 7151;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Percentile bootstrap interval for the mean of `values`.
Interval bootstrap_mean_ci(const std::vector<double>& values, const BootstrapOptions& options);

// Linear-interpolation quantile (type 7) of sorted data, p in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double p);

struct BoxStats {
  double whisker_lo = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double whisker_hi = 0.0;
  std::vector<double> outliers;  // outside 1.5 IQR fences
};

BoxStats box_stats(std::vector<double> values);

// Rank correlation with average ranks on ties.
double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

double median(std::vector<double> values);

// ---- campaigns ----

struct CampaignConfig {
  std::string weather_csv;
  std::string out_dir = "runs";
  std::uint64_t seed = 1;
  std::string preset = "desk";
  std::vector<double> k_values;
  std::vector<CivilDate> days;
  std::vector<std::string> protocols;   // subset of {"t4_18","t1_5"}
  std::vector<bool> ic_modes;           // spin_up flags, e.g. {false, true}
  RunSettings settings;
  BootstrapOptions bootstrap;
  bool save_ktraces = true;
  std::string canonical_json;           // the parsed config, re-serialized
};

CampaignConfig load_campaign_config(const std::string& path);
std::string config_hash(const CampaignConfig& config);  // 64-bit FNV-1a, hex

std::vector<ScenarioSpec> scenario_grid(const CampaignConfig& config);

// Runs every scenario not already present in an existing rows.csv (resume),
// appending rows as they finish and rewriting rows.csv in grid order at the
// end; returns the run directory. Respects WALLTHERM_WORKERS for scenario
// level parallelism (default 1).
std::filesystem::path run_campaign(const CampaignConfig& config,
                                   const std::string& resume_dir, std::ostream& log);

std::vector<ScenarioResult> read_rows_csv(const std::string& path);
void write_rows_csv(const std::vector<ScenarioResult>& rows, const std::string& path);

// Regenerates results.csv, results.md, boxstats.csv and kerror_vs_icmae.csv
// from rows.csv inside the run directory; byte-stable for fixed inputs.
void write_report(const std::filesystem::path& run_dir, const BootstrapOptions& options);

}  // namespace walltherm::harness
