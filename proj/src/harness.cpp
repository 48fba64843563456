#include "walltherm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "walltherm/csvio.hpp"
#include "walltherm/errors.hpp"

namespace walltherm::harness {
namespace {

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex16(std::uint64_t value) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string ic_mode_name(bool spin_up) { return spin_up ? "spin_up" : "steady"; }

const std::vector<std::string>& protocol_order() {
  static const std::vector<std::string> order = {"t4_18", "t1_5"};
  return order;
}

}  // namespace

Preset desk_preset() {
  Preset p;
  p.name = "desk";
  p.layer_sizes = {3, 64, 64, 64, 64, 1};
  p.inverse.max_outer = 800;
  return p;
}

Preset paper_preset() {
  Preset p;
  p.name = "paper";
  p.layer_sizes = {3, 256, 256, 256, 256, 1};
  p.inverse.max_outer = 800;
  return p;
}

Preset preset_by_name(const std::string& name) {
  if (name == "desk") return desk_preset();
  if (name == "paper") return paper_preset();
  throw DataError("unknown preset '" + name + "' (expected 'desk' or 'paper')");
}

fvm::ThermographSchedule schedule_for_protocol(const std::string& protocol) {
  if (protocol == "t4_18") return fvm::schedule_t4_18();
  if (protocol == "t1_5") return fvm::schedule_t1_5();
  throw DataError("unknown protocol '" + protocol + "' (expected 't4_18' or 't1_5')");
}

ScenarioResult run_scenario(const ScenarioSpec& spec, const RunSettings& settings,
                            const std::vector<weather::RawWeatherRecord>& records,
                            const std::filesystem::path& artifact_dir) {
  const auto start = std::chrono::steady_clock::now();

  const std::int64_t sunrise = weather::detect_sunrise(records, spec.day);
  const fvm::ThermographSchedule schedule = schedule_for_protocol(spec.protocol);
  const double t_total = schedule.back();
  const weather::EnvSeries env = weather::build_env_series(
      records, sunrise, t_total, settings.indoor, settings.env_options);

  physics::WallSpec wall_true = settings.wall;
  wall_true.conductivity_k = spec.true_k;

  ScenarioResult result;
  result.spec = spec;
  result.season = season_name(season_of(spec.day));

  std::function<double(double)> initial = fvm::steady_initial(wall_true, env);
  if (spec.spin_up) {
    const double pre_s = settings.spin_up_hours * 3600.0;
    const weather::EnvSeries env_pre = weather::build_env_series(
        records, sunrise - static_cast<std::int64_t>(pre_s), pre_s, settings.indoor,
        settings.env_options);
    const fvm::Profile spun = fvm::spin_up(wall_true, env_pre, settings.fvm_options);
    const auto steady = fvm::steady_initial(wall_true, env);
    double mae = 0.0;
    for (int i = 0; i < spun.grid.n_cells; ++i) {
      mae += std::abs(spun.cells[i] - steady(spun.grid.center(i)));
    }
    result.initial_profile_mae = mae / spun.grid.n_cells;
    initial = [spun](double x) { return spun(x); };
  }

  const fvm::FieldHistory truth =
      fvm::solve_transient(wall_true, env, initial, settings.fvm_options);
  inverse::ThermographSet thermographs;
  thermographs.entries = fvm::extract_thermographs(truth, schedule);

  const physics::Scaler scaler =
      weather::make_scaler(env, settings.wall, settings.k_min, settings.k_max,
                           settings.scaler_margin);
  const pinn::ForwardProblem problem = pinn::make_problem(settings.wall, env, scaler);

  inverse::EstimateOptions options = settings.estimate;
  options.seed = spec.seed;
  const inverse::EstimateResult estimate = inverse::estimate_k(problem, thermographs, options);

  result.k_hat = estimate.trace.k_hat_final();
  result.abs_error = std::abs(result.k_hat - spec.true_k);
  result.rel_error = result.abs_error / spec.true_k;
  result.converged = estimate.trace.converged;
  result.stop_reason = estimate.trace.stop_reason;
  result.outer_iters = static_cast<int>(estimate.trace.entries.size());
  result.inner_steps = estimate.total_inner_steps;

  if (!artifact_dir.empty()) {
    std::filesystem::create_directories(artifact_dir);
    inverse::write_thermograph_csv(thermographs, (artifact_dir / "thermographs.csv").string(),
                                   sunrise);
    inverse::write_ktrace_csv(estimate.trace, (artifact_dir / "ktrace.csv").string());
  }

  result.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

double forward_mae(const net::NetParams& params, const physics::Scaler& scaler,
                   double k_dim, const fvm::FieldHistory& truth, double dx, double dt) {
  if (dx <= 0.0 || dt <= 0.0) throw std::invalid_argument("forward_mae: dx, dt must be > 0");
  const double kappa = scaler.nondim_k(k_dim);
  const double b = scaler.thickness_b;
  const int nx = static_cast<int>(std::floor(b / dx + 1e-9)) + 1;
  const int nt = static_cast<int>(std::floor(scaler.t_total / dt + 1e-9)) + 1;

  Eigen::Matrix3Xd inputs(3, nx);
  for (int i = 0; i < nx; ++i) {
    const double x = std::min(i * dx, b);
    inputs(0, i) = 0.0;
    inputs(1, i) = scaler.nondim_pos(x);
    inputs(2, i) = kappa;
  }

  double total = 0.0;
  std::int64_t count = 0;
  for (int s = 0; s < nt; ++s) {
    const double t = std::min(s * dt, scaler.t_total);
    inputs.row(0).setConstant(scaler.nondim_time(t));
    const Eigen::RowVectorXd theta = net::forward_values(params, inputs);
    const fvm::Profile reference = truth.profile_at(t);
    for (int i = 0; i < nx; ++i) {
      const double x = std::min(i * dx, b);
      total += std::abs(scaler.redim_temp(theta(i)) - reference(x));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty data");
  if (p <= 0.0) return sorted.front();
  if (p >= 1.0) return sorted.back();
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const size_t i = static_cast<size_t>(h);
  const double frac = h - static_cast<double>(i);
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty data");
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, 0.5);
}

Interval bootstrap_mean_ci(const std::vector<double>& values, const BootstrapOptions& options) {
  if (values.empty()) {
    return Interval{std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN()};
  }
  if (options.n_resamples < 1) {
    throw std::invalid_argument("bootstrap: n_resamples must be >= 1");
  }
  if (options.confidence <= 0.0 || options.confidence >= 1.0) {
    throw std::invalid_argument("bootstrap: confidence must be in (0, 1)");
  }
  const size_t n = values.size();
  const size_t m = options.resample_size > 0 ? static_cast<size_t>(options.resample_size) : n;
  Rng rng(options.seed);
  std::vector<double> stats;
  stats.reserve(options.n_resamples);
  for (int r = 0; r < options.n_resamples; ++r) {
    double sum = 0.0;
    for (size_t j = 0; j < m; ++j) {
      size_t index = static_cast<size_t>(rng.uniform01() * static_cast<double>(n));
      if (index >= n) index = n - 1;
      sum += values[index];
    }
    stats.push_back(sum / static_cast<double>(m));
  }
  std::sort(stats.begin(), stats.end());
  const double tail = 0.5 * (1.0 - options.confidence);
  return Interval{quantile_sorted(stats, tail), quantile_sorted(stats, 1.0 - tail)};
}

BoxStats box_stats(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("box_stats of empty data");
  std::sort(values.begin(), values.end());
  BoxStats box;
  box.q1 = quantile_sorted(values, 0.25);
  box.median = quantile_sorted(values, 0.5);
  box.q3 = quantile_sorted(values, 0.75);
  const double iqr = box.q3 - box.q1;
  const double lo_fence = box.q1 - 1.5 * iqr;
  const double hi_fence = box.q3 + 1.5 * iqr;
  box.whisker_lo = box.q3;
  box.whisker_hi = box.q1;
  bool any_inside = false;
  for (double v : values) {
    if (v < lo_fence || v > hi_fence) {
      box.outliers.push_back(v);
    } else {
      if (!any_inside) {
        box.whisker_lo = v;
        box.whisker_hi = v;
        any_inside = true;
      } else {
        box.whisker_lo = std::min(box.whisker_lo, v);
        box.whisker_hi = std::max(box.whisker_hi, v);
      }
    }
  }
  if (!any_inside) {
    // degenerate: everything flagged; fall back to the raw extremes
    box.whisker_lo = values.front();
    box.whisker_hi = values.back();
    box.outliers.clear();
  }
  return box;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& values) {
  const size_t n = values.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (size_t r = i; r <= j; ++r) ranks[order[r]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("spearman: size mismatch");
  if (a.size() < 2) throw std::invalid_argument("spearman: need at least two pairs");
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double da = ra[i] - mean;
    const double db = rb[i] - mean;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return cov / std::sqrt(var_a * var_b);
}

// ---- campaigns ----

namespace {

void check_keys(const nlohmann::json& object, const std::set<std::string>& allowed,
                const std::string& context) {
  for (const auto& [key, _] : object.items()) {
    if (!allowed.count(key)) {
      throw DataError("unknown key '" + key + "' in " + context);
    }
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid value for '" + key + "': " + e.what());
  }
}

}  // namespace

CampaignConfig load_campaign_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
  check_keys(doc,
             {"weather_csv", "out_dir", "seed", "preset", "k_values", "days", "protocols",
              "ic_modes", "k_min", "k_max", "wall", "indoor", "env", "fvm",
              "spin_up_hours", "scaler_margin", "save_ktraces", "bootstrap", "overrides"},
             path);

  CampaignConfig config;
  if (!doc.contains("weather_csv")) throw DataError(path + ": missing 'weather_csv'");
  config.weather_csv = doc.at("weather_csv").get<std::string>();
  config.out_dir = get_or<std::string>(doc, "out_dir", "runs");
  config.seed = get_or<std::uint64_t>(doc, "seed", 1);
  config.preset = get_or<std::string>(doc, "preset", "desk");
  config.save_ktraces = get_or<bool>(doc, "save_ktraces", true);

  if (!doc.contains("k_values")) throw DataError(path + ": missing 'k_values'");
  config.k_values = doc.at("k_values").get<std::vector<double>>();
  if (config.k_values.empty()) throw DataError(path + ": 'k_values' is empty");

  if (!doc.contains("days")) throw DataError(path + ": missing 'days'");
  for (const auto& day : doc.at("days").get<std::vector<std::string>>()) {
    config.days.push_back(parse_date(day));
  }
  if (config.days.empty()) throw DataError(path + ": 'days' is empty");

  config.protocols = get_or<std::vector<std::string>>(doc, "protocols", {"t4_18"});
  for (const auto& p : config.protocols) schedule_for_protocol(p);  // validates
  const auto modes = get_or<std::vector<std::string>>(doc, "ic_modes", {"steady"});
  for (const auto& m : modes) {
    if (m == "steady") config.ic_modes.push_back(false);
    else if (m == "spin_up") config.ic_modes.push_back(true);
    else throw DataError(path + ": unknown ic_mode '" + m + "'");
  }

  RunSettings& s = config.settings;
  const Preset preset = preset_by_name(config.preset);
  s.estimate.layer_sizes = preset.layer_sizes;
  s.estimate.train = preset.train;
  s.estimate.inverse = preset.inverse;
  s.k_min = get_or<double>(doc, "k_min", s.k_min);
  s.k_max = get_or<double>(doc, "k_max", s.k_max);
  if (!(s.k_min > 0.0 && s.k_max > s.k_min)) {
    throw DataError(path + ": need 0 < k_min < k_max");
  }
  for (double k : config.k_values) {
    if (k < s.k_min || k > s.k_max) {
      throw DataError(path + ": k value " + fmt_double(k) + " outside [k_min, k_max]");
    }
  }
  s.spin_up_hours = get_or<double>(doc, "spin_up_hours", s.spin_up_hours);
  s.scaler_margin = get_or<double>(doc, "scaler_margin", s.scaler_margin);

  if (doc.contains("wall")) {
    const auto& w = doc.at("wall");
    check_keys(w, {"thickness_b", "heat_capacity_cp", "density_rho", "albedo"}, "'wall'");
    s.wall.thickness_b = get_or<double>(w, "thickness_b", s.wall.thickness_b);
    s.wall.heat_capacity_cp = get_or<double>(w, "heat_capacity_cp", s.wall.heat_capacity_cp);
    s.wall.density_rho = get_or<double>(w, "density_rho", s.wall.density_rho);
    s.wall.albedo = get_or<double>(w, "albedo", s.wall.albedo);
  }
  s.wall.validate();
  if (doc.contains("indoor")) {
    const auto& ind = doc.at("indoor");
    check_keys(ind, {"temp_in", "h_in"}, "'indoor'");
    s.indoor.temp_in = get_or<double>(ind, "temp_in", s.indoor.temp_in);
    s.indoor.h_in = get_or<double>(ind, "h_in", s.indoor.h_in);
  }
  s.indoor.validate();
  if (doc.contains("env")) {
    const auto& env = doc.at("env");
    check_keys(env, {"diffuse_fraction", "albedo", "v_min_clamp", "max_gap_s"}, "'env'");
    s.env_options.diffuse_fraction =
        get_or<double>(env, "diffuse_fraction", s.env_options.diffuse_fraction);
    s.env_options.albedo = get_or<double>(env, "albedo", s.wall.albedo);
    s.env_options.v_min_clamp = get_or<double>(env, "v_min_clamp", s.env_options.v_min_clamp);
    s.env_options.max_gap_s = get_or<double>(env, "max_gap_s", s.env_options.max_gap_s);
  } else {
    s.env_options.albedo = s.wall.albedo;
  }
  if (doc.contains("fvm")) {
    const auto& f = doc.at("fvm");
    check_keys(f, {"dt", "n_cells"}, "'fvm'");
    s.fvm_options.dt = get_or<double>(f, "dt", s.fvm_options.dt);
    s.fvm_options.n_cells = get_or<int>(f, "n_cells", s.fvm_options.n_cells);
  }
  if (doc.contains("bootstrap")) {
    const auto& b = doc.at("bootstrap");
    check_keys(b, {"n_resamples", "resample_size", "confidence", "seed"}, "'bootstrap'");
    config.bootstrap.n_resamples = get_or<int>(b, "n_resamples", config.bootstrap.n_resamples);
    config.bootstrap.resample_size =
        get_or<int>(b, "resample_size", config.bootstrap.resample_size);
    config.bootstrap.confidence = get_or<double>(b, "confidence", config.bootstrap.confidence);
    config.bootstrap.seed = get_or<std::uint64_t>(b, "seed", config.bootstrap.seed);
  }
  if (doc.contains("overrides")) {
    const auto& o = doc.at("overrides");
    check_keys(o,
               {"max_outer", "max_steps", "n_pde", "n_bc", "n_ic_xi", "threshold",
                "threshold_pde", "threshold_bc_out", "threshold_bc_in", "threshold_ic",
                "stop_margin", "k_sample_std", "weight_update_interval",
                "convergence_window", "convergence_rel_tol", "k_lr", "layer_sizes"},
               "'overrides'");
    auto& train = s.estimate.train;
    auto& inv = s.estimate.inverse;
    inv.max_outer = get_or<int>(o, "max_outer", inv.max_outer);
    train.max_steps = get_or<std::int64_t>(o, "max_steps", train.max_steps);
    train.n_pde = get_or<int>(o, "n_pde", train.n_pde);
    train.n_bc = get_or<int>(o, "n_bc", train.n_bc);
    train.n_ic_xi = get_or<int>(o, "n_ic_xi", train.n_ic_xi);
    if (o.contains("threshold")) {
      const double t = o.at("threshold").get<double>();
      train.threshold_pde = train.threshold_bc_out = train.threshold_bc_in =
          train.threshold_ic = t;
    }
    train.threshold_pde = get_or<double>(o, "threshold_pde", train.threshold_pde);
    train.threshold_bc_out = get_or<double>(o, "threshold_bc_out", train.threshold_bc_out);
    train.threshold_bc_in = get_or<double>(o, "threshold_bc_in", train.threshold_bc_in);
    train.threshold_ic = get_or<double>(o, "threshold_ic", train.threshold_ic);
    train.stop_margin = get_or<double>(o, "stop_margin", train.stop_margin);
    train.k_sample_std = get_or<double>(o, "k_sample_std", train.k_sample_std);
    train.weight_update_interval =
        get_or<int>(o, "weight_update_interval", train.weight_update_interval);
    inv.convergence_window = get_or<int>(o, "convergence_window", inv.convergence_window);
    inv.convergence_rel_tol = get_or<double>(o, "convergence_rel_tol", inv.convergence_rel_tol);
    inv.k_adam.learning_rate = get_or<double>(o, "k_lr", inv.k_adam.learning_rate);
    if (o.contains("layer_sizes")) {
      s.estimate.layer_sizes = o.at("layer_sizes").get<std::vector<int>>();
    }
  }

  config.canonical_json = doc.dump(2);
  return config;
}

std::string config_hash(const CampaignConfig& config) {
  return hex16(fnv1a64(config.canonical_json));
}

std::vector<ScenarioSpec> scenario_grid(const CampaignConfig& config) {
  std::vector<ScenarioSpec> grid;
  const Rng seeder(config.seed);
  std::uint64_t index = 0;
  for (const CivilDate& day : config.days) {
    for (double k : config.k_values) {
      for (const std::string& protocol : config.protocols) {
        for (bool spin_up : config.ic_modes) {
          ScenarioSpec spec;
          spec.day = day;
          spec.true_k = k;
          spec.protocol = protocol;
          spec.spin_up = spin_up;
          spec.seed = seeder.child(index).seed();
          spec.id = "k" + fmt_double(k) + "_" + format_date(day) + "_" + protocol + "_" +
                    ic_mode_name(spin_up);
          grid.push_back(std::move(spec));
          ++index;
        }
      }
    }
  }
  if (grid.empty()) throw DataError("campaign has no scenarios");
  return grid;
}

namespace {

std::string rows_header() {
  return "id,day,season,protocol,ic_mode,true_k,seed,k_hat,abs_error,rel_error,"
         "converged,stop_reason,initial_profile_mae_k,outer_iters,inner_steps";
}

std::string row_line(const ScenarioResult& r) {
  std::ostringstream out;
  out << r.spec.id << ',' << format_date(r.spec.day) << ',' << r.season << ','
      << r.spec.protocol << ',' << ic_mode_name(r.spec.spin_up) << ','
      << fmt_double(r.spec.true_k) << ',' << r.spec.seed << ',' << fmt_double(r.k_hat)
      << ',' << fmt_double(r.abs_error) << ',' << fmt_double(r.rel_error) << ','
      << (r.converged ? "true" : "false") << ',' << r.stop_reason << ','
      << fmt_double(r.initial_profile_mae) << ',' << r.outer_iters << ','
      << r.inner_steps;
  return out.str();
}

std::string utc_stamp() {
  const auto now = std::chrono::system_clock::now();
  const std::int64_t epoch =
      std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  const CivilDate date = civil_from_epoch(epoch);
  const int sod = second_of_day(epoch);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d%02d%02d-%02d%02d%02d", date.year, date.month,
                date.day, sod / 3600, (sod / 60) % 60, sod % 60);
  return buf;
}

}  // namespace

std::vector<ScenarioResult> read_rows_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  const size_t c_id = table.column("id");
  const size_t c_day = table.column("day");
  const size_t c_season = table.column("season");
  const size_t c_protocol = table.column("protocol");
  const size_t c_ic = table.column("ic_mode");
  const size_t c_true_k = table.column("true_k");
  const size_t c_seed = table.column("seed");
  const size_t c_k_hat = table.column("k_hat");
  const size_t c_abs = table.column("abs_error");
  const size_t c_rel = table.column("rel_error");
  const size_t c_conv = table.column("converged");
  const size_t c_reason = table.column("stop_reason");
  const size_t c_icmae = table.column("initial_profile_mae_k");
  const size_t c_outer = table.column("outer_iters");
  const size_t c_inner = table.column("inner_steps");

  std::vector<ScenarioResult> rows;
  rows.reserve(table.rows.size());
  for (size_t i = 0; i < table.rows.size(); ++i) {
    const auto& f = table.rows[i];
    const std::string where = path + " row " + std::to_string(i + 1);
    ScenarioResult r;
    r.spec.id = f[c_id];
    r.spec.day = parse_date(f[c_day]);
    r.season = f[c_season];
    r.spec.protocol = f[c_protocol];
    if (f[c_ic] == "spin_up") r.spec.spin_up = true;
    else if (f[c_ic] == "steady") r.spec.spin_up = false;
    else throw DataError(where + ": unknown ic_mode '" + f[c_ic] + "'");
    r.spec.true_k = parse_double(f[c_true_k], where);
    r.spec.seed = static_cast<std::uint64_t>(parse_uint(f[c_seed], where));
    r.k_hat = parse_double(f[c_k_hat], where);
    r.abs_error = parse_double(f[c_abs], where);
    r.rel_error = parse_double(f[c_rel], where);
    r.converged = f[c_conv] == "true";
    r.stop_reason = f[c_reason];
    r.initial_profile_mae = parse_double(f[c_icmae], where);
    r.outer_iters = static_cast<int>(parse_int(f[c_outer], where));
    r.inner_steps = parse_int(f[c_inner], where);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_rows_csv(const std::vector<ScenarioResult>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << rows_header() << "\n";
  for (const auto& r : rows) out << row_line(r) << "\n";
  if (!out) throw DataError("failed writing '" + path + "'");
}

std::filesystem::path run_campaign(const CampaignConfig& config,
                                   const std::string& resume_dir, std::ostream& log) {
  const std::vector<weather::RawWeatherRecord> records =
      weather::read_weather_csv(config.weather_csv);
  const std::vector<ScenarioSpec> grid = scenario_grid(config);

  std::filesystem::path run_dir;
  if (!resume_dir.empty()) {
    run_dir = resume_dir;
    if (!std::filesystem::is_directory(run_dir)) {
      throw DataError("resume directory '" + resume_dir + "' does not exist");
    }
    std::ifstream prior(run_dir / "config.json");
    if (!prior) throw DataError("resume directory has no config.json");
    std::stringstream buffer;
    buffer << prior.rdbuf();
    std::string stored = buffer.str();
    if (!stored.empty() && stored.back() == '\n') stored.pop_back();
    if (hex16(fnv1a64(stored)) != config_hash(config)) {
      throw DataError("resume config does not match the stored config.json");
    }
  } else {
    run_dir = std::filesystem::path(config.out_dir) /
              (utc_stamp() + "-" + config_hash(config).substr(0, 8));
    std::filesystem::create_directories(run_dir);
    std::ofstream cfg(run_dir / "config.json");
    cfg << config.canonical_json << "\n";
  }

  const std::filesystem::path rows_path = run_dir / "rows.csv";
  const std::filesystem::path timings_path = run_dir / "timings.csv";
  std::vector<ScenarioResult> done;
  std::set<std::string> done_ids;
  if (std::filesystem::exists(rows_path)) {
    done = read_rows_csv(rows_path.string());
    for (const auto& r : done) done_ids.insert(r.spec.id);
  }

  std::vector<size_t> pending;
  for (size_t i = 0; i < grid.size(); ++i) {
    if (!done_ids.count(grid[i].id)) pending.push_back(i);
  }
  log << "campaign: " << grid.size() << " scenarios, " << done.size() << " already done, "
      << pending.size() << " to run\n";

  std::vector<std::optional<ScenarioResult>> results(grid.size());
  for (const auto& r : done) {
    for (size_t i = 0; i < grid.size(); ++i) {
      if (grid[i].id == r.spec.id) results[i] = r;
    }
  }

  int workers = 1;
  if (const char* env = std::getenv("WALLTHERM_WORKERS")) {
    workers = std::max(1, static_cast<int>(std::strtol(env, nullptr, 10)));
  }
  workers = static_cast<int>(std::min<std::size_t>(
      static_cast<std::size_t>(workers), std::max<std::size_t>(pending.size(), 1)));

  std::mutex io_mutex;
  std::atomic<size_t> cursor{0};
  std::atomic<size_t> finished{0};

  if (!std::filesystem::exists(rows_path)) {
    std::ofstream out(rows_path);
    out << rows_header() << "\n";
  }
  if (!std::filesystem::exists(timings_path)) {
    std::ofstream out(timings_path);
    out << "id,runtime_s\n";
  }

  const auto work = [&]() {
    while (true) {
      const size_t slot = cursor.fetch_add(1);
      if (slot >= pending.size()) return;
      const size_t index = pending[slot];
      const ScenarioSpec& spec = grid[index];
      const std::filesystem::path artifact_dir =
          config.save_ktraces ? run_dir / "scenarios" / spec.id : std::filesystem::path{};
      ScenarioResult result;
      try {
        result = run_scenario(spec, config.settings, records, artifact_dir);
      } catch (const std::exception& e) {
        result.spec = spec;
        result.season = season_name(season_of(spec.day));
        result.converged = false;
        result.stop_reason = std::string("error: ") + e.what();
      }
      {
        std::lock_guard<std::mutex> lock(io_mutex);
        results[index] = result;
        std::ofstream out(rows_path, std::ios::app);
        out << row_line(result) << "\n";
        std::ofstream timing(timings_path, std::ios::app);
        timing << spec.id << ',' << fmt_double(result.runtime_s) << "\n";
        const size_t n_done = ++finished;
        log << "[" << n_done << "/" << pending.size() << "] " << spec.id
            << " k_hat=" << fmt_double(result.k_hat)
            << " rel_err=" << fmt_double(result.rel_error);
        if (!result.converged) log << " [" << result.stop_reason << "]";
        log << " " << fmt_double(result.runtime_s) << "s\n";
        log.flush();
      }
    }
  };

  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (int w = 0; w < workers; ++w) threads.emplace_back(work);
    for (auto& t : threads) t.join();
  }

  std::vector<ScenarioResult> ordered;
  ordered.reserve(grid.size());
  for (size_t i = 0; i < grid.size(); ++i) {
    if (results[i]) ordered.push_back(*results[i]);
  }
  write_rows_csv(ordered, rows_path.string());
  write_report(run_dir, config.bootstrap);
  return run_dir;
}

// ---- reporting ----

namespace {

struct GroupKey {
  double true_k;
  std::string protocol;
  std::string ic_mode;
  std::string season;  // "all" or a named season

  std::string label() const {
    return "k" + fmt_double(true_k) + "/" + protocol + "/" + ic_mode + "/" + season;
  }
};

struct GroupSummary {
  GroupKey key;
  int n = 0;
  int n_converged = 0;
  double k_hat_mean = std::numeric_limits<double>::quiet_NaN();
  double k_hat_median = std::numeric_limits<double>::quiet_NaN();
  double k_hat_std = std::numeric_limits<double>::quiet_NaN();
  double mae = std::numeric_limits<double>::quiet_NaN();
  Interval mae_ci{std::numeric_limits<double>::quiet_NaN(),
                  std::numeric_limits<double>::quiet_NaN()};
  double median_rel_error = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> k_hats;      // converged only
  std::vector<double> rel_errors;  // converged only
};

GroupSummary summarize(const GroupKey& key, const std::vector<const ScenarioResult*>& rows,
                       const BootstrapOptions& bootstrap) {
  GroupSummary g;
  g.key = key;
  g.n = static_cast<int>(rows.size());
  std::vector<double> abs_errors;
  for (const ScenarioResult* r : rows) {
    if (!r->converged) continue;
    ++g.n_converged;
    g.k_hats.push_back(r->k_hat);
    g.rel_errors.push_back(r->rel_error);
    abs_errors.push_back(r->abs_error);
  }
  if (g.n_converged > 0) {
    const double n = static_cast<double>(g.n_converged);
    const double mean = std::accumulate(g.k_hats.begin(), g.k_hats.end(), 0.0) / n;
    g.k_hat_mean = mean;
    g.k_hat_median = median(g.k_hats);
    double var = 0.0;
    for (double k : g.k_hats) var += (k - mean) * (k - mean);
    g.k_hat_std = g.n_converged > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    g.mae = std::accumulate(abs_errors.begin(), abs_errors.end(), 0.0) / n;
    g.median_rel_error = median(g.rel_errors);
    BootstrapOptions opts = bootstrap;
    opts.seed = bootstrap.seed ^ fnv1a64(key.label());
    g.mae_ci = bootstrap_mean_ci(abs_errors, opts);
  }
  return g;
}

template <typename T>
std::vector<T> ordered_distinct(const std::vector<T>& values, const std::vector<T>& order) {
  std::vector<T> out;
  for (const T& o : order) {
    if (std::find(values.begin(), values.end(), o) != values.end()) out.push_back(o);
  }
  return out;
}

}  // namespace

void write_report(const std::filesystem::path& run_dir, const BootstrapOptions& options) {
  const std::vector<ScenarioResult> rows = read_rows_csv((run_dir / "rows.csv").string());
  if (rows.empty()) throw DataError("rows.csv has no scenarios");

  std::vector<double> k_values;
  std::vector<std::string> protocols, ic_modes, seasons;
  for (const auto& r : rows) {
    if (std::find(k_values.begin(), k_values.end(), r.spec.true_k) == k_values.end()) {
      k_values.push_back(r.spec.true_k);
    }
    const std::string ic = ic_mode_name(r.spec.spin_up);
    if (std::find(protocols.begin(), protocols.end(), r.spec.protocol) == protocols.end()) {
      protocols.push_back(r.spec.protocol);
    }
    if (std::find(ic_modes.begin(), ic_modes.end(), ic) == ic_modes.end()) {
      ic_modes.push_back(ic);
    }
    if (std::find(seasons.begin(), seasons.end(), r.season) == seasons.end()) {
      seasons.push_back(r.season);
    }
  }
  std::sort(k_values.begin(), k_values.end());
  protocols = ordered_distinct(protocols, protocol_order());
  ic_modes = ordered_distinct(ic_modes, {"steady", "spin_up"});
  seasons = ordered_distinct(seasons, {"winter", "spring", "summer", "fall"});

  std::vector<GroupSummary> groups;
  for (double k : k_values) {
    for (const std::string& protocol : protocols) {
      for (const std::string& ic : ic_modes) {
        std::vector<const ScenarioResult*> base;
        for (const auto& r : rows) {
          if (r.spec.true_k == k && r.spec.protocol == protocol &&
              ic_mode_name(r.spec.spin_up) == ic) {
            base.push_back(&r);
          }
        }
        if (base.empty()) continue;
        groups.push_back(summarize(GroupKey{k, protocol, ic, "all"}, base, options));
        for (const std::string& season : seasons) {
          std::vector<const ScenarioResult*> sub;
          for (const ScenarioResult* r : base) {
            if (r->season == season) sub.push_back(r);
          }
          if (!sub.empty()) {
            groups.push_back(summarize(GroupKey{k, protocol, ic, season}, sub, options));
          }
        }
      }
    }
  }

  {
    std::ofstream out(run_dir / "results.csv");
    out << "true_k,protocol,ic_mode,season,n,n_converged,n_failed,k_hat_mean,"
           "k_hat_median,k_hat_std,mae,mae_ci_lo,mae_ci_hi,median_rel_error\n";
    for (const auto& g : groups) {
      out << fmt_double(g.key.true_k) << ',' << g.key.protocol << ',' << g.key.ic_mode
          << ',' << g.key.season << ',' << g.n << ',' << g.n_converged << ','
          << (g.n - g.n_converged) << ',' << fmt_double(g.k_hat_mean) << ','
          << fmt_double(g.k_hat_median) << ',' << fmt_double(g.k_hat_std) << ','
          << fmt_double(g.mae) << ',' << fmt_double(g.mae_ci.lo) << ','
          << fmt_double(g.mae_ci.hi) << ',' << fmt_double(g.median_rel_error) << "\n";
    }
  }

  {
    std::ofstream out(run_dir / "boxstats.csv");
    out << "true_k,protocol,ic_mode,season,metric,min,q1,median,q3,max,outliers\n";
    for (const auto& g : groups) {
      if (g.n_converged == 0) continue;
      const auto emit = [&](const std::string& metric, const std::vector<double>& values) {
        const BoxStats box = box_stats(values);
        out << fmt_double(g.key.true_k) << ',' << g.key.protocol << ',' << g.key.ic_mode
            << ',' << g.key.season << ',' << metric << ',' << fmt_double(box.whisker_lo)
            << ',' << fmt_double(box.q1) << ',' << fmt_double(box.median) << ','
            << fmt_double(box.q3) << ',' << fmt_double(box.whisker_hi) << ',';
        for (size_t i = 0; i < box.outliers.size(); ++i) {
          if (i) out << ';';
          out << fmt_double(box.outliers[i]);
        }
        out << "\n";
      };
      emit("k_hat", g.k_hats);
      emit("rel_error", g.rel_errors);
    }
  }

  // spin-up sensitivity: error against the initial-profile violation
  std::vector<double> ic_maes, ic_abs_errors;
  {
    std::ofstream out(run_dir / "kerror_vs_icmae.csv");
    std::ostringstream body;
    for (const auto& r : rows) {
      if (!r.spec.spin_up || !r.converged) continue;
      ic_maes.push_back(r.initial_profile_mae);
      ic_abs_errors.push_back(r.abs_error);
      body << r.spec.id << ',' << fmt_double(r.initial_profile_mae) << ','
           << fmt_double(r.abs_error) << ',' << fmt_double(r.rel_error) << "\n";
    }
    double rho = std::numeric_limits<double>::quiet_NaN();
    if (ic_maes.size() >= 2) rho = spearman_rho(ic_maes, ic_abs_errors);
    out << "# spearman_rho=" << fmt_double(rho) << "\n";
    out << "# n=" << ic_maes.size() << "\n";
    out << "id,initial_profile_mae_k,abs_error,rel_error\n";
    out << body.str();
  }

  {
    std::ofstream out(run_dir / "results.md");
    int n_converged = 0;
    for (const auto& r : rows) n_converged += r.converged ? 1 : 0;
    out << "# Campaign results\n\n";
    out << "Scenarios: " << rows.size() << " total, " << n_converged << " converged, "
        << (rows.size() - n_converged) << " failed.\n\n";
    out << "| true k | protocol | IC | season | n | conv | median k_hat | median rel err "
           "| MAE | " << fmt_double(options.confidence * 100.0) << "% CI (MAE) |\n";
    out << "|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& g : groups) {
      out << "| " << fmt_double(g.key.true_k) << " | " << g.key.protocol << " | "
          << g.key.ic_mode << " | " << g.key.season << " | " << g.n << " | "
          << g.n_converged << " | " << fmt_double(g.k_hat_median) << " | "
          << fmt_double(g.median_rel_error) << " | " << fmt_double(g.mae) << " | ["
          << fmt_double(g.mae_ci.lo) << ", " << fmt_double(g.mae_ci.hi) << "] |\n";
    }
    out << "\nNon-converged runs are excluded from every statistic and counted under "
           "`failed`.\n";
    out << "Bootstrap: " << options.n_resamples << " resamples, percentile interval on "
           "the mean absolute error of k_hat.\n";
    bool any_failed = false;
    for (const auto& r : rows) {
      if (!r.converged) {
        if (!any_failed) out << "\nFailures:\n";
        any_failed = true;
        out << "- " << r.spec.id << ": " << r.stop_reason << "\n";
      }
    }
    if (ic_maes.size() >= 2) {
      out << "\nSpin-up sensitivity: Spearman rho between the initial-profile MAE and "
             "|k_hat - k| over " << ic_maes.size() << " converged spin-up scenarios: "
          << fmt_double(spearman_rho(ic_maes, ic_abs_errors)) << ".\n";
    }
  }
}

}  // namespace walltherm::harness
