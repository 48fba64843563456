#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "walltherm/csvio.hpp"
#include "walltherm/errors.hpp"
#include "walltherm/fvm.hpp"
#include "walltherm/harness.hpp"
#include "walltherm/inverse.hpp"
#include "walltherm/net.hpp"
#include "walltherm/physics.hpp"
#include "walltherm/pinn.hpp"
#include "walltherm/timeutil.hpp"
#include "walltherm/weather.hpp"

namespace {

using namespace walltherm;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PhysicalFlags {
  double thickness = 0.3;
  double cp = 750.0;
  double rho = 2300.0;
  double albedo = 1.0;
  double temp_in = 298.15;
  double h_in = 2.0;
  double diffuse_fraction = 1.0;
  double v_min_clamp = 0.1;
  double max_gap_min = 30.0;
};

void add_physical_flags(CLI::App* cmd, PhysicalFlags& f) {
  cmd->add_option("--thickness", f.thickness, "wall thickness b, m")->capture_default_str();
  cmd->add_option("--cp", f.cp, "wall heat capacity, J/(kg K)")->capture_default_str();
  cmd->add_option("--rho", f.rho, "wall density, kg/m^3")->capture_default_str();
  cmd->add_option("--albedo", f.albedo, "outer surface shortwave reflectance")
      ->capture_default_str();
  cmd->add_option("--temp-in", f.temp_in, "indoor air temperature, K")->capture_default_str();
  cmd->add_option("--h-in", f.h_in, "indoor film coefficient, W/(m^2 K)")
      ->capture_default_str();
  cmd->add_option("--diffuse-fraction", f.diffuse_fraction,
                  "share of global irradiance treated as diffuse")
      ->capture_default_str();
  cmd->add_option("--v-min-clamp", f.v_min_clamp, "wind speed clamp, m/s")
      ->capture_default_str();
  cmd->add_option("--max-gap-min", f.max_gap_min, "largest tolerated weather gap, minutes")
      ->capture_default_str();
}

physics::WallSpec wall_from(const PhysicalFlags& f) {
  physics::WallSpec wall;
  wall.thickness_b = f.thickness;
  wall.heat_capacity_cp = f.cp;
  wall.density_rho = f.rho;
  wall.albedo = f.albedo;
  wall.validate();
  return wall;
}

physics::IndoorConditions indoor_from(const PhysicalFlags& f) {
  physics::IndoorConditions indoor;
  indoor.temp_in = f.temp_in;
  indoor.h_in = f.h_in;
  indoor.validate();
  return indoor;
}

weather::EnvOptions env_options_from(const PhysicalFlags& f) {
  weather::EnvOptions options;
  options.diffuse_fraction = f.diffuse_fraction;
  options.albedo = f.albedo;
  options.v_min_clamp = f.v_min_clamp;
  options.max_gap_s = f.max_gap_min * 60.0;
  return options;
}

nlohmann::json json_physical(const PhysicalFlags& f) {
  return {{"thickness", f.thickness}, {"cp", f.cp},
          {"rho", f.rho},             {"albedo", f.albedo},
          {"temp_in", f.temp_in},     {"h_in", f.h_in},
          {"diffuse_fraction", f.diffuse_fraction},
          {"v_min_clamp", f.v_min_clamp},
          {"max_gap_min", f.max_gap_min}};
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << doc.dump(2) << "\n";
}

std::string canon_protocol(const std::string& p) {
  if (p == "t418") return "t4_18";
  if (p == "t15") return "t1_5";
  return p;
}

std::string canon_ic(const std::string& m) { return m == "spinup" ? "spin_up" : m; }

const CLI::Validator date_check(
    [](std::string& s) -> std::string {
      try {
        parse_date(s);
      } catch (const std::exception& e) {
        return std::string(e.what());
      }
      return {};
    },
    "DATE", "date");

int cmd_simulate(const std::string& weather_path, const std::string& day_str, double k,
                 const std::string& ic, const std::string& protocol,
                 const std::string& out_dir, const PhysicalFlags& phys, double dt,
                 int n_cells, double spin_up_hours) {
  const auto records = weather::read_weather_csv(weather_path);
  const CivilDate day = parse_date(day_str);
  const std::int64_t sunrise = weather::detect_sunrise(records, day);
  const fvm::ThermographSchedule schedule = harness::schedule_for_protocol(protocol);
  const double t_total = schedule.back();

  physics::WallSpec wall = wall_from(phys);
  wall.conductivity_k = k;
  wall.validate();
  const physics::IndoorConditions indoor = indoor_from(phys);
  const weather::EnvOptions env_options = env_options_from(phys);
  const weather::EnvSeries env =
      weather::build_env_series(records, sunrise, t_total, indoor, env_options);

  fvm::SolverOptions solver;
  solver.dt = dt;
  solver.n_cells = n_cells;

  std::function<double(double)> initial = fvm::steady_initial(wall, env);
  if (ic == "spin_up") {
    const double pre_s = spin_up_hours * 3600.0;
    const weather::EnvSeries env_pre = weather::build_env_series(
        records, sunrise - static_cast<std::int64_t>(pre_s), pre_s, indoor, env_options);
    const fvm::Profile spun = fvm::spin_up(wall, env_pre, solver);
    initial = [spun](double x) { return spun(x); };
  }

  const fvm::FieldHistory history = fvm::solve_transient(wall, env, initial, solver);
  inverse::ThermographSet thermographs;
  thermographs.entries = fvm::extract_thermographs(history, schedule);

  const std::filesystem::path out(out_dir);
  std::filesystem::create_directories(out);
  fvm::write_history_csv(history, (out / "history.csv").string());
  inverse::write_thermograph_csv(thermographs, (out / "thermographs.csv").string(), sunrise);
  weather::write_env_csv(env, (out / "env.csv").string());
  write_json(out / "run_config.json",
             {{"command", "simulate"},
              {"weather", weather_path},
              {"day", day_str},
              {"k", k},
              {"ic", ic},
              {"protocol", protocol},
              {"dt", dt},
              {"n_cells", n_cells},
              {"spin_up_hours", spin_up_hours},
              {"physical", json_physical(phys)}});

  std::cout << "sunrise=" << format_iso8601_utc(sunrise)
            << " thermographs=" << thermographs.entries.size()
            << " t_total_s=" << fmt_double(t_total) << " out=" << out.string() << "\n";
  return 0;
}

int cmd_estimate(const std::string& weather_path, const std::string& day_str,
                 const std::string& thermograph_path, const std::vector<double>& bounds,
                 const std::string& preset_name, const std::string& out_dir,
                 const PhysicalFlags& phys, std::uint64_t seed, int max_outer,
                 std::int64_t max_steps, double scaler_margin) {
  if (bounds.size() != 2 || !(bounds[0] > 0.0) || !(bounds[1] > bounds[0])) {
    throw UsageError("--material-bounds expects MIN,MAX with 0 < MIN < MAX");
  }
  const auto records = weather::read_weather_csv(weather_path);
  const CivilDate day = parse_date(day_str);
  const std::int64_t sunrise = weather::detect_sunrise(records, day);
  const inverse::ThermographSet thermographs =
      inverse::read_thermograph_csv(thermograph_path);
  const double t_total = thermographs.entries.back().time_s;
  thermographs.validate(t_total);

  const physics::WallSpec wall = wall_from(phys);
  const physics::IndoorConditions indoor = indoor_from(phys);
  const weather::EnvSeries env =
      weather::build_env_series(records, sunrise, t_total, indoor, env_options_from(phys));
  const physics::Scaler scaler =
      weather::make_scaler(env, wall, bounds[0], bounds[1], scaler_margin);
  const pinn::ForwardProblem problem = pinn::make_problem(wall, env, scaler);

  const harness::Preset preset = harness::preset_by_name(preset_name);
  inverse::EstimateOptions options;
  options.layer_sizes = preset.layer_sizes;
  options.train = preset.train;
  options.inverse = preset.inverse;
  options.seed = seed;
  if (max_outer > 0) options.inverse.max_outer = max_outer;
  if (max_steps > 0) options.train.max_steps = max_steps;

  const auto start = std::chrono::steady_clock::now();
  const inverse::EstimateResult result = inverse::estimate_k(problem, thermographs, options);
  const double runtime =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::filesystem::path out(out_dir);
  std::filesystem::create_directories(out);
  inverse::write_ktrace_csv(result.trace, (out / "ktrace.csv").string());
  net::save_params(result.params, (out / "net.json").string());
  write_json(out / "summary.json",
             {{"k_hat_wmk", result.trace.k_hat_final()},
              {"k0_wmk", result.trace.k0},
              {"converged", result.trace.converged},
              {"stop_reason", result.trace.stop_reason},
              {"outer_iters", result.trace.entries.size()},
              {"inner_steps", result.total_inner_steps},
              {"k_min", bounds[0]},
              {"k_max", bounds[1]},
              {"preset", preset_name},
              {"seed", seed},
              {"day", day_str},
              {"sunrise", format_iso8601_utc(sunrise)},
              {"thermograph_count", thermographs.entries.size()},
              {"t_total_s", t_total}});
  write_json(out / "run_config.json",
             {{"command", "estimate"},
              {"weather", weather_path},
              {"day", day_str},
              {"thermographs", thermograph_path},
              {"material_bounds", bounds},
              {"preset", preset_name},
              {"seed", seed},
              {"max_outer", max_outer},
              {"max_steps", max_steps},
              {"scaler_margin", scaler_margin},
              {"physical", json_physical(phys)}});

  std::cout << "k_hat_wmk=" << fmt_double(result.trace.k_hat_final())
            << " converged=" << (result.trace.converged ? "true" : "false")
            << " stop_reason=" << result.trace.stop_reason
            << " outer_iters=" << result.trace.entries.size()
            << " inner_steps=" << result.total_inner_steps
            << " runtime_s=" << fmt_double(runtime) << "\n";
  return 0;
}

int cmd_campaign(const std::string& config_path, const std::string& resume_dir) {
  const harness::CampaignConfig config = harness::load_campaign_config(config_path);
  const std::filesystem::path run_dir = harness::run_campaign(config, resume_dir, std::cout);
  std::cout << "run_dir=" << run_dir.string() << "\n";
  return 0;
}

int cmd_report(const std::string& run_dir) {
  const std::filesystem::path run(run_dir);
  if (!std::filesystem::is_directory(run)) {
    throw DataError("run directory '" + run_dir + "' does not exist");
  }
  harness::BootstrapOptions options;
  const std::filesystem::path config_path = run / "config.json";
  if (std::filesystem::exists(config_path)) {
    options = harness::load_campaign_config(config_path.string()).bootstrap;
  }
  harness::write_report(run, options);
  std::cout << "report regenerated in " << run.string() << "\n";
  return 0;
}

int cmd_env_export(const std::string& weather_path, const std::string& day_str, double hours,
                   const std::string& out_path, const PhysicalFlags& phys) {
  const auto records = weather::read_weather_csv(weather_path);
  const CivilDate day = parse_date(day_str);
  const std::int64_t sunrise = weather::detect_sunrise(records, day);
  const weather::EnvSeries env = weather::build_env_series(
      records, sunrise, hours * 3600.0, indoor_from(phys), env_options_from(phys));
  weather::write_env_csv(env, out_path);
  std::cout << "sunrise=" << format_iso8601_utc(sunrise) << " samples=" << env.samples.size()
            << " out=" << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"walltherm: estimates wall thermal conductivity from surface thermographs"};
  app.name("walltherm");
  app.require_subcommand(1);

  // simulate
  auto* simulate = app.add_subcommand(
      "simulate", "Generate ground-truth thermographs for one day with the FVM solver");
  std::string sim_weather, sim_day, sim_ic = "steady", sim_protocol = "t418", sim_out;
  double sim_k = 2.0, sim_dt = 60.0, sim_spin_up_hours = 72.0;
  int sim_n_cells = 60;
  PhysicalFlags sim_phys;
  simulate->add_option("--weather", sim_weather, "weather CSV path")->required();
  simulate->add_option("--day", sim_day, "analysis day, YYYY-MM-DD")
      ->required()
      ->check(date_check);
  simulate->add_option("--k", sim_k, "true conductivity, W/(m K)")->required();
  simulate->add_option("--ic", sim_ic, "initial condition")
      ->check(CLI::IsMember({"steady", "spinup", "spin_up"}))
      ->capture_default_str();
  simulate->add_option("--protocol", sim_protocol, "thermograph capture protocol")
      ->check(CLI::IsMember({"t418", "t4_18", "t15", "t1_5"}))
      ->capture_default_str();
  simulate->add_option("--out", sim_out, "output directory")->required();
  simulate->add_option("--dt", sim_dt, "solver time step, s")->capture_default_str();
  simulate->add_option("--n-cells", sim_n_cells, "solver cell count")->capture_default_str();
  simulate->add_option("--spin-up-hours", sim_spin_up_hours, "spin-up window length, h")
      ->capture_default_str();
  add_physical_flags(simulate, sim_phys);

  // estimate
  auto* estimate = app.add_subcommand(
      "estimate", "Estimate conductivity from measured thermographs with the PINN");
  std::string est_weather, est_day, est_thermographs, est_preset = "desk", est_out;
  std::vector<double> est_bounds = {0.5, 6.0};
  std::uint64_t est_seed = 1;
  int est_max_outer = 0;
  std::int64_t est_max_steps = 0;
  double est_margin = 5.0;
  PhysicalFlags est_phys;
  estimate->add_option("--weather", est_weather, "weather CSV path")->required();
  estimate->add_option("--day", est_day, "analysis day, YYYY-MM-DD")
      ->required()
      ->check(date_check);
  estimate->add_option("--thermographs", est_thermographs, "thermograph CSV path")
      ->required();
  estimate
      ->add_option("--material-bounds", est_bounds,
                   "conductivity search range MIN,MAX, W/(m K)")
      ->delimiter(',')
      ->capture_default_str();
  estimate->add_option("--preset", est_preset, "network/training preset")
      ->check(CLI::IsMember({"desk", "paper"}))
      ->capture_default_str();
  estimate->add_option("--out", est_out, "output directory")->required();
  estimate->add_option("--seed", est_seed, "master seed")->capture_default_str();
  estimate->add_option("--max-outer", est_max_outer, "outer iteration cap, 0 keeps preset")
      ->capture_default_str();
  estimate->add_option("--max-steps", est_max_steps, "inner step cap, 0 keeps preset")
      ->capture_default_str();
  estimate->add_option("--scaler-margin", est_margin, "temperature range margin, K")
      ->capture_default_str();
  add_physical_flags(estimate, est_phys);

  // campaign
  auto* campaign =
      app.add_subcommand("campaign", "Run a scenario matrix from a JSON config file");
  std::string camp_config, camp_resume;
  campaign->add_option("--config", camp_config, "campaign config JSON path")->required();
  campaign->add_option("--resume", camp_resume, "existing run directory to continue");

  // report
  auto* report =
      app.add_subcommand("report", "Regenerate result tables from a stored run directory");
  std::string rep_run;
  report->add_option("--run", rep_run, "run directory containing rows.csv")->required();

  // env-export
  auto* env_export = app.add_subcommand(
      "env-export", "Export the transformed forcing series for one day");
  std::string env_weather, env_day, env_out;
  double env_hours = 4.5;
  PhysicalFlags env_phys;
  env_export->add_option("--weather", env_weather, "weather CSV path")->required();
  env_export->add_option("--day", env_day, "analysis day, YYYY-MM-DD")
      ->required()
      ->check(date_check);
  env_export->add_option("--hours", env_hours, "window length from sunrise, h")
      ->capture_default_str();
  env_export->add_option("--out", env_out, "output CSV path")->required();
  add_physical_flags(env_export, env_phys);

  try {
    app.parse(argc, argv);
    if (app.got_subcommand(simulate)) {
      return cmd_simulate(sim_weather, sim_day, sim_k, canon_ic(sim_ic),
                          canon_protocol(sim_protocol), sim_out, sim_phys, sim_dt,
                          sim_n_cells, sim_spin_up_hours);
    }
    if (app.got_subcommand(estimate)) {
      return cmd_estimate(est_weather, est_day, est_thermographs, est_bounds, est_preset,
                          est_out, est_phys, est_seed, est_max_outer, est_max_steps,
                          est_margin);
    }
    if (app.got_subcommand(campaign)) return cmd_campaign(camp_config, camp_resume);
    if (app.got_subcommand(report)) return cmd_report(rep_run);
    if (app.got_subcommand(env_export)) {
      return cmd_env_export(env_weather, env_day, env_hours, env_out, env_phys);
    }
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const walltherm::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
}
