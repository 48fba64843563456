#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include "walltherm/fvm.hpp"
#include "walltherm/harness.hpp"
#include "walltherm/inverse.hpp"
#include "walltherm/pinn.hpp"
#include "walltherm/physics.hpp"
#include "walltherm/timeutil.hpp"
#include "walltherm/weather.hpp"

namespace py = pybind11;
using namespace walltherm;

namespace {

struct PhysicalArgs {
  double thickness = 0.3;
  double cp = 750.0;
  double rho = 2300.0;
  double albedo = 1.0;
  double temp_in = 298.15;
  double h_in = 2.0;
  double diffuse_fraction = 1.0;
  double v_min_clamp = 0.1;
  double max_gap_min = 30.0;

  physics::WallSpec wall(double k) const {
    physics::WallSpec w;
    w.thickness_b = thickness;
    w.heat_capacity_cp = cp;
    w.density_rho = rho;
    w.albedo = albedo;
    w.conductivity_k = k;
    w.validate();
    return w;
  }
  physics::IndoorConditions indoor() const {
    physics::IndoorConditions i;
    i.temp_in = temp_in;
    i.h_in = h_in;
    i.validate();
    return i;
  }
  weather::EnvOptions env_options() const {
    weather::EnvOptions o;
    o.diffuse_fraction = diffuse_fraction;
    o.albedo = albedo;
    o.v_min_clamp = v_min_clamp;
    o.max_gap_s = max_gap_min * 60.0;
    return o;
  }
};

weather::EnvSeries day_env(const std::string& weather_csv, const std::string& day,
                           double duration_s, const PhysicalArgs& phys,
                           std::int64_t* sunrise_out) {
  const auto records = weather::read_weather_csv(weather_csv);
  const std::int64_t sunrise = weather::detect_sunrise(records, parse_date(day));
  if (sunrise_out) *sunrise_out = sunrise;
  return weather::build_env_series(records, sunrise, duration_s, phys.indoor(),
                                   phys.env_options());
}

py::dict simulate_day(const std::string& weather_csv, const std::string& day, double k,
                      const std::string& protocol, const std::string& ic,
                      double dt, int n_cells, double spin_up_hours,
                      const PhysicalArgs& phys) {
  const fvm::ThermographSchedule schedule = harness::schedule_for_protocol(protocol);
  std::int64_t sunrise = 0;
  const weather::EnvSeries env =
      day_env(weather_csv, day, schedule.back(), phys, &sunrise);
  const physics::WallSpec wall = phys.wall(k);

  fvm::SolverOptions solver;
  solver.dt = dt;
  solver.n_cells = n_cells;

  std::function<double(double)> initial = fvm::steady_initial(wall, env);
  if (ic == "spin_up" || ic == "spinup") {
    const auto records = weather::read_weather_csv(weather_csv);
    const double pre_s = spin_up_hours * 3600.0;
    const weather::EnvSeries env_pre =
        weather::build_env_series(records, sunrise - static_cast<std::int64_t>(pre_s),
                                  pre_s, phys.indoor(), phys.env_options());
    const fvm::Profile spun = fvm::spin_up(wall, env_pre, solver);
    initial = [spun](double x) { return spun(x); };
  } else if (ic != "steady") {
    throw std::invalid_argument("ic must be 'steady' or 'spin_up'");
  }

  const fvm::FieldHistory history = fvm::solve_transient(wall, env, initial, solver);
  const auto thermographs = fvm::extract_thermographs(history, schedule);

  std::vector<double> times, temps;
  for (const auto& t : thermographs) {
    times.push_back(t.time_s);
    temps.push_back(t.surface_temp);
  }
  py::dict out;
  out["sunrise_epoch"] = sunrise;
  out["sunrise_iso"] = format_iso8601_utc(sunrise);
  out["time_s"] = times;
  out["surface_temp_k"] = temps;
  return out;
}

py::dict estimate(const std::string& weather_csv, const std::string& day,
                  const std::vector<double>& time_s,
                  const std::vector<double>& surface_temp_k, double k_min, double k_max,
                  const std::string& preset_name, std::uint64_t seed, int max_outer,
                  std::int64_t max_steps, double scaler_margin, const PhysicalArgs& phys) {
  if (time_s.size() != surface_temp_k.size()) {
    throw std::invalid_argument("time_s and surface_temp_k must have the same length");
  }
  if (!(k_min > 0.0) || !(k_max > k_min)) {
    throw std::invalid_argument("need 0 < k_min < k_max");
  }
  inverse::ThermographSet thermographs;
  for (size_t i = 0; i < time_s.size(); ++i) {
    thermographs.entries.push_back({time_s[i], surface_temp_k[i]});
  }
  const double t_total = time_s.empty() ? 0.0 : time_s.back();
  thermographs.validate(t_total);

  const weather::EnvSeries env = day_env(weather_csv, day, t_total, phys, nullptr);
  const physics::WallSpec wall = phys.wall(2.0);
  const physics::Scaler scaler =
      weather::make_scaler(env, wall, k_min, k_max, scaler_margin);
  const pinn::ForwardProblem problem = pinn::make_problem(wall, env, scaler);

  const harness::Preset preset = harness::preset_by_name(preset_name);
  inverse::EstimateOptions options;
  options.layer_sizes = preset.layer_sizes;
  options.train = preset.train;
  options.inverse = preset.inverse;
  options.seed = seed;
  if (max_outer > 0) options.inverse.max_outer = max_outer;
  if (max_steps > 0) options.train.max_steps = max_steps;

  inverse::EstimateResult result;
  {
    py::gil_scoped_release release;
    result = inverse::estimate_k(problem, thermographs, options);
  }

  std::vector<double> trace_k, trace_loss;
  std::vector<std::int64_t> trace_inner;
  for (const auto& e : result.trace.entries) {
    trace_k.push_back(e.k_hat);
    trace_loss.push_back(e.loss_tc);
    trace_inner.push_back(e.inner_steps);
  }
  py::dict out;
  out["k_hat_wmk"] = result.trace.k_hat_final();
  out["k0_wmk"] = result.trace.k0;
  out["converged"] = result.trace.converged;
  out["stop_reason"] = result.trace.stop_reason;
  out["outer_k"] = trace_k;
  out["outer_loss"] = trace_loss;
  out["outer_inner_steps"] = trace_inner;
  out["total_inner_steps"] = result.total_inner_steps;
  return out;
}

py::dict env_series(const std::string& weather_csv, const std::string& day, double hours,
                    double step_s, const PhysicalArgs& phys) {
  std::int64_t sunrise = 0;
  const weather::EnvSeries env =
      day_env(weather_csv, day, hours * 3600.0, phys, &sunrise);
  std::vector<double> times, solair, h_out;
  for (double t = 0.0; t <= env.duration + 1e-9; t += step_s) {
    const auto point = env.at(t);
    times.push_back(t);
    solair.push_back(point.solair_temp);
    h_out.push_back(point.h_out);
  }
  py::dict out;
  out["sunrise_epoch"] = sunrise;
  out["time_s"] = times;
  out["solair_temp_k"] = solair;
  out["h_out_wm2k"] = h_out;
  return out;
}

py::tuple steady_surfaces(double k, double thickness, double sol_air_out, double temp_in,
                          double h_out_value, double h_in) {
  physics::WallSpec wall;
  wall.thickness_b = thickness;
  wall.conductivity_k = k;
  wall.validate();
  const physics::SteadyProfile profile =
      physics::steady_profile(wall, sol_air_out, temp_in, h_out_value, h_in);
  return py::make_tuple(profile.surface_out, profile.surface_in);
}

}  // namespace

PYBIND11_MODULE(_walltherm, m) {
  m.doc() = "Wall conductivity estimation from surface thermographs";
  m.attr("__version__") = "0.1.0";

  py::class_<PhysicalArgs>(m, "Physical")
      .def(py::init<>())
      .def_readwrite("thickness", &PhysicalArgs::thickness)
      .def_readwrite("cp", &PhysicalArgs::cp)
      .def_readwrite("rho", &PhysicalArgs::rho)
      .def_readwrite("albedo", &PhysicalArgs::albedo)
      .def_readwrite("temp_in", &PhysicalArgs::temp_in)
      .def_readwrite("h_in", &PhysicalArgs::h_in)
      .def_readwrite("diffuse_fraction", &PhysicalArgs::diffuse_fraction)
      .def_readwrite("v_min_clamp", &PhysicalArgs::v_min_clamp)
      .def_readwrite("max_gap_min", &PhysicalArgs::max_gap_min);

  m.def("simulate_day", &simulate_day, py::arg("weather_csv"), py::arg("day"),
        py::arg("k"), py::arg("protocol") = "t4_18", py::arg("ic") = "steady",
        py::arg("dt") = 60.0, py::arg("n_cells") = 60, py::arg("spin_up_hours") = 72.0,
        py::arg("physical") = PhysicalArgs{},
        "Solve the ground-truth wall model for one day and return the "
        "thermographs the capture protocol would record.");

  m.def("estimate", &estimate, py::arg("weather_csv"), py::arg("day"), py::arg("time_s"),
        py::arg("surface_temp_k"), py::arg("k_min") = 0.5, py::arg("k_max") = 6.0,
        py::arg("preset") = "desk", py::arg("seed") = 1, py::arg("max_outer") = 0,
        py::arg("max_steps") = 0, py::arg("scaler_margin") = 5.0,
        py::arg("physical") = PhysicalArgs{},
        "Estimate the wall conductivity from measured surface thermographs; "
        "max_outer/max_steps of 0 keep the preset values.");

  m.def("env_series", &env_series, py::arg("weather_csv"), py::arg("day"),
        py::arg("hours") = 4.5, py::arg("step_s") = 300.0,
        py::arg("physical") = PhysicalArgs{},
        "Sample the transformed forcing (sol-air temperature and film "
        "coefficient) for one analysis window.");

  m.def("steady_surfaces", &steady_surfaces, py::arg("k"), py::arg("thickness") = 0.3,
        py::arg("sol_air_out") = 278.15, py::arg("temp_in") = 298.15,
        py::arg("h_out") = 10.0, py::arg("h_in") = 2.0,
        "Steady-state surface temperatures (outer, inner) for constant forcing.");
}
