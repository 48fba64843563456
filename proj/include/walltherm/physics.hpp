#pragma once

namespace walltherm::physics {

// Single-leaf homogeneous wall. SI units throughout: m, W/(m K), J/(kg K),
// kg/m^3; albedo is the shortwave reflectance of the outer surface.
struct WallSpec {
  double thickness_b = 0.3;
  double conductivity_k = 2.0;
  double heat_capacity_cp = 750.0;
  double density_rho = 2300.0;
  double albedo = 1.0;

  void validate() const;  // throws std::invalid_argument
};

struct IndoorConditions {
  double temp_in = 298.15;  // K
  double h_in = 2.0;        // W/(m^2 K)

  void validate() const;
};

// One instant of outdoor forcing, times in seconds relative to a window start.
struct EnvSample {
  double time_s = 0.0;
  double temp_out = 0.0;    // K
  double wind_speed = 0.0;  // m/s
  double q_direct = 0.0;    // W/m^2 on the facade
  double q_diffuse = 0.0;   // W/m^2
};

// Wind-driven outer film coefficient, W/(m^2 K). Wind speeds below
// `v_min_clamp` are clamped so the correlation stays away from zero.
double h_out(double wind_speed, double v_min_clamp = 0.1);

// Sol-air temperature: outdoor air temperature plus the radiative load
// absorbed by the surface expressed as an equivalent temperature rise.
double sol_air(double temp_out, double q_direct, double q_diffuse, double albedo,
               double h_out_value);

// Steady-state linear temperature profile through the wall for constant
// boundary forcing; x runs from the outer surface (0) to the inner (b).
struct SteadyProfile {
  double surface_out = 0.0;  // T(0), K
  double surface_in = 0.0;   // T(b), K
  double thickness_b = 1.0;

  double operator()(double x) const {
    return surface_out + (surface_in - surface_out) * (x / thickness_b);
  }
  double flux(double conductivity_k) const {
    return conductivity_k * (surface_out - surface_in) / thickness_b;
  }
};

SteadyProfile steady_profile(const WallSpec& wall, double sol_air_out, double temp_in,
                             double h_out_value, double h_in);

// Affine maps between physical and network coordinates. Temperatures map to
// [0, 1] over [t_min_temp, t_max_temp], time over [0, t_total], position over
// [0, b], conductivity over [k_min, k_max].
struct Scaler {
  double t_total = 1.0;
  double thickness_b = 1.0;
  double t_min_temp = 0.0;
  double t_max_temp = 1.0;
  double k_min = 0.1;
  double k_max = 10.0;

  void validate() const;

  double nondim_time(double t) const { return t / t_total; }
  double nondim_pos(double x) const { return x / thickness_b; }
  double nondim_temp(double temp) const {
    return (temp - t_min_temp) / (t_max_temp - t_min_temp);
  }
  double nondim_k(double k) const { return (k - k_min) / (k_max - k_min); }

  double redim_time(double tau) const { return tau * t_total; }
  double redim_pos(double xi) const { return xi * thickness_b; }
  double redim_temp(double theta) const {
    return t_min_temp + theta * (t_max_temp - t_min_temp);
  }
  double redim_k(double kappa) const { return k_min + kappa * (k_max - k_min); }
};

}  // namespace walltherm::physics
