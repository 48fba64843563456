#include "walltherm/physics.hpp"

#include <cmath>
#include <stdexcept>

namespace walltherm::physics {
namespace {

void require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

}  // namespace

void WallSpec::validate() const {
  require(thickness_b > 0.0, "WallSpec: thickness_b must be > 0");
  require(conductivity_k > 0.0, "WallSpec: conductivity_k must be > 0");
  require(heat_capacity_cp > 0.0, "WallSpec: heat_capacity_cp must be > 0");
  require(density_rho > 0.0, "WallSpec: density_rho must be > 0");
  require(albedo >= 0.0 && albedo <= 1.0, "WallSpec: albedo must be in [0, 1]");
}

void IndoorConditions::validate() const {
  require(temp_in > 0.0, "IndoorConditions: temp_in must be > 0 K");
  require(h_in > 0.0, "IndoorConditions: h_in must be > 0");
}

double h_out(double wind_speed, double v_min_clamp) {
  if (wind_speed < 0.0) throw std::invalid_argument("h_out: wind_speed must be >= 0");
  const double v = std::max(wind_speed, v_min_clamp);
  return 18.6 * std::pow(v, 0.605);
}

double sol_air(double temp_out, double q_direct, double q_diffuse, double albedo,
               double h_out_value) {
  if (h_out_value <= 0.0) throw std::invalid_argument("sol_air: h_out must be > 0");
  return temp_out + ((1.0 - albedo) * q_direct + q_diffuse) / h_out_value;
}

SteadyProfile steady_profile(const WallSpec& wall, double sol_air_out, double temp_in,
                             double h_out_value, double h_in) {
  wall.validate();
  require(h_out_value > 0.0, "steady_profile: h_out must be > 0");
  require(h_in > 0.0, "steady_profile: h_in must be > 0");
  const double k = wall.conductivity_k;
  const double b = wall.thickness_b;
  // Series thermal resistance: 1/h_out + b/k + 1/h_in. The surface
  // temperatures are the convex combinations that make the flux through each
  // segment equal.
  const double denom = h_in * h_out_value * b + k * (h_in + h_out_value);
  const double t0 = (sol_air_out * (h_out_value * h_in * b + h_out_value * k) + temp_in * h_in * k) / denom;
  const double tb = (sol_air_out * h_out_value * k + temp_in * (h_in * h_out_value * b + h_in * k)) / denom;
  return SteadyProfile{t0, tb, b};
}

void Scaler::validate() const {
  require(t_total > 0.0, "Scaler: t_total must be > 0");
  require(thickness_b > 0.0, "Scaler: thickness_b must be > 0");
  require(t_max_temp > t_min_temp, "Scaler: temperature range must be non-empty");
  require(k_max > k_min, "Scaler: conductivity range must be non-empty");
  require(k_min > 0.0, "Scaler: k_min must be > 0");
}

}  // namespace walltherm::physics
