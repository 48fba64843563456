#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "walltherm/physics.hpp"
#include "walltherm/weather.hpp"

namespace walltherm::fvm {

// Uniform cell-centered grid over the wall thickness.
struct Grid1D {
  int n_cells = 60;
  double thickness_b = 0.3;
  double dx = 0.005;

  double center(int i) const { return (i + 0.5) * dx; }
  static Grid1D uniform(double thickness_b, int n_cells);
};

// Snapshot of the wall temperature field: cell averages plus the two face
// temperatures reconstructed from the boundary flux balance.
struct Profile {
  Grid1D grid;
  std::vector<double> cells;
  double face_out = 0.0;  // T at x = 0
  double face_in = 0.0;   // T at x = b

  double operator()(double x) const;  // piecewise linear through faces and centers
};

struct FieldHistory {
  Grid1D grid;
  std::vector<double> times;
  Eigen::MatrixXd cells;  // one row per time
  std::vector<double> face_out;
  std::vector<double> face_in;
  // Per step: change in stored energy and boundary heat crossing in, J/m^2.
  // Backward Euler makes these identical up to rounding.
  std::vector<double> energy_stored;
  std::vector<double> energy_boundary;

  double sample(double t, double x) const;  // bilinear, clamped to the history
  Profile profile_at(double t) const;
};

struct Thermograph {
  double time_s = 0.0;       // relative to the window start
  double surface_temp = 0.0; // outer surface, K
};

using ThermographSchedule = std::vector<double>;

// Capture protocols: every 15 min from minute 15 through 270 after sunrise,
// and the late subset covering only minutes 210 through 270.
ThermographSchedule schedule_t4_18();
ThermographSchedule schedule_t1_5();

struct SolverOptions {
  double dt = 60.0;
  int n_cells = 60;
};

// Implicit (backward Euler) finite-volume solve of the 1D heat equation over
// [0, env.duration] with Robin boundaries driven by the forcing series.
FieldHistory solve_transient(const physics::WallSpec& wall, const weather::EnvSeries& env,
                             const std::function<double(double)>& initial_temp,
                             const SolverOptions& options = {});

// Steady profile matched to the forcing at the window start; the usual
// initial condition when no spin-up history is available.
std::function<double(double)> steady_initial(const physics::WallSpec& wall,
                                             const weather::EnvSeries& env);

// Integrates the wall over a pre-conditioning window (steady start) and
// returns the final state, to be used as the initial condition of a
// subsequent analysis window.
Profile spin_up(const physics::WallSpec& wall, const weather::EnvSeries& env_pre,
                const SolverOptions& options = {});

std::vector<Thermograph> extract_thermographs(const FieldHistory& history,
                                              const ThermographSchedule& schedule);

// One row per stored time: time_s, outer face, cell centers, inner face.
void write_history_csv(const FieldHistory& history, const std::string& path);

}  // namespace walltherm::fvm
