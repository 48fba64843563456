#include "walltherm/fvm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "walltherm/csvio.hpp"
#include "walltherm/errors.hpp"

namespace walltherm::fvm {
namespace {

// Conductance per unit area between an ambient node and the first cell
// center: film resistance in series with half a cell of conduction.
double boundary_conductance(double h, double k, double dx) {
  return 1.0 / (1.0 / h + dx / (2.0 * k));
}

double face_temperature(double h, double t_ambient, double k, double dx, double t_cell) {
  const double g = 2.0 * k / dx;
  return (h * t_ambient + g * t_cell) / (h + g);
}

// Thomas algorithm; diag/rhs are overwritten.
void solve_tridiagonal(std::vector<double>& sub, std::vector<double>& diag,
                       std::vector<double>& sup, std::vector<double>& rhs,
                       std::vector<double>& out) {
  const size_t n = diag.size();
  for (size_t i = 1; i < n; ++i) {
    const double w = sub[i] / diag[i - 1];
    diag[i] -= w * sup[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  out[n - 1] = rhs[n - 1] / diag[n - 1];
  for (size_t i = n - 1; i-- > 0;) {
    out[i] = (rhs[i] - sup[i] * out[i + 1]) / diag[i];
  }
}

}  // namespace

Grid1D Grid1D::uniform(double thickness_b, int n_cells) {
  if (n_cells < 2) throw std::invalid_argument("Grid1D: n_cells must be >= 2");
  if (thickness_b <= 0.0) throw std::invalid_argument("Grid1D: thickness_b must be > 0");
  return Grid1D{n_cells, thickness_b, thickness_b / n_cells};
}

double Profile::operator()(double x) const {
  const int n = grid.n_cells;
  const double half = 0.5 * grid.dx;
  if (x <= 0.0) return face_out;
  if (x >= grid.thickness_b) return face_in;
  if (x <= half) return face_out + (cells[0] - face_out) * (x / half);
  const double last_center = grid.center(n - 1);
  if (x >= last_center) {
    return cells[n - 1] + (face_in - cells[n - 1]) * ((x - last_center) / half);
  }
  const int i = static_cast<int>((x - half) / grid.dx);
  const double x_i = grid.center(i);
  const double w = (x - x_i) / grid.dx;
  return cells[i] + (cells[i + 1] - cells[i]) * w;
}

double FieldHistory::sample(double t, double x) const {
  if (times.empty()) throw std::logic_error("FieldHistory is empty");
  const auto row_profile = [&](Eigen::Index r) {
    Profile p;
    p.grid = grid;
    p.cells.assign(cells.row(r).begin(), cells.row(r).end());
    p.face_out = face_out[r];
    p.face_in = face_in[r];
    return p;
  };
  if (t <= times.front()) return row_profile(0)(x);
  if (t >= times.back()) return row_profile(static_cast<Eigen::Index>(times.size()) - 1)(x);
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const auto hi = static_cast<Eigen::Index>(it - times.begin());
  const auto lo = hi - 1;
  const double w = (t - times[lo]) / (times[hi] - times[lo]);
  return (1.0 - w) * row_profile(lo)(x) + w * row_profile(hi)(x);
}

Profile FieldHistory::profile_at(double t) const {
  if (times.empty()) throw std::logic_error("FieldHistory is empty");
  Profile p;
  p.grid = grid;
  p.cells.resize(grid.n_cells);
  const auto blend = [&](Eigen::Index lo, Eigen::Index hi, double w) {
    for (int c = 0; c < grid.n_cells; ++c) {
      p.cells[c] = (1.0 - w) * cells(lo, c) + w * cells(hi, c);
    }
    p.face_out = (1.0 - w) * face_out[lo] + w * face_out[hi];
    p.face_in = (1.0 - w) * face_in[lo] + w * face_in[hi];
  };
  if (t <= times.front()) {
    blend(0, 0, 0.0);
  } else if (t >= times.back()) {
    const auto last = static_cast<Eigen::Index>(times.size()) - 1;
    blend(last, last, 0.0);
  } else {
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const auto hi = static_cast<Eigen::Index>(it - times.begin());
    blend(hi - 1, hi, (t - times[hi - 1]) / (times[hi] - times[hi - 1]));
  }
  return p;
}

ThermographSchedule schedule_t4_18() {
  ThermographSchedule s;
  for (int minute = 15; minute <= 270; minute += 15) s.push_back(minute * 60.0);
  return s;
}

ThermographSchedule schedule_t1_5() {
  ThermographSchedule s;
  for (int minute = 210; minute <= 270; minute += 15) s.push_back(minute * 60.0);
  return s;
}

FieldHistory solve_transient(const physics::WallSpec& wall, const weather::EnvSeries& env,
                             const std::function<double(double)>& initial_temp,
                             const SolverOptions& options) {
  wall.validate();
  env.indoor.validate();
  if (options.dt <= 0.0) throw std::invalid_argument("solve_transient: dt must be > 0");
  const Grid1D grid = Grid1D::uniform(wall.thickness_b, options.n_cells);
  const int n = grid.n_cells;
  const double k = wall.conductivity_k;
  const double capacity = wall.density_rho * wall.heat_capacity_cp * grid.dx;
  const double g_cell = k / grid.dx;
  const double beta_in = boundary_conductance(env.indoor.h_in, k, grid.dx);
  const double t_end = env.duration;
  const int n_steps = static_cast<int>(std::ceil(t_end / options.dt - 1e-9));

  FieldHistory hist;
  hist.grid = grid;
  hist.times.reserve(n_steps + 1);
  hist.cells.resize(n_steps + 1, n);
  hist.face_out.reserve(n_steps + 1);
  hist.face_in.reserve(n_steps + 1);
  hist.energy_stored.reserve(n_steps);
  hist.energy_boundary.reserve(n_steps);

  std::vector<double> temp(n);
  for (int i = 0; i < n; ++i) temp[i] = initial_temp(grid.center(i));

  const auto record = [&](int row, double time) {
    hist.times.push_back(time);
    for (int i = 0; i < n; ++i) hist.cells(row, i) = temp[i];
    const weather::EnvPoint p = env.at(time);
    hist.face_out.push_back(face_temperature(p.h_out, p.solair_temp, k, grid.dx, temp[0]));
    hist.face_in.push_back(
        face_temperature(env.indoor.h_in, env.indoor.temp_in, k, grid.dx, temp[n - 1]));
  };
  record(0, 0.0);

  std::vector<double> sub(n), diag(n), sup(n), rhs(n), next(n);
  double t = 0.0;
  for (int step = 0; step < n_steps; ++step) {
    const double dt = std::min(options.dt, t_end - t);
    const double t_next = (step + 1 == n_steps) ? t_end : t + dt;
    const weather::EnvPoint p = env.at(t + 0.5 * dt);
    const double beta_out = boundary_conductance(p.h_out, k, grid.dx);
    const double c_dt = capacity / dt;

    for (int i = 0; i < n; ++i) {
      sub[i] = (i > 0) ? -g_cell : 0.0;
      sup[i] = (i + 1 < n) ? -g_cell : 0.0;
      diag[i] = c_dt;
      if (i > 0) diag[i] += g_cell;
      if (i + 1 < n) diag[i] += g_cell;
      rhs[i] = c_dt * temp[i];
    }
    diag[0] += beta_out;
    rhs[0] += beta_out * p.solair_temp;
    diag[n - 1] += beta_in;
    rhs[n - 1] += beta_in * env.indoor.temp_in;

    solve_tridiagonal(sub, diag, sup, rhs, next);

    double stored = 0.0;
    for (int i = 0; i < n; ++i) stored += capacity * (next[i] - temp[i]);
    const double boundary = dt * (beta_out * (p.solair_temp - next[0]) +
                                  beta_in * (env.indoor.temp_in - next[n - 1]));
    hist.energy_stored.push_back(stored);
    hist.energy_boundary.push_back(boundary);

    temp = next;
    t = t_next;
    record(step + 1, t);
  }
  return hist;
}

std::function<double(double)> steady_initial(const physics::WallSpec& wall,
                                             const weather::EnvSeries& env) {
  const weather::EnvPoint p = env.at(0.0);
  const physics::SteadyProfile profile = physics::steady_profile(
      wall, p.solair_temp, env.indoor.temp_in, p.h_out, env.indoor.h_in);
  return [profile](double x) { return profile(x); };
}

Profile spin_up(const physics::WallSpec& wall, const weather::EnvSeries& env_pre,
                const SolverOptions& options) {
  const FieldHistory hist = solve_transient(wall, env_pre, steady_initial(wall, env_pre), options);
  return hist.profile_at(env_pre.duration);
}

std::vector<Thermograph> extract_thermographs(const FieldHistory& history,
                                              const ThermographSchedule& schedule) {
  std::vector<Thermograph> out;
  out.reserve(schedule.size());
  for (double time : schedule) {
    if (time < history.times.front() - 1e-9 || time > history.times.back() + 1e-9) {
      throw DataError("thermograph time " + fmt_double(time) + " s outside the solved window");
    }
    // Outer face temperature, linear in time between stored rows.
    const auto it = std::upper_bound(history.times.begin(), history.times.end(), time);
    double value;
    if (it == history.times.begin()) {
      value = history.face_out.front();
    } else if (it == history.times.end()) {
      value = history.face_out.back();
    } else {
      const auto hi = static_cast<size_t>(it - history.times.begin());
      const auto lo = hi - 1;
      const double w = (time - history.times[lo]) / (history.times[hi] - history.times[lo]);
      value = (1.0 - w) * history.face_out[lo] + w * history.face_out[hi];
    }
    out.push_back(Thermograph{time, value});
  }
  return out;
}

void write_history_csv(const FieldHistory& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "time_s,x_0";
  for (int i = 0; i < history.grid.n_cells; ++i) {
    out << ",x_" << fmt_double(history.grid.center(i));
  }
  out << ",x_" << fmt_double(history.grid.thickness_b) << "\n";
  for (size_t r = 0; r < history.times.size(); ++r) {
    out << fmt_double(history.times[r]) << ',' << fmt_double(history.face_out[r]);
    for (int i = 0; i < history.grid.n_cells; ++i) {
      out << ',' << fmt_double(history.cells(static_cast<Eigen::Index>(r), i));
    }
    out << ',' << fmt_double(history.face_in[r]) << "\n";
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace walltherm::fvm
