#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "walltherm/physics.hpp"
#include "walltherm/timeutil.hpp"

namespace walltherm::weather {

// One line of a station export. Temperatures are degrees Celsius as read;
// irradiance is global horizontal on the facade plane.
struct RawWeatherRecord {
  std::int64_t timestamp = 0;  // epoch seconds, UTC
  double temp_out_c = 0.0;
  double wind_speed = 0.0;     // m/s
  double wind_dir_deg = 0.0;
  double global_irradiance = 0.0;  // W/m^2
};

// Schema: timestamp_iso8601,temp_out_c,wind_speed_ms,wind_dir_deg,
// global_irradiance_wm2. Records must be strictly increasing in time.
std::vector<RawWeatherRecord> read_weather_csv(const std::string& path);

// Epoch second of the first record on `day` (UTC) whose irradiance exceeds
// the threshold. Throws DataError when the day is absent or never lights up.
std::int64_t detect_sunrise(const std::vector<RawWeatherRecord>& records,
                            const CivilDate& day, double irradiance_threshold = 1.0);

// Forcing at one instant after interpolation and transformation.
struct EnvPoint {
  double solair_temp = 0.0;  // K
  double h_out = 0.0;        // W/(m^2 K)
  double temp_out = 0.0;     // K
};

struct EnvOptions {
  double diffuse_fraction = 1.0;  // share of global irradiance treated as diffuse
  double albedo = 1.0;
  double v_min_clamp = 0.1;  // m/s
  double max_gap_s = 1800.0;
};

// Outdoor forcing over one analysis window. Raw fields are interpolated
// linearly in time first and transformed afterwards, so the film coefficient
// and sol-air temperature stay consistent with each other at every instant.
struct EnvSeries {
  std::int64_t t0_epoch = 0;
  double duration = 0.0;  // s
  physics::IndoorConditions indoor;
  double albedo = 1.0;
  double diffuse_fraction = 1.0;
  double v_min_clamp = 0.1;
  std::vector<physics::EnvSample> samples;  // time_s relative to t0_epoch

  physics::EnvSample interpolate(double t) const;  // clamped to the sample range
  EnvPoint at(double t) const;
};

// Selects the records covering [t0, t0 + duration], converts units and checks
// gap and coverage requirements (throws DataError on violation).
EnvSeries build_env_series(const std::vector<RawWeatherRecord>& records,
                           std::int64_t t0_epoch, double duration,
                           const physics::IndoorConditions& indoor,
                           const EnvOptions& options = {});

// Export with a '#'-prefixed metadata preamble followed by the sample table;
// read_env_csv reproduces the series exactly (values round-trip).
void write_env_csv(const EnvSeries& env, const std::string& path);
EnvSeries read_env_csv(const std::string& path);

// Temperature bounds scan the transformed forcing on a 60 s grid plus the
// indoor temperature, widened by `margin` kelvin on both sides.
physics::Scaler make_scaler(const EnvSeries& env, const physics::WallSpec& wall,
                            double k_min, double k_max, double margin = 5.0);

}  // namespace walltherm::weather
