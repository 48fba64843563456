#pragma once

#include "synthetic_weather.hpp"
#include "walltherm/physics.hpp"
#include "walltherm/weather.hpp"

namespace walltherm::testsupport {

inline weather::EnvSeries const_env(double temp_out_k, double wind, double irradiance,
                                    const physics::IndoorConditions& indoor,
                                    double duration) {
  weather::EnvSeries env;
  env.t0_epoch = 0;
  env.duration = duration;
  env.indoor = indoor;
  env.albedo = 1.0;
  env.diffuse_fraction = 1.0;
  env.v_min_clamp = 0.1;
  physics::EnvSample a;
  a.time_s = 0.0;
  a.temp_out = temp_out_k;
  a.wind_speed = wind;
  a.q_direct = 0.0;
  a.q_diffuse = irradiance;
  physics::EnvSample b = a;
  b.time_s = duration;
  env.samples = {a, b};
  return env;
}

// One synthetic analysis day: sunrise-anchored window of `duration` seconds.
inline weather::EnvSeries day_env(const CivilDate& day, double duration,
                                  const physics::IndoorConditions& indoor = {},
                                  const weather::EnvOptions& options = {}) {
  WeatherGenOptions gen;
  gen.start = CivilDate{day.year, day.month, day.day};
  gen.n_days = 2;
  const auto records = synthetic_weather(gen);
  const std::int64_t sunrise = weather::detect_sunrise(records, day);
  return weather::build_env_series(records, sunrise, duration, indoor, options);
}

}  // namespace walltherm::testsupport
