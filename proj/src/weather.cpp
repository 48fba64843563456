#include "walltherm/weather.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "walltherm/csvio.hpp"
#include "walltherm/errors.hpp"

namespace walltherm::weather {
namespace {

constexpr double kCelsiusOffset = 273.15;

std::string row_context(const std::string& path, size_t row_index) {
  return path + " row " + std::to_string(row_index + 1);
}

}  // namespace

std::vector<RawWeatherRecord> read_weather_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  const size_t c_ts = table.column("timestamp_iso8601");
  const size_t c_temp = table.column("temp_out_c");
  const size_t c_wind = table.column("wind_speed_ms");
  const size_t c_dir = table.column("wind_dir_deg");
  const size_t c_irr = table.column("global_irradiance_wm2");

  std::vector<RawWeatherRecord> records;
  records.reserve(table.rows.size());
  for (size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string where = row_context(path, i);
    RawWeatherRecord rec;
    rec.timestamp = parse_iso8601(row[c_ts]);
    rec.temp_out_c = parse_double(row[c_temp], where);
    rec.wind_speed = parse_double(row[c_wind], where);
    rec.wind_dir_deg = parse_double(row[c_dir], where);
    rec.global_irradiance = parse_double(row[c_irr], where);
    if (rec.wind_speed < 0.0) throw DataError(where + ": negative wind speed");
    if (rec.global_irradiance < 0.0) throw DataError(where + ": negative irradiance");
    if (!records.empty() && rec.timestamp <= records.back().timestamp) {
      throw DataError(where + ": timestamps must be strictly increasing");
    }
    records.push_back(rec);
  }
  if (records.empty()) throw DataError(path + ": no weather records");
  return records;
}

std::int64_t detect_sunrise(const std::vector<RawWeatherRecord>& records,
                            const CivilDate& day, double irradiance_threshold) {
  bool saw_day = false;
  for (const auto& rec : records) {
    if (civil_from_epoch(rec.timestamp) != day) continue;
    saw_day = true;
    if (rec.global_irradiance > irradiance_threshold) return rec.timestamp;
  }
  if (!saw_day) {
    throw DataError("no weather records on " + format_date(day));
  }
  throw DataError("no irradiance above " + fmt_double(irradiance_threshold) +
                  " W/m^2 on " + format_date(day));
}

physics::EnvSample EnvSeries::interpolate(double t) const {
  const auto& s = samples;
  if (s.empty()) throw DataError("EnvSeries has no samples");
  if (t <= s.front().time_s) return s.front();
  if (t >= s.back().time_s) return s.back();
  const auto it = std::upper_bound(
      s.begin(), s.end(), t,
      [](double value, const physics::EnvSample& sample) { return value < sample.time_s; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double w = (t - lo.time_s) / (hi.time_s - lo.time_s);
  physics::EnvSample out;
  out.time_s = t;
  out.temp_out = lo.temp_out + w * (hi.temp_out - lo.temp_out);
  out.wind_speed = lo.wind_speed + w * (hi.wind_speed - lo.wind_speed);
  out.q_direct = lo.q_direct + w * (hi.q_direct - lo.q_direct);
  out.q_diffuse = lo.q_diffuse + w * (hi.q_diffuse - lo.q_diffuse);
  return out;
}

EnvPoint EnvSeries::at(double t) const {
  const physics::EnvSample s = interpolate(t);
  const double h = physics::h_out(s.wind_speed, v_min_clamp);
  const double tsa = physics::sol_air(s.temp_out, s.q_direct, s.q_diffuse, albedo, h);
  return EnvPoint{tsa, h, s.temp_out};
}

EnvSeries build_env_series(const std::vector<RawWeatherRecord>& records,
                           std::int64_t t0_epoch, double duration,
                           const physics::IndoorConditions& indoor,
                           const EnvOptions& options) {
  if (duration <= 0.0) throw std::invalid_argument("build_env_series: duration must be > 0");
  if (options.diffuse_fraction < 0.0 || options.diffuse_fraction > 1.0) {
    throw std::invalid_argument("build_env_series: diffuse_fraction must be in [0, 1]");
  }
  indoor.validate();
  if (records.empty()) throw DataError("no weather records");

  const double t_end = static_cast<double>(t0_epoch) + duration;
  // Last record at or before t0 and first at or after the window end.
  size_t first = records.size();
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].timestamp <= t0_epoch) first = i;
  }
  if (first == records.size()) {
    throw DataError("weather data starts after the requested window (needs a record at or before " +
                    format_iso8601_utc(t0_epoch) + ")");
  }
  size_t last = records.size();
  for (size_t i = records.size(); i-- > 0;) {
    if (static_cast<double>(records[i].timestamp) >= t_end) last = i;
  }
  if (last == records.size()) {
    throw DataError("weather data ends before the requested window (needs a record at or after " +
                    format_iso8601_utc(static_cast<std::int64_t>(t_end)) + ")");
  }

  EnvSeries env;
  env.t0_epoch = t0_epoch;
  env.duration = duration;
  env.indoor = indoor;
  env.albedo = options.albedo;
  env.diffuse_fraction = options.diffuse_fraction;
  env.v_min_clamp = options.v_min_clamp;
  env.samples.reserve(last - first + 1);
  for (size_t i = first; i <= last; ++i) {
    const auto& rec = records[i];
    if (i > first) {
      const double gap = static_cast<double>(rec.timestamp - records[i - 1].timestamp);
      if (gap > options.max_gap_s) {
        throw DataError("weather gap of " + fmt_double(gap) + " s before " +
                        format_iso8601_utc(rec.timestamp) + " exceeds " +
                        fmt_double(options.max_gap_s) + " s");
      }
    }
    physics::EnvSample s;
    s.time_s = static_cast<double>(rec.timestamp - t0_epoch);
    s.temp_out = rec.temp_out_c + kCelsiusOffset;
    s.wind_speed = rec.wind_speed;
    s.q_direct = (1.0 - options.diffuse_fraction) * rec.global_irradiance;
    s.q_diffuse = options.diffuse_fraction * rec.global_irradiance;
    env.samples.push_back(s);
  }
  return env;
}

void write_env_csv(const EnvSeries& env, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "# walltherm-env v1\n";
  out << "# t0_epoch=" << env.t0_epoch << "\n";
  out << "# t0_iso8601=" << format_iso8601_utc(env.t0_epoch) << "\n";
  out << "# duration_s=" << fmt_double(env.duration) << "\n";
  out << "# temp_in_k=" << fmt_double(env.indoor.temp_in) << "\n";
  out << "# h_in=" << fmt_double(env.indoor.h_in) << "\n";
  out << "# albedo=" << fmt_double(env.albedo) << "\n";
  out << "# diffuse_fraction=" << fmt_double(env.diffuse_fraction) << "\n";
  out << "# v_min_clamp=" << fmt_double(env.v_min_clamp) << "\n";
  out << "time_s,temp_out_k,wind_speed_ms,q_direct_wm2,q_diffuse_wm2,"
         "solair_temp_k,h_out_wm2k\n";
  for (const auto& s : env.samples) {
    const double h = physics::h_out(s.wind_speed, env.v_min_clamp);
    const double tsa = physics::sol_air(s.temp_out, s.q_direct, s.q_diffuse, env.albedo, h);
    out << fmt_double(s.time_s) << ',' << fmt_double(s.temp_out) << ','
        << fmt_double(s.wind_speed) << ',' << fmt_double(s.q_direct) << ','
        << fmt_double(s.q_diffuse) << ',' << fmt_double(tsa) << ','
        << fmt_double(h) << "\n";
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

EnvSeries read_env_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  EnvSeries env;
  bool saw_magic = false;
  bool saw_header = false;
  std::string line;
  size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    if (line[0] == '#') {
      std::string body = line.substr(1);
      if (!body.empty() && body.front() == ' ') body.erase(body.begin());
      if (body == "walltherm-env v1") {
        saw_magic = true;
        continue;
      }
      const size_t eq = body.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = body.substr(0, eq);
      const std::string value = body.substr(eq + 1);
      if (key == "t0_epoch") env.t0_epoch = parse_int(value, where);
      else if (key == "duration_s") env.duration = parse_double(value, where);
      else if (key == "temp_in_k") env.indoor.temp_in = parse_double(value, where);
      else if (key == "h_in") env.indoor.h_in = parse_double(value, where);
      else if (key == "albedo") env.albedo = parse_double(value, where);
      else if (key == "diffuse_fraction") env.diffuse_fraction = parse_double(value, where);
      else if (key == "v_min_clamp") env.v_min_clamp = parse_double(value, where);
      continue;
    }
    const auto fields = split_csv_line(line);
    if (!saw_header) {
      if (!saw_magic) {
        throw DataError(path + ": missing '# walltherm-env v1' marker");
      }
      header = fields;
      if (header.size() < 5 || header[0] != "time_s") {
        throw DataError(where + ": unexpected env CSV header");
      }
      saw_header = true;
      continue;
    }
    if (fields.size() != header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields");
    }
    physics::EnvSample s;
    s.time_s = parse_double(fields[0], where);
    s.temp_out = parse_double(fields[1], where);
    s.wind_speed = parse_double(fields[2], where);
    s.q_direct = parse_double(fields[3], where);
    s.q_diffuse = parse_double(fields[4], where);
    env.samples.push_back(s);
  }
  if (!saw_magic) throw DataError(path + ": missing '# walltherm-env v1' marker");
  if (env.samples.empty()) throw DataError(path + ": no samples");
  if (env.duration <= 0.0) throw DataError(path + ": missing or invalid duration_s");
  return env;
}

physics::Scaler make_scaler(const EnvSeries& env, const physics::WallSpec& wall,
                            double k_min, double k_max, double margin) {
  wall.validate();
  if (!(k_min > 0.0 && k_max > k_min)) {
    throw std::invalid_argument("make_scaler: need 0 < k_min < k_max");
  }
  double lo = env.indoor.temp_in;
  double hi = env.indoor.temp_in;
  const double step = 60.0;
  for (double t = 0.0;; t += step) {
    const bool final = t >= env.duration;
    const EnvPoint p = env.at(final ? env.duration : t);
    lo = std::min({lo, p.solair_temp, p.temp_out});
    hi = std::max({hi, p.solair_temp, p.temp_out});
    if (final) break;
  }
  physics::Scaler scaler;
  scaler.t_total = env.duration;
  scaler.thickness_b = wall.thickness_b;
  scaler.t_min_temp = lo - margin;
  scaler.t_max_temp = hi + margin;
  scaler.k_min = k_min;
  scaler.k_max = k_max;
  scaler.validate();
  return scaler;
}

}  // namespace walltherm::weather
