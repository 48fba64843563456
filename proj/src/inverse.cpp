#include "walltherm/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "walltherm/csvio.hpp"
#include "walltherm/errors.hpp"

namespace walltherm::inverse {

void ThermographSet::validate(double t_total) const {
  if (entries.empty()) throw DataError("thermograph set is empty");
  double prev = -1.0;
  for (const auto& tg : entries) {
    if (tg.time_s <= prev) {
      throw DataError("thermograph times must be strictly increasing");
    }
    if (tg.time_s < 0.0 || tg.time_s > t_total + 1e-9) {
      throw DataError("thermograph time " + fmt_double(tg.time_s) +
                      " s outside the analysis window of " + fmt_double(t_total) + " s");
    }
    if (tg.surface_temp <= 0.0) {
      throw DataError("thermograph temperature must be positive (kelvin)");
    }
    prev = tg.time_s;
  }
}

ThermographSet read_thermograph_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  const size_t c_time = table.column("time_s");
  const size_t c_temp = table.column("surface_temp_k");
  ThermographSet set;
  set.entries.reserve(table.rows.size());
  for (size_t i = 0; i < table.rows.size(); ++i) {
    const std::string where = path + " row " + std::to_string(i + 1);
    fvm::Thermograph tg;
    tg.time_s = parse_double(table.rows[i][c_time], where);
    tg.surface_temp = parse_double(table.rows[i][c_temp], where);
    set.entries.push_back(tg);
  }
  if (set.entries.empty()) throw DataError(path + ": no thermographs");
  return set;
}

void write_thermograph_csv(const ThermographSet& set, const std::string& path,
                           std::int64_t t0_epoch) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "# walltherm-thermographs v1\n";
  out << "# t0_epoch=" << t0_epoch << "\n";
  out << "# t0_iso8601=" << format_iso8601_utc(t0_epoch) << "\n";
  out << "time_s,surface_temp_k\n";
  for (const auto& tg : set.entries) {
    out << fmt_double(tg.time_s) << ',' << fmt_double(tg.surface_temp) << "\n";
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

double loss_tc(const net::NetParams& params, const ThermographSet& thermographs,
               const physics::Scaler& scaler, double k_hat_dim) {
  thermographs.validate(scaler.t_total);
  const double kappa = scaler.nondim_k(k_hat_dim);
  const Eigen::Index n = static_cast<Eigen::Index>(thermographs.entries.size());
  Eigen::Matrix3Xd inputs(3, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    inputs(0, j) = scaler.nondim_time(thermographs.entries[j].time_s);
    inputs(1, j) = 0.0;
    inputs(2, j) = kappa;
  }
  const Eigen::RowVectorXd predicted = net::forward_values(params, inputs);
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double diff =
        predicted(j) - scaler.nondim_temp(thermographs.entries[j].surface_temp);
    total += diff * diff;
  }
  return total / static_cast<double>(n);
}

KStep step_k(const net::NetParams& params, const ThermographSet& thermographs,
             const physics::Scaler& scaler, double k_hat_dim, net::ScalarAdam& adam) {
  thermographs.validate(scaler.t_total);
  const double kappa = scaler.nondim_k(k_hat_dim);
  const double n = static_cast<double>(thermographs.entries.size());
  double loss = 0.0;
  double grad = 0.0;
  for (const auto& tg : thermographs.entries) {
    const net::ValueAndKGrad eval =
        net::forward_value_dk(params, scaler.nondim_time(tg.time_s), 0.0, kappa);
    const double diff = eval.value - scaler.nondim_temp(tg.surface_temp);
    loss += diff * diff / n;
    grad += 2.0 * diff * eval.d_kappa / n;
  }
  const double kappa_new = std::clamp(adam.step(kappa, grad), 0.0, 1.0);
  return KStep{scaler.redim_k(kappa_new), loss, grad};
}

void write_ktrace_csv(const KTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "# walltherm-ktrace v1\n";
  out << "# k0=" << fmt_double(trace.k0) << "\n";
  out << "# converged=" << (trace.converged ? "true" : "false") << "\n";
  out << "# stop_reason=" << trace.stop_reason << "\n";
  out << "outer_iter,k_hat_wmk,loss_tc,inner_steps\n";
  for (const auto& e : trace.entries) {
    out << e.outer_iter << ',' << fmt_double(e.k_hat) << ',' << fmt_double(e.loss_tc)
        << ',' << e.inner_steps << "\n";
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

EstimateResult estimate_k(const pinn::ForwardProblem& problem,
                          const ThermographSet& thermographs, const EstimateOptions& options,
                          const pinn::StepCallback& inner_callback,
                          const OuterCallback& outer_callback) {
  const physics::Scaler& scaler = problem.scaler;
  thermographs.validate(scaler.t_total);
  const InverseConfig& inv = options.inverse;
  if (inv.max_outer < 1) throw std::invalid_argument("estimate_k: max_outer must be >= 1");
  if (inv.convergence_window < 1) {
    throw std::invalid_argument("estimate_k: convergence_window must be >= 1");
  }

  Rng root(options.seed);
  Rng init_rng = root.child(0);
  Rng sample_rng = root.child(1);

  EstimateResult result;
  result.params = net::glorot_init(options.layer_sizes, init_rng);
  net::AdamOptimizer net_adam(result.params, net::AdamConfig{});
  net::ScalarAdam k_adam(inv.k_adam);
  pinn::Trainer trainer(problem, options.train);

  double k_hat = scaler.redim_k(0.5);
  KTrace& trace = result.trace;
  trace.k0 = k_hat;

  int consecutive_stalls = 0;
  for (int outer = 1; outer <= inv.max_outer; ++outer) {
    const pinn::TrainResult inner =
        trainer.train_inner(result.params, net_adam, k_hat, sample_rng, inner_callback);
    result.total_inner_steps += inner.steps;
    if (!inner.converged) {
      ++consecutive_stalls;
      if (consecutive_stalls >= inv.max_consecutive_stalls) {
        trace.stop_reason = "inner_stall";
        trace.converged = false;
        return result;
      }
    } else {
      consecutive_stalls = 0;
    }

    const KStep step = step_k(result.params, thermographs, scaler, k_hat, k_adam);
    k_hat = step.k_new_dim;
    // The network optimizer restarts against the shifted objective; the
    // weights stay warm.
    net_adam.reset();

    KTraceEntry entry;
    entry.outer_iter = outer;
    entry.k_hat = k_hat;
    entry.loss_tc = loss_tc(result.params, thermographs, scaler, k_hat);
    entry.inner_steps = inner.steps;
    trace.entries.push_back(entry);
    if (outer_callback) outer_callback(entry);

    const int window = inv.convergence_window;
    if (static_cast<int>(trace.entries.size()) > window) {
      const double k_past = trace.entries[trace.entries.size() - 1 - window].k_hat;
      const double rel = std::abs(k_hat - k_past) / std::max(std::abs(k_past), 1e-12);
      if (rel < inv.convergence_rel_tol) {
        trace.converged = true;
        trace.stop_reason = "converged";
        return result;
      }
    }
  }
  trace.converged = false;
  trace.stop_reason = "max_outer";
  return result;
}

}  // namespace walltherm::inverse
