#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "walltherm/fvm.hpp"
#include "walltherm/net.hpp"
#include "walltherm/pinn.hpp"

namespace walltherm::inverse {

// Measured outer-surface temperatures; times relative to the window start.
struct ThermographSet {
  std::vector<fvm::Thermograph> entries;

  // Nonempty, strictly increasing, inside [0, t_total]; throws DataError.
  void validate(double t_total) const;
};

ThermographSet read_thermograph_csv(const std::string& path);
void write_thermograph_csv(const ThermographSet& set, const std::string& path,
                           std::int64_t t0_epoch);

// Mean squared mismatch between the scaled network surface prediction at the
// capture times and the scaled measurements, at conductivity k_hat_dim.
double loss_tc(const net::NetParams& params, const ThermographSet& thermographs,
               const physics::Scaler& scaler, double k_hat_dim);

struct KStep {
  double k_new_dim = 0.0;
  double loss_before = 0.0;     // loss_tc at the estimate the gradient was taken at
  double dloss_dkappa = 0.0;
};

// One optimizer step on the conductivity estimate through the measurement
// loss; the updated estimate is clamped to the scaler's range.
KStep step_k(const net::NetParams& params, const ThermographSet& thermographs,
             const physics::Scaler& scaler, double k_hat_dim, net::ScalarAdam& adam);

struct KTraceEntry {
  int outer_iter = 0;
  double k_hat = 0.0;       // after this iteration's update
  double loss_tc = 0.0;     // at the updated estimate
  std::int64_t inner_steps = 0;
};

struct KTrace {
  double k0 = 0.0;
  std::vector<KTraceEntry> entries;
  bool converged = false;
  std::string stop_reason;  // "converged", "max_outer", "inner_stall"

  double k_hat_final() const { return entries.empty() ? k0 : entries.back().k_hat; }
};

void write_ktrace_csv(const KTrace& trace, const std::string& path);

struct InverseConfig {
  net::AdamConfig k_adam;   // shares the network optimizer defaults
  int max_outer = 200;
  int convergence_window = 10;
  double convergence_rel_tol = 1e-3;
  int max_consecutive_stalls = 3;  // inner loops ending at max_steps in a row
};

struct EstimateOptions {
  std::vector<int> layer_sizes = {3, 64, 64, 64, 64, 1};
  pinn::TrainConfig train;
  InverseConfig inverse;
  std::uint64_t seed = 1;
};

using OuterCallback = std::function<void(const KTraceEntry&)>;

struct EstimateResult {
  KTrace trace;
  net::NetParams params;  // network at the final estimate
  std::int64_t total_inner_steps = 0;
};

// Alternates inner network training at the current estimate with one
// conductivity step through the measurement loss, resetting the network
// optimizer state (not the weights) after each conductivity update. Starts
// from the midpoint of the conductivity range.
EstimateResult estimate_k(const pinn::ForwardProblem& problem,
                          const ThermographSet& thermographs, const EstimateOptions& options,
                          const pinn::StepCallback& inner_callback = {},
                          const OuterCallback& outer_callback = {});

}  // namespace walltherm::inverse
