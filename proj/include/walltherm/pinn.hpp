#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>

#include "walltherm/net.hpp"
#include "walltherm/physics.hpp"
#include "walltherm/rng.hpp"
#include "walltherm/weather.hpp"

namespace walltherm::pinn {

// Everything the residuals need, in nondimensional form: the wall, the
// forcing window and the affine scaling that ties them together.
struct ForwardProblem {
  physics::WallSpec wall;
  weather::EnvSeries env;
  physics::Scaler scaler;

  double theta_in() const { return scaler.nondim_temp(env.indoor.temp_in); }
  double theta_solair(double tau) const {
    return scaler.nondim_temp(env.at(scaler.redim_time(tau)).solair_temp);
  }
  double h_out_at(double tau) const { return env.at(scaler.redim_time(tau)).h_out; }

  // The PDE reads U_tau = k * pde_coeff_per_k() * U_xi_xi with k in W/(m K).
  double pde_coeff_per_k() const {
    return scaler.t_total /
           (wall.heat_capacity_cp * wall.density_rho * scaler.thickness_b * scaler.thickness_b);
  }

  // Scaled steady profile matched to the forcing at tau = 0 for a candidate
  // conductivity; the initial condition the network is trained against.
  std::function<double(double)> steady_theta0(double k_dim) const;
};

ForwardProblem make_problem(const physics::WallSpec& wall, const weather::EnvSeries& env,
                            const physics::Scaler& scaler);

// Pointwise residuals in scaled units (exposed for verification).
double pde_residual(const net::Jet2& jet, double k_dim, double coeff_per_k);
double bc_out_residual(const net::Jet2& jet, double theta_solair, double k_dim,
                       double h_out_value, double thickness_b);
double bc_in_residual(const net::Jet2& jet, double theta_in, double k_dim, double h_in,
                      double thickness_b);

struct TrainConfig {
  int n_pde = 2048;
  int n_bc = 256;     // per face
  int n_ic_xi = 101;  // equally spaced xi positions at tau = 0
  std::array<double, 3> ic_k_factors = {0.95, 1.0, 1.05};
  double k_sample_std = 0.01;  // nondimensional; 0 trains at the exact estimate

  double threshold_pde = 1e-4;
  double threshold_bc_out = 1e-4;
  double threshold_bc_in = 1e-4;
  double threshold_ic = 1e-4;
  std::int64_t max_steps = 20000;  // per train_inner call
  // Once a call has taken at least one step it trains on until the losses sit
  // this far below the thresholds, so batch noise does not retrigger training
  // on the very next call.
  double stop_margin = 0.5;

  int weight_update_interval = 1000;
  double weight_ema_alpha = 0.9;
};

// Columns are (tau, xi, kappa).
struct CollocationBatch {
  Eigen::Matrix3Xd pde, bc_out, bc_in, ic;
};

// Interior and boundary points draw tau, xi uniformly; kappa follows a
// truncated normal around the current estimate. Initial-condition points sit
// at tau = 0 on an even xi grid for three conductivities around the estimate.
CollocationBatch sample_collocation(const TrainConfig& config, const physics::Scaler& scaler,
                                    double k_hat_dim, Rng& rng);

struct LossValues {
  double pde = 0.0;
  double bc_out = 0.0;
  double bc_in = 0.0;
  double ic = 0.0;

  bool all_below(const TrainConfig& config, double factor = 1.0) const {
    return pde < factor * config.threshold_pde && bc_out < factor * config.threshold_bc_out &&
           bc_in < factor * config.threshold_bc_in && ic < factor * config.threshold_ic;
  }
};

struct LossWeights {
  double pde = 1.0;
  double bc_out = 1.0;
  double bc_in = 1.0;
  double ic = 1.0;
};

// Mean squared residual per category (value-only evaluation paths).
double loss_pde(const net::NetParams& params, const Eigen::Matrix3Xd& points,
                const ForwardProblem& problem);
double loss_bc_out(const net::NetParams& params, const Eigen::Matrix3Xd& points,
                   const ForwardProblem& problem);
double loss_bc_in(const net::NetParams& params, const Eigen::Matrix3Xd& points,
                  const ForwardProblem& problem);
double loss_ic(const net::NetParams& params, const Eigen::Matrix3Xd& points,
               const std::function<double(double)>& theta0);

LossValues eval_losses(const net::NetParams& params, const CollocationBatch& batch,
                       const ForwardProblem& problem,
                       const std::function<double(double)>& theta0);

struct StepRecord {
  std::int64_t global_step = 0;
  LossValues losses;
  LossWeights weights;
  double learning_rate = 0.0;
};
using StepCallback = std::function<void(const StepRecord&)>;

struct TrainResult {
  bool converged = false;
  std::int64_t steps = 0;  // optimizer steps taken by this call
  LossValues train_losses;
  LossValues validation_losses;  // fresh-batch confirmation, valid when converged
};

// Inner optimization of the network at a fixed conductivity estimate. Loss
// weights are rebalanced from per-category gradient norms on a fixed cadence
// of the cumulative step counter, which (like the weights) survives across
// calls; the Adam moments are owned by the caller.
class Trainer {
 public:
  Trainer(ForwardProblem problem, TrainConfig config);

  TrainResult train_inner(net::NetParams& params, net::AdamOptimizer& adam,
                          double k_hat_dim, Rng& rng, const StepCallback& callback = {});

  // Losses on a freshly sampled batch without touching the parameters.
  LossValues evaluate(const net::NetParams& params, double k_hat_dim, Rng& rng);

  const ForwardProblem& problem() const { return problem_; }
  const TrainConfig& config() const { return config_; }
  const LossWeights& weights() const { return weights_; }
  std::int64_t global_step() const { return global_step_; }

 private:
  LossValues forward_batch(const net::NetParams& params, const CollocationBatch& batch,
                           const std::function<double(double)>& theta0);

  ForwardProblem problem_;
  TrainConfig config_;
  LossWeights weights_;
  std::int64_t global_step_ = 0;

  net::JetEvaluator eval_pde_, eval_bc_out_, eval_bc_in_, eval_ic_;
  net::JetBatch seeds_pde_, seeds_bc_out_, seeds_bc_in_, seeds_ic_;
  net::NetParams grad_total_;
  std::array<net::NetParams, 4> grad_cats_;
  bool grads_ready_ = false;
};

}  // namespace walltherm::pinn
