#include "walltherm/pinn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace walltherm::pinn {
namespace {

using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;

RowArray k_dim_row(const Eigen::Matrix3Xd& points, const physics::Scaler& scaler) {
  return scaler.k_min + points.row(2).array() * (scaler.k_max - scaler.k_min);
}

struct PdeTerms {
  RowArray residual;
  RowArray coeff;  // multiplies U_xi_xi in the residual
};

PdeTerms pde_terms(const net::JetBatch& jets, const Eigen::Matrix3Xd& points,
                   const ForwardProblem& problem) {
  PdeTerms t;
  t.coeff = k_dim_row(points, problem.scaler) * problem.pde_coeff_per_k();
  t.residual = jets.d_tau.array() - t.coeff * jets.d_xi_xi.array();
  return t;
}

struct BcTerms {
  RowArray residual;
  RowArray coeff;        // multiplies U_xi in the residual
  double value_sign = 1.0;  // sign of U in the residual
};

BcTerms bc_out_terms(const net::JetBatch& jets, const Eigen::Matrix3Xd& points,
                     const ForwardProblem& problem) {
  const Eigen::Index n = points.cols();
  BcTerms t;
  t.value_sign = 1.0;
  t.coeff.resize(n);
  RowArray theta_sa(n);
  const RowArray k_dim = k_dim_row(points, problem.scaler);
  for (Eigen::Index j = 0; j < n; ++j) {
    const weather::EnvPoint p = problem.env.at(problem.scaler.redim_time(points(0, j)));
    theta_sa(j) = problem.scaler.nondim_temp(p.solair_temp);
    t.coeff(j) = k_dim(j) / (problem.scaler.thickness_b * p.h_out);
  }
  t.residual = (jets.value.array() - theta_sa) - t.coeff * jets.d_xi.array();
  return t;
}

BcTerms bc_in_terms(const net::JetBatch& jets, const Eigen::Matrix3Xd& points,
                    const ForwardProblem& problem) {
  BcTerms t;
  t.value_sign = -1.0;
  t.coeff = k_dim_row(points, problem.scaler) /
            (problem.scaler.thickness_b * problem.env.indoor.h_in);
  t.residual = (problem.theta_in() - jets.value.array()) - t.coeff * jets.d_xi.array();
  return t;
}

RowArray ic_residual_row(const net::JetBatch& jets, const Eigen::Matrix3Xd& points,
                         const std::function<double(double)>& theta0) {
  const Eigen::Index n = points.cols();
  RowArray target(n);
  for (Eigen::Index j = 0; j < n; ++j) target(j) = theta0(points(1, j));
  return jets.value.array() - target;
}

double mean_square(const RowArray& r) { return r.square().mean(); }

}  // namespace

std::function<double(double)> ForwardProblem::steady_theta0(double k_dim) const {
  physics::WallSpec candidate = wall;
  candidate.conductivity_k = k_dim;
  const weather::EnvPoint p = env.at(0.0);
  const physics::SteadyProfile profile = physics::steady_profile(
      candidate, p.solair_temp, env.indoor.temp_in, p.h_out, env.indoor.h_in);
  const physics::Scaler s = scaler;
  return [profile, s](double xi) { return s.nondim_temp(profile(s.redim_pos(xi))); };
}

ForwardProblem make_problem(const physics::WallSpec& wall, const weather::EnvSeries& env,
                            const physics::Scaler& scaler) {
  wall.validate();
  env.indoor.validate();
  scaler.validate();
  if (std::abs(scaler.t_total - env.duration) > 1e-6 * env.duration) {
    throw std::invalid_argument("make_problem: scaler t_total must match env duration");
  }
  if (std::abs(scaler.thickness_b - wall.thickness_b) > 0.0) {
    throw std::invalid_argument("make_problem: scaler thickness must match the wall");
  }
  return ForwardProblem{wall, env, scaler};
}

double pde_residual(const net::Jet2& jet, double k_dim, double coeff_per_k) {
  return jet.d_tau - k_dim * coeff_per_k * jet.d_xi_xi;
}

double bc_out_residual(const net::Jet2& jet, double theta_solair, double k_dim,
                       double h_out_value, double thickness_b) {
  return (jet.value - theta_solair) - k_dim / (thickness_b * h_out_value) * jet.d_xi;
}

double bc_in_residual(const net::Jet2& jet, double theta_in, double k_dim, double h_in,
                      double thickness_b) {
  return (theta_in - jet.value) - k_dim / (thickness_b * h_in) * jet.d_xi;
}

CollocationBatch sample_collocation(const TrainConfig& config, const physics::Scaler& scaler,
                                    double k_hat_dim, Rng& rng) {
  if (config.n_pde < 1 || config.n_bc < 1 || config.n_ic_xi < 2) {
    throw std::invalid_argument("sample_collocation: batch sizes too small");
  }
  const double kappa_hat = scaler.nondim_k(k_hat_dim);
  const double kappa_clamped = std::min(std::max(kappa_hat, 0.0), 1.0);
  const auto draw_kappa = [&]() {
    if (config.k_sample_std <= 0.0) return kappa_clamped;
    return rng.truncated_normal(kappa_hat, config.k_sample_std, 0.0, 1.0);
  };

  CollocationBatch batch;
  batch.pde.resize(3, config.n_pde);
  for (int j = 0; j < config.n_pde; ++j) {
    batch.pde(0, j) = rng.uniform01();
    batch.pde(1, j) = rng.uniform01();
    batch.pde(2, j) = draw_kappa();
  }
  batch.bc_out.resize(3, config.n_bc);
  for (int j = 0; j < config.n_bc; ++j) {
    batch.bc_out(0, j) = rng.uniform01();
    batch.bc_out(1, j) = 0.0;
    batch.bc_out(2, j) = draw_kappa();
  }
  batch.bc_in.resize(3, config.n_bc);
  for (int j = 0; j < config.n_bc; ++j) {
    batch.bc_in(0, j) = rng.uniform01();
    batch.bc_in(1, j) = 1.0;
    batch.bc_in(2, j) = draw_kappa();
  }
  batch.ic.resize(3, static_cast<Eigen::Index>(config.ic_k_factors.size()) * config.n_ic_xi);
  Eigen::Index col = 0;
  for (double factor : config.ic_k_factors) {
    const double k_dim = std::clamp(factor * k_hat_dim, scaler.k_min, scaler.k_max);
    const double kappa = scaler.nondim_k(k_dim);
    for (int j = 0; j < config.n_ic_xi; ++j) {
      batch.ic(0, col) = 0.0;
      batch.ic(1, col) = static_cast<double>(j) / (config.n_ic_xi - 1);
      batch.ic(2, col) = kappa;
      ++col;
    }
  }
  return batch;
}

double loss_pde(const net::NetParams& params, const Eigen::Matrix3Xd& points,
                const ForwardProblem& problem) {
  net::JetEvaluator eval;
  return mean_square(pde_terms(eval.forward(params, points), points, problem).residual);
}

double loss_bc_out(const net::NetParams& params, const Eigen::Matrix3Xd& points,
                   const ForwardProblem& problem) {
  net::JetEvaluator eval;
  return mean_square(bc_out_terms(eval.forward(params, points), points, problem).residual);
}

double loss_bc_in(const net::NetParams& params, const Eigen::Matrix3Xd& points,
                  const ForwardProblem& problem) {
  net::JetEvaluator eval;
  return mean_square(bc_in_terms(eval.forward(params, points), points, problem).residual);
}

double loss_ic(const net::NetParams& params, const Eigen::Matrix3Xd& points,
               const std::function<double(double)>& theta0) {
  net::JetEvaluator eval;
  return mean_square(ic_residual_row(eval.forward(params, points), points, theta0));
}

LossValues eval_losses(const net::NetParams& params, const CollocationBatch& batch,
                       const ForwardProblem& problem,
                       const std::function<double(double)>& theta0) {
  LossValues values;
  values.pde = loss_pde(params, batch.pde, problem);
  values.bc_out = loss_bc_out(params, batch.bc_out, problem);
  values.bc_in = loss_bc_in(params, batch.bc_in, problem);
  values.ic = loss_ic(params, batch.ic, theta0);
  return values;
}

Trainer::Trainer(ForwardProblem problem, TrainConfig config)
    : problem_(std::move(problem)), config_(config) {
  if (config_.max_steps < 1) throw std::invalid_argument("Trainer: max_steps must be >= 1");
  if (config_.weight_update_interval < 1) {
    throw std::invalid_argument("Trainer: weight_update_interval must be >= 1");
  }
}

LossValues Trainer::forward_batch(const net::NetParams& params, const CollocationBatch& batch,
                                  const std::function<double(double)>& theta0) {
  net::JetEvaluator eval;
  LossValues v;
  v.pde = mean_square(pde_terms(eval.forward(params, batch.pde), batch.pde, problem_).residual);
  v.bc_out = mean_square(
      bc_out_terms(eval.forward(params, batch.bc_out), batch.bc_out, problem_).residual);
  v.bc_in = mean_square(
      bc_in_terms(eval.forward(params, batch.bc_in), batch.bc_in, problem_).residual);
  v.ic = mean_square(ic_residual_row(eval.forward(params, batch.ic), batch.ic, theta0));
  return v;
}

TrainResult Trainer::train_inner(net::NetParams& params, net::AdamOptimizer& adam,
                                 double k_hat_dim, Rng& rng, const StepCallback& callback) {
  if (!grads_ready_ || grad_total_.layer_sizes != params.layer_sizes) {
    grad_total_ = net::NetParams::zeros_like(params);
    for (auto& g : grad_cats_) g = net::NetParams::zeros_like(params);
    grads_ready_ = true;
  }
  const auto theta0 = problem_.steady_theta0(k_hat_dim);

  TrainResult result;
  for (std::int64_t it = 0; it < config_.max_steps; ++it) {
    const CollocationBatch batch = sample_collocation(config_, problem_.scaler, k_hat_dim, rng);

    const net::JetBatch& jets_pde = eval_pde_.forward(params, batch.pde);
    const net::JetBatch& jets_bc_out = eval_bc_out_.forward(params, batch.bc_out);
    const net::JetBatch& jets_bc_in = eval_bc_in_.forward(params, batch.bc_in);
    const net::JetBatch& jets_ic = eval_ic_.forward(params, batch.ic);

    const PdeTerms t_pde = pde_terms(jets_pde, batch.pde, problem_);
    const BcTerms t_bc_out = bc_out_terms(jets_bc_out, batch.bc_out, problem_);
    const BcTerms t_bc_in = bc_in_terms(jets_bc_in, batch.bc_in, problem_);
    const RowArray r_ic = ic_residual_row(jets_ic, batch.ic, theta0);

    result.train_losses = LossValues{mean_square(t_pde.residual), mean_square(t_bc_out.residual),
                                     mean_square(t_bc_in.residual), mean_square(r_ic)};

    const double factor = result.steps == 0 ? 1.0 : config_.stop_margin;
    if (result.train_losses.all_below(config_, factor)) {
      const CollocationBatch fresh = sample_collocation(config_, problem_.scaler, k_hat_dim, rng);
      const LossValues val = forward_batch(params, fresh, theta0);
      if (val.all_below(config_, factor)) {
        result.converged = true;
        result.validation_losses = val;
        return result;
      }
    }

    // d(mean r^2)/d(channel) seeds; `scale` folds in the category weight.
    const auto seed_pde = [&](net::JetBatch& seeds, double scale) {
      const double f = 2.0 * scale / static_cast<double>(t_pde.residual.size());
      seeds.set_zero(t_pde.residual.size());
      seeds.d_tau = (f * t_pde.residual).matrix();
      seeds.d_xi_xi = (-f * t_pde.coeff * t_pde.residual).matrix();
    };
    const auto seed_bc = [&](const BcTerms& t, net::JetBatch& seeds, double scale) {
      const double f = 2.0 * scale / static_cast<double>(t.residual.size());
      seeds.set_zero(t.residual.size());
      seeds.value = (t.value_sign * f * t.residual).matrix();
      seeds.d_xi = (-f * t.coeff * t.residual).matrix();
    };
    const auto seed_ic = [&](net::JetBatch& seeds, double scale) {
      const double f = 2.0 * scale / static_cast<double>(r_ic.size());
      seeds.set_zero(r_ic.size());
      seeds.value = (f * r_ic).matrix();
    };

    ++global_step_;
    grad_total_.set_zero();
    const bool rebalance = config_.weight_update_interval == 1 ||
                           global_step_ % config_.weight_update_interval == 1;
    if (rebalance) {
      for (auto& g : grad_cats_) g.set_zero();
      seed_pde(seeds_pde_, 1.0);
      eval_pde_.backward(params, seeds_pde_, grad_cats_[0]);
      seed_bc(t_bc_out, seeds_bc_out_, 1.0);
      eval_bc_out_.backward(params, seeds_bc_out_, grad_cats_[1]);
      seed_bc(t_bc_in, seeds_bc_in_, 1.0);
      eval_bc_in_.backward(params, seeds_bc_in_, grad_cats_[2]);
      seed_ic(seeds_ic_, 1.0);
      eval_ic_.backward(params, seeds_ic_, grad_cats_[3]);

      double norms[4];
      double total = 0.0;
      for (int i = 0; i < 4; ++i) {
        norms[i] = std::sqrt(grad_cats_[i].squared_norm());
        total += norms[i];
      }
      double* lambdas[4] = {&weights_.pde, &weights_.bc_out, &weights_.bc_in, &weights_.ic};
      const double alpha = config_.weight_ema_alpha;
      for (int i = 0; i < 4; ++i) {
        if (norms[i] > 0.0) {
          *lambdas[i] = alpha * *lambdas[i] + (1.0 - alpha) * (total / norms[i]);
        }
      }
      net::axpy(weights_.pde, grad_cats_[0], grad_total_);
      net::axpy(weights_.bc_out, grad_cats_[1], grad_total_);
      net::axpy(weights_.bc_in, grad_cats_[2], grad_total_);
      net::axpy(weights_.ic, grad_cats_[3], grad_total_);
    } else {
      seed_pde(seeds_pde_, weights_.pde);
      eval_pde_.backward(params, seeds_pde_, grad_total_);
      seed_bc(t_bc_out, seeds_bc_out_, weights_.bc_out);
      eval_bc_out_.backward(params, seeds_bc_out_, grad_total_);
      seed_bc(t_bc_in, seeds_bc_in_, weights_.bc_in);
      eval_bc_in_.backward(params, seeds_bc_in_, grad_total_);
      seed_ic(seeds_ic_, weights_.ic);
      eval_ic_.backward(params, seeds_ic_, grad_total_);
    }

    adam.step(params, grad_total_);
    ++result.steps;
    if (callback) {
      callback(StepRecord{global_step_, result.train_losses, weights_,
                          net::decayed_lr(adam.config(), adam.step_count())});
    }
  }
  result.converged = false;
  return result;
}

LossValues Trainer::evaluate(const net::NetParams& params, double k_hat_dim, Rng& rng) {
  const CollocationBatch batch = sample_collocation(config_, problem_.scaler, k_hat_dim, rng);
  return forward_batch(params, batch, problem_.steady_theta0(k_hat_dim));
}

}  // namespace walltherm::pinn
