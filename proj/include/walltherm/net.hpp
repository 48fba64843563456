#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "walltherm/rng.hpp"

namespace walltherm::net {

// Fully connected tanh network; the last layer is affine. Inputs are the
// nondimensional (tau, xi, kappa), the output approximates the scaled
// temperature field.
struct NetParams {
  std::vector<int> layer_sizes;            // e.g. {3, 256, 256, 256, 256, 1}
  std::vector<Eigen::MatrixXd> weights;    // weights[l] is (out x in)
  std::vector<Eigen::VectorXd> biases;

  static NetParams zeros(const std::vector<int>& layer_sizes);
  static NetParams zeros_like(const NetParams& other);

  std::int64_t parameter_count() const;
  void set_zero();
  double squared_norm() const;
};

// y += alpha * x (matching shapes required).
void axpy(double alpha, const NetParams& x, NetParams& y);
void scale(NetParams& x, double alpha);

// Glorot uniform weights, zero biases; deterministic in the generator state.
NetParams glorot_init(const std::vector<int>& layer_sizes, Rng& rng);

// Second-order jet of the network output at one point: the value and its
// derivatives with respect to the first two inputs.
struct Jet2 {
  double value = 0.0;
  double d_tau = 0.0;
  double d_xi = 0.0;
  double d_xi_xi = 0.0;
};

Jet2 forward_jet(const NetParams& params, double tau, double xi, double kappa);
double forward_value(const NetParams& params, double tau, double xi, double kappa);

struct ValueAndKGrad {
  double value = 0.0;
  double d_kappa = 0.0;
};
// Value and derivative with respect to the conductivity input.
ValueAndKGrad forward_value_dk(const NetParams& params, double tau, double xi,
                               double kappa);

// One channel per derivative slot, one column per collocation point.
struct JetBatch {
  Eigen::RowVectorXd value, d_tau, d_xi, d_xi_xi;

  Eigen::Index size() const { return value.size(); }
  void set_zero(Eigen::Index n);
};

// Batched jet propagation with an exact adjoint. forward() retains the tape
// needed by backward(); the evaluator reuses its buffers across calls, so
// keep one instance per batch shape for allocation-free steady state.
class JetEvaluator {
 public:
  // inputs: 3 x B with rows (tau, xi, kappa).
  const JetBatch& forward(const NetParams& params, const Eigen::Matrix3Xd& inputs);
  const JetBatch& outputs() const { return out_; }

  // Accumulates d(seeded scalar)/d(params) into grad, where the scalar is
  // sum_j seeds.value[j]*value[j] + seeds.d_tau[j]*d_tau[j] + ... over the
  // forward batch. Requires a preceding forward() with the same params.
  void backward(const NetParams& params, const JetBatch& seeds, NetParams& grad);

 private:
  struct Channels {
    Eigen::MatrixXd val, dt, dx, dxx;
  };
  std::vector<Channels> acts_;  // acts_[0] holds the inputs
  std::vector<Channels> pre_;   // hidden-layer pre-activation derivative channels
  JetBatch out_;
  // adjoint workspaces
  Channels gpost_, gpre_;
};

// Value-only batched pass. Performs the same matrix products on the value
// channel as the jet pass, so the two agree bitwise.
Eigen::RowVectorXd forward_values(const NetParams& params, const Eigen::Matrix3Xd& inputs);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double decay_rate = 0.9;   // multiplicative decay per decay_steps
  double decay_steps = 2000;
};

// learning_rate * decay_rate^(step / decay_steps), continuous exponent.
double decayed_lr(const AdamConfig& config, std::int64_t step);

class AdamOptimizer {
 public:
  AdamOptimizer(const NetParams& reference, const AdamConfig& config);

  void step(NetParams& params, const NetParams& grad);
  // Clears moments and the step counter; parameters are left untouched.
  void reset();

  std::int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  NetParams m_, v_;
  std::int64_t step_ = 0;
};

class ScalarAdam {
 public:
  explicit ScalarAdam(const AdamConfig& config) : config_(config) {}

  double step(double value, double grad);
  void reset();

  std::int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  double m_ = 0.0;
  double v_ = 0.0;
  std::int64_t step_ = 0;
};

// Versioned JSON checkpoints; values round-trip exactly.
void save_params(const NetParams& params, const std::string& path);
NetParams load_params(const std::string& path);

}  // namespace walltherm::net
