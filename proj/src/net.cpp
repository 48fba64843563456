#include "walltherm/net.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "walltherm/errors.hpp"

namespace walltherm::net {
namespace {

void check_layer_sizes(const std::vector<int>& layer_sizes) {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("layer_sizes needs at least input and output");
  }
  for (int n : layer_sizes) {
    if (n < 1) throw std::invalid_argument("layer sizes must be positive");
  }
  if (layer_sizes.front() != 3) {
    throw std::invalid_argument("the network takes 3 inputs (tau, xi, kappa)");
  }
  if (layer_sizes.back() != 1) {
    throw std::invalid_argument("the network has a single output");
  }
}

// tanh through exp is noticeably faster than the libm call when vectorized
// and saturates to exactly +-1.
template <typename Derived>
auto tanh_expr(const Eigen::ArrayBase<Derived>& z) {
  return 1.0 - 2.0 / ((2.0 * z).exp() + 1.0);
}

}  // namespace

NetParams NetParams::zeros(const std::vector<int>& layer_sizes) {
  check_layer_sizes(layer_sizes);
  NetParams p;
  p.layer_sizes = layer_sizes;
  const size_t n_layers = layer_sizes.size() - 1;
  p.weights.reserve(n_layers);
  p.biases.reserve(n_layers);
  for (size_t l = 0; l < n_layers; ++l) {
    p.weights.emplace_back(Eigen::MatrixXd::Zero(layer_sizes[l + 1], layer_sizes[l]));
    p.biases.emplace_back(Eigen::VectorXd::Zero(layer_sizes[l + 1]));
  }
  return p;
}

NetParams NetParams::zeros_like(const NetParams& other) {
  return zeros(other.layer_sizes);
}

std::int64_t NetParams::parameter_count() const {
  std::int64_t count = 0;
  for (size_t l = 0; l < weights.size(); ++l) {
    count += weights[l].size() + biases[l].size();
  }
  return count;
}

void NetParams::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

double NetParams::squared_norm() const {
  double total = 0.0;
  for (const auto& w : weights) total += w.squaredNorm();
  for (const auto& b : biases) total += b.squaredNorm();
  return total;
}

void axpy(double alpha, const NetParams& x, NetParams& y) {
  for (size_t l = 0; l < y.weights.size(); ++l) {
    y.weights[l] += alpha * x.weights[l];
    y.biases[l] += alpha * x.biases[l];
  }
}

void scale(NetParams& x, double alpha) {
  for (auto& w : x.weights) w *= alpha;
  for (auto& b : x.biases) b *= alpha;
}

NetParams glorot_init(const std::vector<int>& layer_sizes, Rng& rng) {
  NetParams p = NetParams::zeros(layer_sizes);
  for (size_t l = 0; l < p.weights.size(); ++l) {
    auto& w = p.weights[l];
    const double limit = std::sqrt(6.0 / (w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        w(i, j) = rng.uniform(-limit, limit);
      }
    }
  }
  return p;
}

Jet2 forward_jet(const NetParams& params, double tau, double xi, double kappa) {
  Eigen::VectorXd a(3), at(3), ax(3);
  a << tau, xi, kappa;
  at << 1, 0, 0;
  ax << 0, 1, 0;
  Eigen::VectorXd axx = Eigen::VectorXd::Zero(3);
  const size_t n_layers = params.weights.size();
  for (size_t l = 0; l < n_layers; ++l) {
    const auto& w = params.weights[l];
    Eigen::VectorXd z = w * a + params.biases[l];
    Eigen::VectorXd zt = w * at;
    Eigen::VectorXd zx = w * ax;
    Eigen::VectorXd zxx = w * axx;
    if (l + 1 == n_layers) {
      return Jet2{z(0), zt(0), zx(0), zxx(0)};
    }
    const Eigen::ArrayXd u = tanh_expr(z.array());
    const Eigen::ArrayXd s = 1.0 - u.square();
    a = u.matrix();
    at = (s * zt.array()).matrix();
    ax = (s * zx.array()).matrix();
    axx = (s * zxx.array() - 2.0 * u * s * zx.array().square()).matrix();
  }
  throw std::logic_error("unreachable");
}

double forward_value(const NetParams& params, double tau, double xi, double kappa) {
  Eigen::VectorXd a(3);
  a << tau, xi, kappa;
  const size_t n_layers = params.weights.size();
  for (size_t l = 0; l < n_layers; ++l) {
    Eigen::VectorXd z = params.weights[l] * a + params.biases[l];
    if (l + 1 == n_layers) return z(0);
    a = tanh_expr(z.array()).matrix();
  }
  throw std::logic_error("unreachable");
}

ValueAndKGrad forward_value_dk(const NetParams& params, double tau, double xi,
                               double kappa) {
  Eigen::VectorXd a(3), ak(3);
  a << tau, xi, kappa;
  ak << 0, 0, 1;
  const size_t n_layers = params.weights.size();
  for (size_t l = 0; l < n_layers; ++l) {
    const auto& w = params.weights[l];
    Eigen::VectorXd z = w * a + params.biases[l];
    Eigen::VectorXd zk = w * ak;
    if (l + 1 == n_layers) return ValueAndKGrad{z(0), zk(0)};
    const Eigen::ArrayXd u = tanh_expr(z.array());
    a = u.matrix();
    ak = ((1.0 - u.square()) * zk.array()).matrix();
  }
  throw std::logic_error("unreachable");
}

void JetBatch::set_zero(Eigen::Index n) {
  value.setZero(n);
  d_tau.setZero(n);
  d_xi.setZero(n);
  d_xi_xi.setZero(n);
}

const JetBatch& JetEvaluator::forward(const NetParams& params,
                                      const Eigen::Matrix3Xd& inputs) {
  const size_t n_layers = params.weights.size();
  const Eigen::Index batch = inputs.cols();
  acts_.resize(n_layers + 1);
  pre_.resize(n_layers);

  auto& in = acts_[0];
  in.val = inputs;
  in.dt.setZero(3, batch);
  in.dt.row(0).setOnes();
  in.dx.setZero(3, batch);
  in.dx.row(1).setOnes();
  in.dxx.setZero(3, batch);

  for (size_t l = 0; l < n_layers; ++l) {
    const auto& w = params.weights[l];
    const auto& prev = acts_[l];
    auto& pre = pre_[l];
    auto& next = acts_[l + 1];

    next.val.noalias() = w * prev.val;
    next.val.colwise() += params.biases[l];
    pre.dt.noalias() = w * prev.dt;
    pre.dx.noalias() = w * prev.dx;
    pre.dxx.noalias() = w * prev.dxx;

    if (l + 1 == n_layers) {
      next.dt = pre.dt;
      next.dx = pre.dx;
      next.dxx = pre.dxx;
      break;
    }
    // tanh jet: u = tanh(z), s = 1 - u^2
    // u_t = s z_t, u_x = s z_x, u_xx = s z_xx - 2 u s z_x^2
    next.val = tanh_expr(next.val.array()).matrix();
    const auto u = next.val.array();
    const auto s = 1.0 - u.square();
    next.dt = (s * pre.dt.array()).matrix();
    next.dx = (s * pre.dx.array()).matrix();
    next.dxx = (s * pre.dxx.array() - 2.0 * u * s * pre.dx.array().square()).matrix();
  }

  const auto& last = acts_[n_layers];
  out_.value = last.val.row(0);
  out_.d_tau = last.dt.row(0);
  out_.d_xi = last.dx.row(0);
  out_.d_xi_xi = last.dxx.row(0);
  return out_;
}

void JetEvaluator::backward(const NetParams& params, const JetBatch& seeds,
                            NetParams& grad) {
  const size_t n_layers = params.weights.size();
  if (acts_.size() != n_layers + 1) {
    throw std::logic_error("JetEvaluator::backward without a matching forward");
  }

  // Adjoints of the last layer's pre-activation channels (it is affine).
  gpre_.val = seeds.value;
  gpre_.dt = seeds.d_tau;
  gpre_.dx = seeds.d_xi;
  gpre_.dxx = seeds.d_xi_xi;

  for (size_t l = n_layers; l-- > 0;) {
    const auto& w = params.weights[l];
    const auto& prev = acts_[l];

    // Parameter gradients: every channel is a linear image of the previous
    // activations under W, only the value channel sees the bias.
    grad.weights[l].noalias() += gpre_.val * prev.val.transpose();
    grad.weights[l].noalias() += gpre_.dt * prev.dt.transpose();
    grad.weights[l].noalias() += gpre_.dx * prev.dx.transpose();
    grad.weights[l].noalias() += gpre_.dxx * prev.dxx.transpose();
    grad.biases[l].noalias() += gpre_.val.rowwise().sum();

    if (l == 0) break;

    gpost_.val.noalias() = w.transpose() * gpre_.val;
    gpost_.dt.noalias() = w.transpose() * gpre_.dt;
    gpost_.dx.noalias() = w.transpose() * gpre_.dx;
    gpost_.dxx.noalias() = w.transpose() * gpre_.dxx;

    // Through tanh of layer l-1's pre-activation (its outputs are acts_[l]).
    const auto u = acts_[l].val.array();
    const auto s = 1.0 - u.square();
    const auto zt = pre_[l - 1].dt.array();
    const auto zx = pre_[l - 1].dx.array();
    const auto zxx = pre_[l - 1].dxx.array();
    const auto gu = gpost_.val.array();
    const auto gut = gpost_.dt.array();
    const auto gux = gpost_.dx.array();
    const auto guxx = gpost_.dxx.array();

    gpre_.val = (gu * s - 2.0 * u * s * (gut * zt + gux * zx + guxx * zxx) -
                 2.0 * s * (s - 2.0 * u.square()) * guxx * zx.square())
                    .matrix();
    gpre_.dt = (gut * s).matrix();
    gpre_.dx = (gux * s - 4.0 * u * s * guxx * zx).matrix();
    gpre_.dxx = (guxx * s).matrix();
  }
}

Eigen::RowVectorXd forward_values(const NetParams& params, const Eigen::Matrix3Xd& inputs) {
  const size_t n_layers = params.weights.size();
  Eigen::MatrixXd a = inputs;
  Eigen::MatrixXd z;
  for (size_t l = 0; l < n_layers; ++l) {
    z.noalias() = params.weights[l] * a;
    z.colwise() += params.biases[l];
    if (l + 1 == n_layers) return z.row(0);
    a = tanh_expr(z.array()).matrix();
  }
  throw std::logic_error("unreachable");
}

double decayed_lr(const AdamConfig& config, std::int64_t step) {
  return config.learning_rate *
         std::pow(config.decay_rate, static_cast<double>(step) / config.decay_steps);
}

AdamOptimizer::AdamOptimizer(const NetParams& reference, const AdamConfig& config)
    : config_(config),
      m_(NetParams::zeros_like(reference)),
      v_(NetParams::zeros_like(reference)) {}

void AdamOptimizer::step(NetParams& params, const NetParams& grad) {
  ++step_;
  const double lr = decayed_lr(config_, step_);
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double eps = config_.epsilon;
  for (size_t l = 0; l < params.weights.size(); ++l) {
    auto mw = m_.weights[l].array();
    auto vw = v_.weights[l].array();
    const auto gw = grad.weights[l].array();
    mw = b1 * mw + (1.0 - b1) * gw;
    vw = b2 * vw + (1.0 - b2) * gw.square();
    params.weights[l].array() -= lr * (mw / bc1) / ((vw / bc2).sqrt() + eps);

    auto mb = m_.biases[l].array();
    auto vb = v_.biases[l].array();
    const auto gb = grad.biases[l].array();
    mb = b1 * mb + (1.0 - b1) * gb;
    vb = b2 * vb + (1.0 - b2) * gb.square();
    params.biases[l].array() -= lr * (mb / bc1) / ((vb / bc2).sqrt() + eps);
  }
}

void AdamOptimizer::reset() {
  m_.set_zero();
  v_.set_zero();
  step_ = 0;
}

double ScalarAdam::step(double value, double grad) {
  ++step_;
  const double lr = decayed_lr(config_, step_);
  m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
  v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad * grad;
  const double mhat = m_ / (1.0 - std::pow(config_.beta1, static_cast<double>(step_)));
  const double vhat = v_ / (1.0 - std::pow(config_.beta2, static_cast<double>(step_)));
  return value - lr * mhat / (std::sqrt(vhat) + config_.epsilon);
}

void ScalarAdam::reset() {
  m_ = 0.0;
  v_ = 0.0;
  step_ = 0;
}

void save_params(const NetParams& params, const std::string& path) {
  nlohmann::json doc;
  doc["format"] = "walltherm-net";
  doc["version"] = 1;
  doc["layer_sizes"] = params.layer_sizes;
  nlohmann::json layers = nlohmann::json::array();
  for (size_t l = 0; l < params.weights.size(); ++l) {
    nlohmann::json layer;
    const auto& w = params.weights[l];
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index j = 0; j < w.cols(); ++j) row.push_back(w(i, j));
      rows.push_back(std::move(row));
    }
    layer["weights"] = std::move(rows);
    nlohmann::json bias = nlohmann::json::array();
    for (Eigen::Index i = 0; i < params.biases[l].size(); ++i) {
      bias.push_back(params.biases[l](i));
    }
    layer["bias"] = std::move(bias);
    layers.push_back(std::move(layer));
  }
  doc["layers"] = std::move(layers);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << doc.dump();
  out << "\n";
  if (!out) throw DataError("failed writing '" + path + "'");
}

NetParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "walltherm-net") {
      throw DataError(path + ": not a walltherm-net checkpoint");
    }
    if (doc.at("version").get<int>() != 1) {
      throw DataError(path + ": unsupported checkpoint version");
    }
    const auto layer_sizes = doc.at("layer_sizes").get<std::vector<int>>();
    NetParams params = NetParams::zeros(layer_sizes);
    const auto& layers = doc.at("layers");
    if (layers.size() != params.weights.size()) {
      throw DataError(path + ": layer count mismatch");
    }
    for (size_t l = 0; l < params.weights.size(); ++l) {
      auto& w = params.weights[l];
      const auto& rows = layers[l].at("weights");
      if (static_cast<Eigen::Index>(rows.size()) != w.rows()) {
        throw DataError(path + ": weight shape mismatch");
      }
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        const auto& row = rows[i];
        if (static_cast<Eigen::Index>(row.size()) != w.cols()) {
          throw DataError(path + ": weight shape mismatch");
        }
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = row[j].get<double>();
      }
      const auto& bias = layers[l].at("bias");
      if (static_cast<Eigen::Index>(bias.size()) != params.biases[l].size()) {
        throw DataError(path + ": bias shape mismatch");
      }
      for (Eigen::Index i = 0; i < params.biases[l].size(); ++i) {
        params.biases[l](i) = bias[i].get<double>();
      }
    }
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": malformed checkpoint: " + e.what());
  }
}

}  // namespace walltherm::net
