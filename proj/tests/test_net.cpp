#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "walltherm/errors.hpp"
#include "walltherm/net.hpp"
#include "walltherm/rng.hpp"

using namespace walltherm;
using namespace walltherm::net;

namespace {

// Single hidden tanh unit reading only xi: value = tanh(2 xi).
NetParams xi_probe_net() {
  NetParams p = NetParams::zeros({3, 1, 1});
  p.weights[0](0, 1) = 2.0;
  p.weights[1](0, 0) = 1.0;
  return p;
}

Eigen::Matrix3Xd random_inputs(int n, Rng& rng) {
  Eigen::Matrix3Xd inputs(3, n);
  for (int j = 0; j < n; ++j) {
    inputs(0, j) = rng.uniform01();
    inputs(1, j) = rng.uniform01();
    inputs(2, j) = rng.uniform01();
  }
  return inputs;
}

}  // namespace

TEST_SUITE("net") {

TEST_CASE("parameter bookkeeping") {
  const NetParams p = NetParams::zeros({3, 256, 256, 256, 256, 1});
  CHECK(p.parameter_count() == 198657);
  CHECK(p.squared_norm() == 0.0);

  const NetParams small = NetParams::zeros({3, 8, 1});
  CHECK(small.parameter_count() == 3 * 8 + 8 + 8 + 1);

  CHECK_THROWS_AS(NetParams::zeros({3}), std::invalid_argument);
  CHECK_THROWS_AS(NetParams::zeros({4, 8, 1}), std::invalid_argument);
  CHECK_THROWS_AS(NetParams::zeros({3, 8, 2}), std::invalid_argument);
  CHECK_THROWS_AS(NetParams::zeros({3, 0, 1}), std::invalid_argument);
}

TEST_CASE("axpy and scale") {
  Rng rng(5);
  NetParams a = glorot_init({3, 4, 1}, rng);
  NetParams b = NetParams::zeros_like(a);
  axpy(2.0, a, b);
  CHECK(b.squared_norm() == doctest::Approx(4.0 * a.squared_norm()).epsilon(1e-14));
  scale(b, 0.5);
  CHECK(b.weights[0] == a.weights[0]);
  CHECK(b.weights[1] == a.weights[1]);
}

TEST_CASE("glorot init stays within the fan bound and is deterministic") {
  Rng rng_a(77);
  Rng rng_b(77);
  const NetParams a = glorot_init({3, 64, 64, 1}, rng_a);
  const NetParams b = glorot_init({3, 64, 64, 1}, rng_b);
  for (size_t l = 0; l < a.weights.size(); ++l) {
    CHECK(a.weights[l] == b.weights[l]);
    CHECK(a.biases[l].isZero(0.0));
    const double limit =
        std::sqrt(6.0 / (a.weights[l].rows() + a.weights[l].cols()));
    CHECK(a.weights[l].cwiseAbs().maxCoeff() <= limit);
    CHECK(a.weights[l].cwiseAbs().maxCoeff() > 0.5 * limit);
    CHECK(std::abs(a.weights[l].mean()) < 0.1 * limit);
  }
}

TEST_CASE("jet of a handcrafted single-unit net") {
  const NetParams p = xi_probe_net();
  const Jet2 jet = forward_jet(p, 0.25, 0.3, 0.7);
  const double t = std::tanh(0.6);
  CHECK(jet.value == doctest::Approx(0.537049566998035).epsilon(1e-13));
  CHECK(jet.d_tau == 0.0);
  CHECK(jet.d_xi == doctest::Approx(1.42315552517445).epsilon(1e-13));
  CHECK(jet.d_xi_xi == doctest::Approx(-3.05722023426319).epsilon(1e-13));
  CHECK(jet.value == doctest::Approx(t).epsilon(1e-14));
  CHECK(jet.d_xi == doctest::Approx(2.0 * (1.0 - t * t)).epsilon(1e-14));
  CHECK(jet.d_xi_xi == doctest::Approx(-8.0 * t * (1.0 - t * t)).epsilon(1e-14));
}

TEST_CASE("conductivity channel derivative") {
  NetParams p = NetParams::zeros({3, 1, 1});
  p.weights[0](0, 2) = 2.0;
  p.weights[1](0, 0) = 1.0;
  const auto vk = forward_value_dk(p, 0.1, 0.9, 0.3);
  const double t = std::tanh(0.6);
  CHECK(vk.value == doctest::Approx(t).epsilon(1e-14));
  CHECK(vk.d_kappa == doctest::Approx(2.0 * (1.0 - t * t)).epsilon(1e-14));
  // finite-difference cross-check
  const double h = 1e-6;
  const double fd = (forward_value(p, 0.1, 0.9, 0.3 + h) -
                     forward_value(p, 0.1, 0.9, 0.3 - h)) / (2.0 * h);
  CHECK(vk.d_kappa == doctest::Approx(fd).epsilon(1e-8));
}

TEST_CASE("jet derivatives agree with central differences") {
  Rng rng(11);
  const NetParams p = glorot_init({3, 16, 16, 1}, rng);
  const double h = 1e-5;
  for (int probe = 0; probe < 20; ++probe) {
    const double tau = rng.uniform01();
    const double xi = rng.uniform01();
    const double kappa = rng.uniform01();
    const Jet2 jet = forward_jet(p, tau, xi, kappa);

    const double fd_tau = (forward_value(p, tau + h, xi, kappa) -
                           forward_value(p, tau - h, xi, kappa)) / (2.0 * h);
    const double fd_xi = (forward_value(p, tau, xi + h, kappa) -
                          forward_value(p, tau, xi - h, kappa)) / (2.0 * h);
    const double fd_xixi = (forward_value(p, tau, xi + h, kappa) -
                            2.0 * forward_value(p, tau, xi, kappa) +
                            forward_value(p, tau, xi - h, kappa)) / (h * h);
    CHECK(jet.d_tau == doctest::Approx(fd_tau).epsilon(1e-6));
    CHECK(jet.d_xi == doctest::Approx(fd_xi).epsilon(1e-6));
    CHECK(jet.d_xi_xi == doctest::Approx(fd_xixi).epsilon(1e-4));
  }
}

TEST_CASE("batched jet matches the pointwise jet") {
  Rng rng(13);
  const NetParams p = glorot_init({3, 12, 12, 1}, rng);
  const Eigen::Matrix3Xd inputs = random_inputs(9, rng);
  JetEvaluator eval;
  const JetBatch& batch = eval.forward(p, inputs);
  REQUIRE(batch.size() == 9);
  for (int j = 0; j < 9; ++j) {
    const Jet2 jet = forward_jet(p, inputs(0, j), inputs(1, j), inputs(2, j));
    CHECK(batch.value(j) == doctest::Approx(jet.value).epsilon(1e-12));
    CHECK(batch.d_tau(j) == doctest::Approx(jet.d_tau).epsilon(1e-12));
    CHECK(batch.d_xi(j) == doctest::Approx(jet.d_xi).epsilon(1e-12));
    CHECK(batch.d_xi_xi(j) == doctest::Approx(jet.d_xi_xi).epsilon(1e-12));
  }
}

TEST_CASE("value-only pass is bit-identical to the jet value channel") {
  Rng rng(17);
  const NetParams p = glorot_init({3, 32, 32, 1}, rng);
  const Eigen::Matrix3Xd inputs = random_inputs(40, rng);
  JetEvaluator eval;
  const JetBatch& batch = eval.forward(p, inputs);
  const Eigen::RowVectorXd values = forward_values(p, inputs);
  REQUIRE(values.size() == batch.value.size());
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    CHECK(values(j) == batch.value(j));
  }
}

TEST_CASE("adjoint gradient matches finite differences") {
  Rng rng(19);
  NetParams p = glorot_init({3, 5, 4, 1}, rng);
  const Eigen::Matrix3Xd inputs = random_inputs(7, rng);

  JetBatch seeds;
  seeds.set_zero(7);
  for (int j = 0; j < 7; ++j) {
    seeds.value(j) = rng.uniform(-1.0, 1.0);
    seeds.d_tau(j) = rng.uniform(-1.0, 1.0);
    seeds.d_xi(j) = rng.uniform(-1.0, 1.0);
    seeds.d_xi_xi(j) = rng.uniform(-1.0, 1.0);
  }
  const auto objective = [&](const NetParams& q) {
    JetEvaluator ev;
    const JetBatch& b = ev.forward(q, inputs);
    double s = 0.0;
    for (int j = 0; j < 7; ++j) {
      s += seeds.value(j) * b.value(j) + seeds.d_tau(j) * b.d_tau(j) +
           seeds.d_xi(j) * b.d_xi(j) + seeds.d_xi_xi(j) * b.d_xi_xi(j);
    }
    return s;
  };

  JetEvaluator eval;
  eval.forward(p, inputs);
  NetParams grad = NetParams::zeros_like(p);
  eval.backward(p, seeds, grad);

  const double h = 1e-6;
  int checked = 0;
  for (size_t l = 0; l < p.weights.size(); ++l) {
    for (Eigen::Index i = 0; i < p.weights[l].rows(); ++i) {
      for (Eigen::Index j = 0; j < p.weights[l].cols(); ++j) {
        const double saved = p.weights[l](i, j);
        p.weights[l](i, j) = saved + h;
        const double up = objective(p);
        p.weights[l](i, j) = saved - h;
        const double down = objective(p);
        p.weights[l](i, j) = saved;
        const double fd = (up - down) / (2.0 * h);
        CHECK(grad.weights[l](i, j) ==
              doctest::Approx(fd).epsilon(1e-5).scale(1.0));
        ++checked;
      }
    }
    for (Eigen::Index i = 0; i < p.biases[l].size(); ++i) {
      const double saved = p.biases[l](i);
      p.biases[l](i) = saved + h;
      const double up = objective(p);
      p.biases[l](i) = saved - h;
      const double down = objective(p);
      p.biases[l](i) = saved;
      const double fd = (up - down) / (2.0 * h);
      CHECK(grad.biases[l](i) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
      ++checked;
    }
  }
  CHECK(checked == p.parameter_count());
}

TEST_CASE("adjoint is linear in the seeds") {
  Rng rng(23);
  const NetParams p = glorot_init({3, 8, 8, 1}, rng);
  const Eigen::Matrix3Xd inputs = random_inputs(5, rng);
  JetBatch seeds;
  seeds.set_zero(5);
  for (int j = 0; j < 5; ++j) {
    seeds.value(j) = rng.uniform(-1.0, 1.0);
    seeds.d_xi_xi(j) = rng.uniform(-1.0, 1.0);
  }
  JetBatch doubled = seeds;
  doubled.value *= 2.0;
  doubled.d_tau *= 2.0;
  doubled.d_xi *= 2.0;
  doubled.d_xi_xi *= 2.0;

  JetEvaluator eval;
  eval.forward(p, inputs);
  NetParams g1 = NetParams::zeros_like(p);
  eval.backward(p, seeds, g1);
  NetParams g2 = NetParams::zeros_like(p);
  eval.backward(p, doubled, g2);
  // scaling by 2 is exact in floating point, so the gradients match bitwise
  for (size_t l = 0; l < p.weights.size(); ++l) {
    CHECK((2.0 * g1.weights[l]) == g2.weights[l]);
    CHECK((2.0 * g1.biases[l]) == g2.biases[l]);
  }
}

TEST_CASE("backward accumulates into the gradient") {
  Rng rng(29);
  const NetParams p = glorot_init({3, 6, 1}, rng);
  const Eigen::Matrix3Xd inputs = random_inputs(4, rng);
  JetBatch seeds;
  seeds.set_zero(4);
  seeds.value.setOnes();
  JetEvaluator eval;
  eval.forward(p, inputs);
  NetParams once = NetParams::zeros_like(p);
  eval.backward(p, seeds, once);
  NetParams twice = NetParams::zeros_like(p);
  eval.backward(p, seeds, twice);
  eval.backward(p, seeds, twice);
  CHECK(twice.weights[0] == (2.0 * once.weights[0]));
  CHECK(twice.biases[0] == (2.0 * once.biases[0]));
}

TEST_CASE("learning rate decay") {
  AdamConfig config;  // 1e-3, decay 0.9 per 2000 steps
  CHECK(decayed_lr(config, 0) == 1e-3);
  CHECK(decayed_lr(config, 2000) == doctest::Approx(0.0009).epsilon(1e-12));
  config.decay_steps = 1000;
  CHECK(decayed_lr(config, 2000) == doctest::Approx(0.00081).epsilon(1e-12));
  CHECK(decayed_lr(config, 500) == doctest::Approx(1e-3 * std::pow(0.9, 0.5)).epsilon(1e-12));
}

TEST_CASE("adam matches a scalar reference") {
  AdamConfig config;
  NetParams p = NetParams::zeros({3, 1, 1});
  p.weights[0](0, 0) = 0.5;
  AdamOptimizer opt(p, config);

  double ref = 0.5;
  double m = 0.0, v = 0.0;
  Rng rng(31);
  for (int s = 1; s <= 25; ++s) {
    NetParams grad = NetParams::zeros_like(p);
    const double g = rng.uniform(-2.0, 2.0);
    grad.weights[0](0, 0) = g;
    opt.step(p, grad);

    const double lr = decayed_lr(config, s);
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g * g;
    const double mhat = m / (1.0 - std::pow(config.beta1, s));
    const double vhat = v / (1.0 - std::pow(config.beta2, s));
    ref -= lr * mhat / (std::sqrt(vhat) + config.epsilon);
    CHECK(p.weights[0](0, 0) == doctest::Approx(ref).epsilon(1e-14));
  }
  CHECK(opt.step_count() == 25);
  opt.reset();
  CHECK(opt.step_count() == 0);
}

TEST_CASE("scalar adam follows the same recursion") {
  AdamConfig config;
  config.decay_rate = 1.0;
  ScalarAdam scalar(config);
  const double updated = scalar.step(0.5, 2.0);
  // first step: mhat = g, vhat = g^2, so the update is lr * g / (|g| + eps)
  const double expected = 0.5 - config.learning_rate * 2.0 / (2.0 + config.epsilon);
  CHECK(updated == doctest::Approx(expected).epsilon(1e-14));
  CHECK(scalar.step_count() == 1);
  scalar.reset();
  CHECK(scalar.step_count() == 0);
}

TEST_CASE("checkpoints round trip exactly") {
  Rng rng(37);
  const NetParams p = glorot_init({3, 10, 7, 1}, rng);
  const auto path = std::filesystem::temp_directory_path() / "walltherm_net.json";
  save_params(p, path.string());
  const NetParams back = load_params(path.string());
  REQUIRE(back.layer_sizes == p.layer_sizes);
  for (size_t l = 0; l < p.weights.size(); ++l) {
    CHECK(back.weights[l] == p.weights[l]);
    CHECK(back.biases[l] == p.biases[l]);
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects damaged files") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = dir / "walltherm_net_bad.json";

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_params((dir / "no_such_net.json").string()), DataError);
  }
  SUBCASE("invalid json") {
    std::ofstream(path) << "{ not json";
    CHECK_THROWS_WITH_AS(load_params(path.string()),
                         doctest::Contains("invalid JSON"), DataError);
  }
  SUBCASE("foreign format") {
    std::ofstream(path) << R"({"format":"something-else","version":1})";
    CHECK_THROWS_AS(load_params(path.string()), DataError);
  }
  SUBCASE("unsupported version") {
    std::ofstream(path) << R"({"format":"walltherm-net","version":99,"layer_sizes":[3,1],"layers":[]})";
    CHECK_THROWS_WITH_AS(load_params(path.string()),
                         doctest::Contains("version"), DataError);
  }
  SUBCASE("shape mismatch") {
    Rng rng(41);
    const NetParams p = glorot_init({3, 2, 1}, rng);
    save_params(p, path.string());
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    in.close();
    const auto pos = text.find("[3,2,1]");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 7, "[3,3,1]");
    std::ofstream(path) << text;
    CHECK_THROWS_WITH_AS(load_params(path.string()),
                         doctest::Contains("mismatch"), DataError);
  }
  std::filesystem::remove(path);
}

}  // TEST_SUITE
