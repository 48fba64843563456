#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "test_env.hpp"
#include "walltherm/errors.hpp"
#include "walltherm/inverse.hpp"

using namespace walltherm;
using testsupport::const_env;

namespace {

inverse::ThermographSet make_set(std::initializer_list<fvm::Thermograph> entries) {
  inverse::ThermographSet set;
  set.entries = entries;
  return set;
}

}  // namespace

TEST_SUITE("inverse") {

TEST_CASE("thermograph validation") {
  CHECK_THROWS_WITH_AS(make_set({}).validate(100.0), doctest::Contains("empty"), DataError);
  CHECK_THROWS_WITH_AS(make_set({{10.0, 280.0}, {10.0, 281.0}}).validate(100.0),
                       doctest::Contains("increasing"), DataError);
  CHECK_THROWS_WITH_AS(make_set({{10.0, 280.0}, {200.0, 281.0}}).validate(100.0),
                       doctest::Contains("outside"), DataError);
  CHECK_THROWS_WITH_AS(make_set({{10.0, -5.0}}).validate(100.0),
                       doctest::Contains("positive"), DataError);
  CHECK_NOTHROW(make_set({{0.0, 280.0}, {100.0, 281.0}}).validate(100.0));
}

TEST_CASE("thermograph CSV round trip") {
  const auto path = std::filesystem::temp_directory_path() / "walltherm_tc.csv";
  inverse::ThermographSet set =
      make_set({{900.0, 281.0625}, {1800.0, 282.5}, {2700.0, 283.9375}});
  inverse::write_thermograph_csv(set, path.string(), 1685608200);
  const auto back = inverse::read_thermograph_csv(path.string());
  REQUIRE(back.entries.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(back.entries[i].time_s == set.entries[i].time_s);
    CHECK(back.entries[i].surface_temp == set.entries[i].surface_temp);
  }
  // preamble carries the epoch for provenance
  std::ifstream in(path);
  std::string first, second;
  std::getline(in, first);
  std::getline(in, second);
  CHECK(first == "# walltherm-thermographs v1");
  CHECK(second == "# t0_epoch=1685608200");
  in.close();
  std::filesystem::remove(path);
}

TEST_CASE("thermograph CSV rejects empty tables") {
  const auto path = std::filesystem::temp_directory_path() / "walltherm_tc_empty.csv";
  std::ofstream(path) << "time_s,surface_temp_k\n";
  CHECK_THROWS_WITH_AS(inverse::read_thermograph_csv(path.string()),
                       doctest::Contains("no thermographs"), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("measurement loss") {
  physics::Scaler scaler;
  scaler.t_total = 3600.0;
  scaler.thickness_b = 0.3;
  scaler.t_min_temp = 270.0;
  scaler.t_max_temp = 310.0;
  scaler.k_min = 0.5;
  scaler.k_max = 6.0;

  SUBCASE("zero when the net reproduces the measurements") {
    // bias-only net: constant prediction theta = 0.25 -> 280 K
    net::NetParams p = net::NetParams::zeros({3, 4, 1});
    p.biases[1](0) = 0.25;
    const auto set = make_set({{600.0, 280.0}, {1200.0, 280.0}, {3000.0, 280.0}});
    CHECK(inverse::loss_tc(p, set, scaler, 2.0) == doctest::Approx(0.0));
  }

  SUBCASE("single offset measurement gives the squared scaled gap") {
    net::NetParams p = net::NetParams::zeros({3, 4, 1});
    p.biases[1](0) = 0.25;
    const auto set = make_set({{600.0, 284.0}});  // theta = 0.35
    CHECK(inverse::loss_tc(p, set, scaler, 2.0) ==
          doctest::Approx(0.1 * 0.1).epsilon(1e-12));
  }

  SUBCASE("mean over measurements") {
    net::NetParams p = net::NetParams::zeros({3, 4, 1});
    const auto set = make_set({{600.0, 274.0}, {1200.0, 278.0}});  // thetas 0.1, 0.2
    CHECK(inverse::loss_tc(p, set, scaler, 2.0) ==
          doctest::Approx(0.5 * (0.01 + 0.04)).epsilon(1e-12));
  }
}

TEST_CASE("conductivity step") {
  physics::Scaler scaler;
  scaler.t_total = 3600.0;
  scaler.t_min_temp = 270.0;
  scaler.t_max_temp = 310.0;
  scaler.k_min = 0.5;
  scaler.k_max = 6.0;

  SUBCASE("zero gradient is a fixed point") {
    net::NetParams p = net::NetParams::zeros({3, 4, 1});
    p.biases[1](0) = 0.25;
    net::ScalarAdam adam(net::AdamConfig{});
    const auto set = make_set({{600.0, 280.0}});
    const auto step = inverse::step_k(p, set, scaler, 2.0, adam);
    CHECK(step.loss_before == doctest::Approx(0.0));
    CHECK(step.dloss_dkappa == doctest::Approx(0.0));
    CHECK(step.k_new_dim == doctest::Approx(2.0).epsilon(1e-12));
  }

  SUBCASE("moves against the gradient and reports it") {
    // prediction increases with kappa: value = tanh(kappa) approx
    net::NetParams p = net::NetParams::zeros({3, 1, 1});
    p.weights[0](0, 2) = 1.0;
    p.weights[1](0, 0) = 1.0;
    net::ScalarAdam adam(net::AdamConfig{});
    // measurement far below the prediction -> positive diff -> positive grad
    const auto set = make_set({{600.0, 270.0}});
    const double k_hat = 2.0;
    const auto step = inverse::step_k(p, set, scaler, k_hat, adam);
    const double kappa = scaler.nondim_k(k_hat);
    const double value = std::tanh(kappa);
    const double dk = 1.0 - value * value;
    CHECK(step.loss_before == doctest::Approx(value * value).epsilon(1e-12));
    CHECK(step.dloss_dkappa == doctest::Approx(2.0 * value * dk).epsilon(1e-12));
    CHECK(step.k_new_dim < k_hat);
    // one Adam step moves kappa by about the learning rate
    CHECK(std::abs(scaler.nondim_k(step.k_new_dim) - kappa) ==
          doctest::Approx(1e-3).epsilon(1e-2));
  }

  SUBCASE("update clamps to the material range") {
    net::NetParams p = net::NetParams::zeros({3, 1, 1});
    p.weights[0](0, 2) = 1.0;
    p.weights[1](0, 0) = 1.0;
    net::AdamConfig config;
    config.learning_rate = 10.0;  // force a huge move
    net::ScalarAdam adam(config);
    const auto set = make_set({{600.0, 270.0}});
    const auto step = inverse::step_k(p, set, scaler, 0.6, adam);
    CHECK(step.k_new_dim >= scaler.k_min);
    CHECK(step.k_new_dim <= scaler.k_max);
    CHECK(step.k_new_dim == doctest::Approx(scaler.k_min));
  }
}

TEST_CASE("ktrace CSV") {
  inverse::KTrace trace;
  trace.k0 = 3.25;
  trace.converged = true;
  trace.stop_reason = "converged";
  trace.entries = {{1, 3.2, 0.5, 120}, {2, 3.1, 0.25, 0}};
  const auto path = std::filesystem::temp_directory_path() / "walltherm_ktrace.csv";
  inverse::write_ktrace_csv(trace, path.string());
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "# walltherm-ktrace v1");
  std::getline(in, line);
  CHECK(line == "# k0=3.25");
  std::getline(in, line);
  CHECK(line == "# converged=true");
  std::getline(in, line);
  CHECK(line == "# stop_reason=converged");
  std::getline(in, line);
  CHECK(line == "outer_iter,k_hat_wmk,loss_tc,inner_steps");
  std::getline(in, line);
  CHECK(line == "1,3.2,0.5,120");
  in.close();
  std::filesystem::remove(path);
}

TEST_CASE("estimate_k on a problem it can satisfy immediately") {
  // With huge inner thresholds the network never trains, and thermographs
  // generated from the untrained network itself make the measurement loss
  // zero, so the estimate stays at the midpoint and converges by the window
  // criterion.
  physics::WallSpec wall;
  physics::IndoorConditions indoor;
  const auto env = const_env(278.15, 1.0, 0.0, indoor, 3600.0);
  const auto scaler = weather::make_scaler(env, wall, 0.5, 6.0);
  const auto problem = pinn::make_problem(wall, env, scaler);

  inverse::EstimateOptions options;
  options.layer_sizes = {3, 8, 8, 1};
  options.train.n_pde = 16;
  options.train.n_bc = 4;
  options.train.n_ic_xi = 3;
  options.train.threshold_pde = options.train.threshold_bc_out = 1e9;
  options.train.threshold_bc_in = options.train.threshold_ic = 1e9;
  options.inverse.max_outer = 40;
  options.inverse.convergence_window = 10;
  options.seed = 99;

  const double k_mid = scaler.redim_k(0.5);
  Rng root(options.seed);
  Rng init_rng = root.child(0);
  const net::NetParams frozen = net::glorot_init(options.layer_sizes, init_rng);

  inverse::ThermographSet set;
  for (double t : {600.0, 1200.0, 1800.0, 2400.0}) {
    const double theta = net::forward_value(frozen, scaler.nondim_time(t), 0.0,
                                            scaler.nondim_k(k_mid));
    set.entries.push_back({t, scaler.redim_temp(theta)});
  }

  int outer_calls = 0;
  const auto result = inverse::estimate_k(problem, set, options, {},
                                          [&](const inverse::KTraceEntry&) { ++outer_calls; });
  CHECK(result.trace.converged);
  CHECK(result.trace.stop_reason == "converged");
  CHECK(result.trace.k0 == doctest::Approx(k_mid).epsilon(1e-12));
  // the conductivity optimizer normalizes its gradient, so the estimate
  // wobbles around the zero-loss point by a few learning rates
  CHECK(std::abs(result.trace.k_hat_final() - k_mid) < 0.02);
  CHECK(result.total_inner_steps == 0);
  CHECK(outer_calls == static_cast<int>(result.trace.entries.size()));
  CHECK(result.trace.entries.size() == 11);
  CHECK(result.trace.entries.back().loss_tc < 1e-6);
}

TEST_CASE("estimate_k reports an inner stall") {
  physics::WallSpec wall;
  physics::IndoorConditions indoor;
  const auto env = const_env(278.15, 1.0, 0.0, indoor, 3600.0);
  const auto scaler = weather::make_scaler(env, wall, 0.5, 6.0);
  const auto problem = pinn::make_problem(wall, env, scaler);

  inverse::EstimateOptions options;
  options.layer_sizes = {3, 8, 1};
  options.train.n_pde = 16;
  options.train.n_bc = 4;
  options.train.n_ic_xi = 3;
  options.train.threshold_pde = options.train.threshold_bc_out = 1e-300;
  options.train.threshold_bc_in = options.train.threshold_ic = 1e-300;
  options.train.max_steps = 5;
  options.inverse.max_outer = 50;
  options.inverse.max_consecutive_stalls = 3;

  inverse::ThermographSet set = make_set({{600.0, 280.0}, {1800.0, 281.0}});
  const auto result = inverse::estimate_k(problem, set, options);
  CHECK(!result.trace.converged);
  CHECK(result.trace.stop_reason == "inner_stall");
  CHECK(result.total_inner_steps == 15);
  // the stalled attempt never records conductivity updates beyond the completed outers
  CHECK(result.trace.entries.size() == 2);
}

TEST_CASE("estimate_k validates its configuration") {
  physics::WallSpec wall;
  physics::IndoorConditions indoor;
  const auto env = const_env(278.15, 1.0, 0.0, indoor, 3600.0);
  const auto scaler = weather::make_scaler(env, wall, 0.5, 6.0);
  const auto problem = pinn::make_problem(wall, env, scaler);
  inverse::ThermographSet set = make_set({{600.0, 280.0}});

  inverse::EstimateOptions options;
  options.inverse.max_outer = 0;
  CHECK_THROWS_AS(inverse::estimate_k(problem, set, options), std::invalid_argument);
  options = {};
  options.inverse.convergence_window = 0;
  CHECK_THROWS_AS(inverse::estimate_k(problem, set, options), std::invalid_argument);
  options = {};
  inverse::ThermographSet bad = make_set({{-5.0, 280.0}});
  CHECK_THROWS_AS(inverse::estimate_k(problem, bad, options), DataError);
}

}  // TEST_SUITE
