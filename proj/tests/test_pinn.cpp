#include <doctest.h>

#include <cmath>
#include <vector>

#include "test_env.hpp"
#include "walltherm/pinn.hpp"

using namespace walltherm;
using testsupport::const_env;

namespace {

struct Fixture {
  physics::WallSpec wall;
  physics::IndoorConditions indoor;
  weather::EnvSeries env;
  physics::Scaler scaler;
  pinn::ForwardProblem problem;

  Fixture()
      : env(const_env(278.15, 1.0, 0.0, indoor, 3600.0)),
        scaler(weather::make_scaler(env, wall, 0.5, 6.0)),
        problem(pinn::make_problem(wall, env, scaler)) {}
};

pinn::TrainConfig tiny_config() {
  pinn::TrainConfig config;
  config.n_pde = 32;
  config.n_bc = 8;
  config.n_ic_xi = 5;
  config.max_steps = 50;
  return config;
}

}  // namespace

TEST_SUITE("pinn") {

TEST_CASE("problem construction checks the scaler") {
  Fixture f;
  physics::Scaler bad_time = f.scaler;
  bad_time.t_total = f.env.duration + 1.0;
  CHECK_THROWS_AS(pinn::make_problem(f.wall, f.env, bad_time), std::invalid_argument);
  physics::Scaler bad_thickness = f.scaler;
  bad_thickness.thickness_b = f.wall.thickness_b + 0.01;
  CHECK_THROWS_AS(pinn::make_problem(f.wall, f.env, bad_thickness), std::invalid_argument);
}

TEST_CASE("scaled problem quantities") {
  Fixture f;
  CHECK(f.problem.pde_coeff_per_k() ==
        doctest::Approx(3600.0 / (750.0 * 2300.0 * 0.09)).epsilon(1e-14));
  CHECK(f.problem.theta_in() ==
        doctest::Approx(f.scaler.nondim_temp(298.15)).epsilon(1e-14));
  CHECK(f.problem.theta_solair(0.5) ==
        doctest::Approx(f.scaler.nondim_temp(278.15)).epsilon(1e-12));
  CHECK(f.problem.h_out_at(0.25) == doctest::Approx(18.6).epsilon(1e-12));

  const auto theta0 = f.problem.steady_theta0(2.0);
  const physics::SteadyProfile steady = physics::steady_profile(
      f.wall, 278.15, 298.15, 18.6, 2.0);
  for (double xi : {0.0, 0.3, 0.77, 1.0}) {
    CHECK(theta0(xi) ==
          doctest::Approx(f.scaler.nondim_temp(steady(xi * 0.3))).epsilon(1e-12));
  }
}

TEST_CASE("pointwise residual forms") {
  net::Jet2 jet;
  jet.value = 0.4;
  jet.d_tau = 0.02;
  jet.d_xi = -0.3;
  jet.d_xi_xi = 1.5;
  CHECK(pinn::pde_residual(jet, 2.0, 0.01) ==
        doctest::Approx(0.02 - 2.0 * 0.01 * 1.5).epsilon(1e-14));
  CHECK(pinn::bc_out_residual(jet, 0.35, 2.0, 18.6, 0.3) ==
        doctest::Approx((0.4 - 0.35) - 2.0 / (0.3 * 18.6) * (-0.3)).epsilon(1e-14));
  CHECK(pinn::bc_in_residual(jet, 0.8, 2.0, 2.0, 0.3) ==
        doctest::Approx((0.8 - 0.4) - 2.0 / (0.3 * 2.0) * (-0.3)).epsilon(1e-14));
}

TEST_CASE("collocation sampling") {
  Fixture f;
  pinn::TrainConfig config = tiny_config();

  SUBCASE("layout and bounds") {
    Rng rng(3);
    const auto batch = pinn::sample_collocation(config, f.scaler, 2.0, rng);
    CHECK(batch.pde.cols() == 32);
    CHECK(batch.bc_out.cols() == 8);
    CHECK(batch.bc_in.cols() == 8);
    CHECK(batch.ic.cols() == 3 * 5);
    for (Eigen::Index j = 0; j < batch.pde.cols(); ++j) {
      CHECK(batch.pde(0, j) >= 0.0);
      CHECK(batch.pde(0, j) <= 1.0);
      CHECK(batch.pde(1, j) >= 0.0);
      CHECK(batch.pde(1, j) <= 1.0);
      CHECK(batch.pde(2, j) >= 0.0);
      CHECK(batch.pde(2, j) <= 1.0);
    }
    CHECK(batch.bc_out.row(1).isZero(0.0));
    CHECK((batch.bc_in.row(1).array() == 1.0).all());
    CHECK(batch.ic.row(0).isZero(0.0));
    // even xi grid repeated once per conductivity factor
    for (int rep = 0; rep < 3; ++rep) {
      for (int j = 0; j < 5; ++j) {
        CHECK(batch.ic(1, rep * 5 + j) == doctest::Approx(j / 4.0).epsilon(1e-14));
      }
    }
    const double spread = 2.0 * 0.05;
    CHECK(std::abs(f.scaler.redim_k(batch.ic(2, 0)) - 0.95 * 2.0) < 1e-12);
    CHECK(std::abs(f.scaler.redim_k(batch.ic(2, 5)) - 2.0) < 1e-12);
    CHECK(std::abs(f.scaler.redim_k(batch.ic(2, 10)) - 1.05 * 2.0) < 1e-12);
    CHECK(spread > 0.0);
  }

  SUBCASE("conductivity factors clamp at the material bounds") {
    Rng rng(5);
    const auto batch = pinn::sample_collocation(config, f.scaler, f.scaler.k_max, rng);
    CHECK(f.scaler.redim_k(batch.ic(2, 10)) == doctest::Approx(f.scaler.k_max).epsilon(1e-14));
  }

  SUBCASE("deterministic given the generator state") {
    Rng a(7), b(7);
    const auto batch_a = pinn::sample_collocation(config, f.scaler, 2.0, a);
    const auto batch_b = pinn::sample_collocation(config, f.scaler, 2.0, b);
    CHECK(batch_a.pde == batch_b.pde);
    CHECK(batch_a.bc_out == batch_b.bc_out);
    CHECK(batch_a.bc_in == batch_b.bc_in);
    CHECK(batch_a.ic == batch_b.ic);
  }

  SUBCASE("rejects degenerate batch sizes") {
    Rng rng(9);
    pinn::TrainConfig bad = config;
    bad.n_ic_xi = 1;
    CHECK_THROWS_AS(pinn::sample_collocation(bad, f.scaler, 2.0, rng), std::invalid_argument);
  }

  SUBCASE("zero sampling width pins every point to the exact conductivity") {
    Rng rng(11);
    pinn::TrainConfig fixed = config;
    fixed.k_sample_std = 0.0;
    const double kappa = f.scaler.nondim_k(2.0);
    const auto batch = pinn::sample_collocation(fixed, f.scaler, 2.0, rng);
    CHECK((batch.pde.row(2).array() == kappa).all());
    CHECK((batch.bc_out.row(2).array() == kappa).all());
    CHECK((batch.bc_in.row(2).array() == kappa).all());
  }
}

TEST_CASE("losses agree with pointwise residuals") {
  Fixture f;
  Rng rng(11);
  const net::NetParams params = net::glorot_init({3, 8, 8, 1}, rng);
  const auto batch = pinn::sample_collocation(tiny_config(), f.scaler, 2.0, rng);
  const auto theta0 = f.problem.steady_theta0(2.0);

  double acc = 0.0;
  for (Eigen::Index j = 0; j < batch.pde.cols(); ++j) {
    const net::Jet2 jet =
        net::forward_jet(params, batch.pde(0, j), batch.pde(1, j), batch.pde(2, j));
    const double k_dim = f.scaler.redim_k(batch.pde(2, j));
    const double r = pinn::pde_residual(jet, k_dim, f.problem.pde_coeff_per_k());
    acc += r * r;
  }
  CHECK(pinn::loss_pde(params, batch.pde, f.problem) ==
        doctest::Approx(acc / batch.pde.cols()).epsilon(1e-12));

  acc = 0.0;
  for (Eigen::Index j = 0; j < batch.bc_out.cols(); ++j) {
    const net::Jet2 jet =
        net::forward_jet(params, batch.bc_out(0, j), 0.0, batch.bc_out(2, j));
    const auto p = f.env.at(f.scaler.redim_time(batch.bc_out(0, j)));
    const double r = pinn::bc_out_residual(jet, f.scaler.nondim_temp(p.solair_temp),
                                           f.scaler.redim_k(batch.bc_out(2, j)), p.h_out,
                                           f.scaler.thickness_b);
    acc += r * r;
  }
  CHECK(pinn::loss_bc_out(params, batch.bc_out, f.problem) ==
        doctest::Approx(acc / batch.bc_out.cols()).epsilon(1e-12));

  acc = 0.0;
  for (Eigen::Index j = 0; j < batch.bc_in.cols(); ++j) {
    const net::Jet2 jet =
        net::forward_jet(params, batch.bc_in(0, j), 1.0, batch.bc_in(2, j));
    const double r = pinn::bc_in_residual(jet, f.problem.theta_in(),
                                          f.scaler.redim_k(batch.bc_in(2, j)),
                                          f.indoor.h_in, f.scaler.thickness_b);
    acc += r * r;
  }
  CHECK(pinn::loss_bc_in(params, batch.bc_in, f.problem) ==
        doctest::Approx(acc / batch.bc_in.cols()).epsilon(1e-12));

  acc = 0.0;
  for (Eigen::Index j = 0; j < batch.ic.cols(); ++j) {
    const double r = net::forward_value(params, 0.0, batch.ic(1, j), batch.ic(2, j)) -
                     theta0(batch.ic(1, j));
    acc += r * r;
  }
  CHECK(pinn::loss_ic(params, batch.ic, theta0) ==
        doctest::Approx(acc / batch.ic.cols()).epsilon(1e-12));

  const auto all = pinn::eval_losses(params, batch, f.problem, theta0);
  CHECK(all.pde == pinn::loss_pde(params, batch.pde, f.problem));
  CHECK(all.bc_out == pinn::loss_bc_out(params, batch.bc_out, f.problem));
  CHECK(all.bc_in == pinn::loss_bc_in(params, batch.bc_in, f.problem));
  CHECK(all.ic == pinn::loss_ic(params, batch.ic, theta0));
}

TEST_CASE("zero network losses have closed forms under constant forcing") {
  Fixture f;
  Rng rng(13);
  const net::NetParams zero = net::NetParams::zeros({3, 4, 1});
  const auto batch = pinn::sample_collocation(tiny_config(), f.scaler, 2.0, rng);
  const double theta_sa = f.scaler.nondim_temp(278.15);
  const double theta_in = f.problem.theta_in();
  CHECK(pinn::loss_pde(zero, batch.pde, f.problem) == 0.0);
  CHECK(pinn::loss_bc_out(zero, batch.bc_out, f.problem) ==
        doctest::Approx(theta_sa * theta_sa).epsilon(1e-12));
  CHECK(pinn::loss_bc_in(zero, batch.bc_in, f.problem) ==
        doctest::Approx(theta_in * theta_in).epsilon(1e-12));
}

TEST_CASE("trainer") {
  Fixture f;

  SUBCASE("returns without stepping when already converged") {
    pinn::TrainConfig config = tiny_config();
    config.threshold_pde = config.threshold_bc_out = 1e9;
    config.threshold_bc_in = config.threshold_ic = 1e9;
    pinn::Trainer trainer(f.problem, config);
    Rng rng(17);
    net::NetParams params = net::glorot_init({3, 8, 1}, rng);
    net::AdamOptimizer adam(params, {});
    const net::NetParams before = params;
    const auto result = trainer.train_inner(params, adam, 2.0, rng);
    CHECK(result.converged);
    CHECK(result.steps == 0);
    CHECK(trainer.global_step() == 0);
    CHECK(params.weights[0] == before.weights[0]);
    CHECK(result.validation_losses.pde < 1e9);
  }

  SUBCASE("hits the step cap when thresholds are unreachable") {
    pinn::TrainConfig config = tiny_config();
    config.threshold_pde = config.threshold_bc_out = 1e-300;
    config.threshold_bc_in = config.threshold_ic = 1e-300;
    config.max_steps = 7;
    pinn::Trainer trainer(f.problem, config);
    Rng rng(19);
    net::NetParams params = net::glorot_init({3, 8, 1}, rng);
    net::AdamOptimizer adam(params, {});
    int callbacks = 0;
    std::int64_t last_global = 0;
    const auto result = trainer.train_inner(params, adam, 2.0, rng,
                                            [&](const pinn::StepRecord& rec) {
                                              ++callbacks;
                                              last_global = rec.global_step;
                                              CHECK(rec.learning_rate > 0.0);
                                            });
    CHECK(!result.converged);
    CHECK(result.steps == 7);
    CHECK(callbacks == 7);
    CHECK(last_global == 7);
    // global step survives across calls
    trainer.train_inner(params, adam, 2.0, rng);
    CHECK(trainer.global_step() == 14);
  }

  SUBCASE("training is deterministic in the seeds") {
    pinn::TrainConfig config = tiny_config();
    config.threshold_pde = config.threshold_bc_out = 1e-300;
    config.threshold_bc_in = config.threshold_ic = 1e-300;
    auto run = [&]() {
      pinn::Trainer trainer(f.problem, config);
      Rng init_rng(23);
      net::NetParams params = net::glorot_init({3, 8, 8, 1}, init_rng);
      net::AdamOptimizer adam(params, {});
      Rng rng(29);
      trainer.train_inner(params, adam, 2.0, rng);
      return params;
    };
    const net::NetParams a = run();
    const net::NetParams b = run();
    for (size_t l = 0; l < a.weights.size(); ++l) {
      CHECK(a.weights[l] == b.weights[l]);
      CHECK(a.biases[l] == b.biases[l]);
    }
  }

  SUBCASE("loss weights rebalance on the cadence") {
    pinn::TrainConfig config = tiny_config();
    config.threshold_pde = config.threshold_bc_out = 1e-300;
    config.threshold_bc_in = config.threshold_ic = 1e-300;
    config.weight_update_interval = 10;
    config.max_steps = 11;
    pinn::Trainer trainer(f.problem, config);
    Rng rng(31);
    net::NetParams params = net::glorot_init({3, 8, 1}, rng);
    net::AdamOptimizer adam(params, {});
    trainer.train_inner(params, adam, 2.0, rng);
    const auto& w = trainer.weights();
    CHECK(w.pde > 0.0);
    CHECK(w.bc_out > 0.0);
    CHECK(w.bc_in > 0.0);
    CHECK(w.ic > 0.0);
    const bool moved = w.pde != 1.0 || w.bc_out != 1.0 || w.bc_in != 1.0 || w.ic != 1.0;
    CHECK(moved);
  }

  SUBCASE("evaluate leaves the parameters untouched") {
    pinn::Trainer trainer(f.problem, tiny_config());
    Rng rng(37);
    net::NetParams params = net::glorot_init({3, 8, 1}, rng);
    const net::NetParams before = params;
    const auto losses = trainer.evaluate(params, 2.0, rng);
    CHECK(losses.pde >= 0.0);
    CHECK(params.weights[0] == before.weights[0]);
    CHECK(trainer.global_step() == 0);
  }

  SUBCASE("rejects bad configuration") {
    pinn::TrainConfig config = tiny_config();
    config.max_steps = 0;
    CHECK_THROWS_AS(pinn::Trainer(f.problem, config), std::invalid_argument);
    config = tiny_config();
    config.weight_update_interval = 0;
    CHECK_THROWS_AS(pinn::Trainer(f.problem, config), std::invalid_argument);
  }
}

}  // TEST_SUITE
