#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sasim/mdp.hpp"

using namespace sasim;

namespace {

MdpModel random_mdp(int X, int U, RngStream& rng) {
  std::vector<StochasticMatrix> P;
  for (int u = 0; u < U; ++u) {
    Eigen::MatrixXd p(X, X);
    for (int i = 0; i < X; ++i) {
      double s = 0.0;
      for (int j = 0; j < X; ++j) {
        p(i, j) = 0.05 + rng.uniform();
        s += p(i, j);
      }
      p.row(i) /= s;
    }
    P.emplace_back(p);
  }
  Eigen::MatrixXd c(X, U);
  for (int i = 0; i < X; ++i) {
    for (int u = 0; u < U; ++u) c(i, u) = 10.0 * (rng.uniform() - 0.3);
  }
  return MdpModel(std::move(P), c);
}

PolicyParam random_param(ParamKind kind, int X, int U, RngStream& rng) {
  if (kind == ParamKind::Exponential) {
    Eigen::MatrixXd psi(X, U);
    for (int i = 0; i < X; ++i) {
      for (int a = 0; a < U; ++a) psi(i, a) = 2.0 * (rng.uniform() - 0.5);
    }
    return {kind, psi};
  }
  Eigen::MatrixXd psi(X, U - 1);
  for (int i = 0; i < X; ++i) {
    // Stay well away from the tan poles at multiples of pi/2.
    for (int a = 0; a < U - 1; ++a) psi(i, a) = 0.25 + 1.05 * rng.uniform();
  }
  return {ParamKind::Spherical, psi};
}

}  // namespace

TEST_CASE("exponential parametrization: uniform rows and hand values") {
  PolicyParam psi{ParamKind::Exponential, Eigen::MatrixXd::Zero(2, 3)};
  const ActionProbabilityMatrix t = theta_from_params(psi, 3);
  CHECK(t(0, 0) == doctest::Approx(1.0 / 3).epsilon(1e-14));
  CHECK(t(1, 2) == doctest::Approx(1.0 / 3).epsilon(1e-14));

  Eigen::MatrixXd row(1, 3);
  row << std::log(2.0), 0.0, 0.0;
  const ActionProbabilityMatrix t2 =
      theta_from_params({ParamKind::Exponential, row}, 3);
  CHECK(t2(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(t2(0, 1) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(t2(0, 2) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("spherical parametrization: U = 2 diagonal angle") {
  Eigen::MatrixXd psi(1, 1);
  psi << std::numbers::pi / 4;
  const ActionProbabilityMatrix t =
      theta_from_params({ParamKind::Spherical, psi}, 2);
  CHECK(t(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(t(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("induced rows are simplex-valid for arbitrary parameters") {
  RngStream rng(2);
  for (int rep = 0; rep < 100; ++rep) {
    const int U = 2 + rng.uniform_int(3);
    for (ParamKind kind : {ParamKind::Exponential, ParamKind::Spherical}) {
      Eigen::MatrixXd raw(3, kind == ParamKind::Exponential ? U : U - 1);
      for (int i = 0; i < raw.rows(); ++i) {
        for (int j = 0; j < raw.cols(); ++j) {
          raw(i, j) = 30.0 * (rng.uniform() - 0.5);  // arbitrary angles too
        }
      }
      const ActionProbabilityMatrix t = theta_from_params({kind, raw}, U);
      for (int i = 0; i < 3; ++i) {
        CHECK(t.mat().row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(t.mat().row(i).minCoeff() >= 0.0);
      }
    }
  }
}

TEST_CASE("policy jacobian: hand values, zero row sums, finite differences") {
  // Uniform exponential row with U = 2: d theta_1/d psi_1 = 0.25.
  PolicyParam uniform{ParamKind::Exponential, Eigen::MatrixXd::Zero(1, 2)};
  const PolicyJacobian j0 = dtheta_dpsi(uniform, 2);
  CHECK(j0.by_state[0](0, 0) == doctest::Approx(0.25));
  CHECK(j0.by_state[0](0, 1) == doctest::Approx(-0.25));

  RngStream rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const int U = 2 + rng.uniform_int(3);
    const ParamKind kind =
        rep % 2 == 0 ? ParamKind::Exponential : ParamKind::Spherical;
    PolicyParam psi = random_param(kind, 2, U, rng);
    const PolicyJacobian jac = dtheta_dpsi(psi, U);
    for (int i = 0; i < 2; ++i) {
      for (int a = 0; a < psi.param_cols(); ++a) {
        CHECK(std::abs(jac.by_state[i].row(a).sum()) < 1e-12);
        // Central finite-difference oracle, step 1e-5.
        for (int ab = 0; ab < U; ++ab) {
          PolicyParam up = psi, down = psi;
          up.psi(i, a) += 1e-5;
          down.psi(i, a) -= 1e-5;
          const double fd = (theta_from_params(up, U)(i, ab) -
                             theta_from_params(down, U)(i, ab)) /
                            2e-5;
          CHECK(jac.by_state[i](a, ab) == doctest::Approx(fd).epsilon(1e-6));
        }
      }
    }
  }
}

TEST_CASE("spherical pole guard names the component") {
  Eigen::MatrixXd psi(1, 1);
  psi << std::numbers::pi / 2;  // cos = 0
  CHECK_THROWS_WITH_AS(dtheta_dpsi({ParamKind::Spherical, psi}, 2),
                       doctest::Contains("(0,0)"), std::runtime_error);
}

TEST_CASE("augmented kernel structure") {
  // Single state: every row equals the action row of theta.
  Eigen::MatrixXd one(1, 1);
  one << 1.0;
  std::vector<StochasticMatrix> P1 = {StochasticMatrix(one),
                                      StochasticMatrix(one)};
  Eigen::MatrixXd c1(1, 2);
  c1 << 1.0, 2.0;
  const MdpModel tiny(P1, c1);
  Eigen::MatrixXd th(1, 2);
  th << 0.3, 0.7;
  const StochasticMatrix k1 =
      augmented_kernel(tiny, ActionProbabilityMatrix(th));
  CHECK(k1(0, 0) == doctest::Approx(0.3));
  CHECK(k1(1, 1) == doctest::Approx(0.7));

  // Paper fixture: entry ((1,1),(2,2)) = theta(2,2) P(1)(1,2) = 0.4 * 0.1.
  const MdpModel mdp = paper_fixture_mdp();
  const StochasticMatrix k = augmented_kernel(
      mdp, ActionProbabilityMatrix(paper_fixture_theta()));
  CHECK(k(flatten_state_action(0, 0, 3), flatten_state_action(1, 1, 3)) ==
        doctest::Approx(0.4 * 0.1));

  RngStream rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const MdpModel m = random_mdp(3, 2, rng);
    PolicyParam psi = random_param(ParamKind::Exponential, 3, 2, rng);
    const StochasticMatrix kk = augmented_kernel(m, theta_from_params(psi, 2));
    for (int z = 0; z < 6; ++z) {
      CHECK(kk.mat().row(z).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("flattening convention round-trips") {
  const int U = 3;
  for (int x = 0; x < 4; ++x) {
    for (int u = 0; u < U; ++u) {
      const auto [xx, uu] =
          unflatten_state_action(flatten_state_action(x, u, U), U);
      CHECK(xx == x);
      CHECK(uu == u);
    }
  }
}

TEST_CASE("average cost: constants, single-state mixtures, fixture vs simulation") {
  const MdpModel mdp = paper_fixture_mdp();
  // Constant costs pass straight through.
  MdpModel flat = mdp;
  flat.cost.setConstant(7.0);
  const ActionProbabilityMatrix theta(paper_fixture_theta());
  CHECK(average_cost(flat, theta) == doctest::Approx(7.0).epsilon(1e-12));

  Eigen::MatrixXd one(1, 1);
  one << 1.0;
  std::vector<StochasticMatrix> P1 = {StochasticMatrix(one),
                                      StochasticMatrix(one)};
  Eigen::MatrixXd c1(1, 2);
  c1 << 3.0, -1.0;
  Eigen::MatrixXd th(1, 2);
  th << 0.25, 0.75;
  CHECK(average_cost(MdpModel(P1, c1), ActionProbabilityMatrix(th)) ==
        doctest::Approx(0.25 * 3.0 + 0.75 * -1.0));

  // Long-run simulation oracle.
  RngStream rng(6);
  const int n = 1000000;
  const auto steps = simulate_mdp(mdp, theta, n, 0, rng);
  double mean = 0.0;
  for (const auto& s : steps) mean += s.cost;
  mean /= n;
  const double exact = average_cost(mdp, theta);
  CHECK(std::abs(mean - exact) < 3.0 * 170.0 * 4.0 / std::sqrt(double(n)));
}

TEST_CASE("exact policy gradient reproduces the reference matrix") {
  const MdpModel mdp = paper_fixture_mdp();
  PolicyParam psi{ParamKind::Exponential,
                  paper_fixture_theta().array().log().matrix()};
  const Eigen::MatrixXd g = exact_policy_gradient(mdp, psi);
  Eigen::MatrixXd expected(2, 3);
  expected << -9.010, 18.680, -9.670, -45.947, 68.323, -22.377;
  CHECK((g - expected).cwiseAbs().maxCoeff() < 0.01);
  // Softmax shift invariance: every row of the gradient sums to zero.
  CHECK(std::abs(g.row(0).sum()) < 1e-10);
  CHECK(std::abs(g.row(1).sum()) < 1e-10);
}

TEST_CASE("exact policy gradient matches finite differences of the average cost") {
  RngStream rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const int X = 2 + rng.uniform_int(3);
    const int U = 2 + rng.uniform_int(3);
    const MdpModel mdp = random_mdp(X, U, rng);
    const ParamKind kind =
        rep % 2 == 0 ? ParamKind::Exponential : ParamKind::Spherical;
    PolicyParam psi = random_param(kind, X, U, rng);
    const Eigen::MatrixXd g = exact_policy_gradient(mdp, psi);
    const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
    for (int i = 0; i < X; ++i) {
      for (int a = 0; a < psi.param_cols(); ++a) {
        PolicyParam up = psi, down = psi;
        up.psi(i, a) += 1e-6;
        down.psi(i, a) -= 1e-6;
        const double fd = (average_cost(mdp, theta_from_params(up, U)) -
                           average_cost(mdp, theta_from_params(down, U))) /
                          2e-6;
        CHECK(std::abs(g(i, a) - fd) / scale < 1e-4);
      }
    }
  }
}

TEST_CASE("value iteration: geometric single-state case") {
  Eigen::MatrixXd one(1, 1);
  one << 1.0;
  Eigen::MatrixXd c(1, 1);
  c << 1.0;
  const MdpModel tiny({StochasticMatrix(one)}, c);
  for (int N : {1, 3, 10, 40}) {
    const ValueIterationResult r = value_iteration(tiny, 0.5, N);
    CHECK(r.V(0) ==
          doctest::Approx(2.0 * (1.0 - std::pow(0.5, N))).epsilon(1e-12));
    CHECK(r.Q(0, 0) ==
          doctest::Approx(2.0 * (1.0 - std::pow(0.5, N + 1))).epsilon(1e-12));
  }
  // Bound plug-in: rho = 0.5, max|c| = 1, N = 3.
  CHECK(value_iteration(tiny, 0.5, 3).bound == doctest::Approx(0.125));
}

TEST_CASE("value iteration bound dominates the remaining error") {
  RngStream rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    const MdpModel mdp = random_mdp(3, 2, rng);
    const double rho = 0.7;
    const ValueIterationResult now = value_iteration(mdp, rho, 20);
    const ValueIterationResult twice = value_iteration(mdp, rho, 40);
    const ValueIterationResult limit = value_iteration(mdp, rho, 10000);
    CHECK((now.V - twice.V).cwiseAbs().maxCoeff() <= now.bound + 1e-12);
    CHECK((now.V - limit.V).cwiseAbs().maxCoeff() <= now.bound + 1e-12);
  }
}

TEST_CASE("simulate_mdp: determinism, degenerate policies, occupation") {
  const MdpModel mdp = paper_fixture_mdp();
  const ActionProbabilityMatrix theta(paper_fixture_theta());
  RngStream a(9), b(9);
  const auto sa = simulate_mdp(mdp, theta, 500, 0, a);
  const auto sb = simulate_mdp(mdp, theta, 500, 0, b);
  for (int k = 0; k < 500; ++k) {
    CHECK(sa[k].x == sb[k].x);
    CHECK(sa[k].u == sb[k].u);
  }

  // Deterministic policy and kernel produce the deterministic path.
  Eigen::MatrixXd p(2, 2);
  p << 0.0, 1.0, 1.0, 0.0;
  Eigen::MatrixXd c(2, 1);
  c << 0.0, 0.0;
  const MdpModel cyc({StochasticMatrix(p)}, c);
  Eigen::MatrixXd th(2, 1);
  th << 1.0, 1.0;
  RngStream r(1);
  const auto cycle = simulate_mdp(cyc, ActionProbabilityMatrix(th), 4, 0, r);
  CHECK(cycle[0].x == 0);
  CHECK(cycle[1].x == 1);
  CHECK(cycle[2].x == 0);

  // Empirical (x,u) occupation within 0.01 total variation of pi_theta.
  RngStream rng(10);
  const auto steps = simulate_mdp(mdp, theta, 1000000, 0, rng);
  Eigen::VectorXd occ = Eigen::VectorXd::Zero(6);
  for (const auto& s : steps) occ(flatten_state_action(s.x, s.u, 3)) += 1.0;
  occ /= static_cast<double>(steps.size());
  const Pmf pi = stationary_distribution(augmented_kernel(mdp, theta));
  CHECK(0.5 * (occ - pi.vec()).cwiseAbs().sum() < 0.01);
}

TEST_CASE("mdp text format round-trips") {
  const MdpModel mdp = paper_fixture_mdp();
  std::stringstream ss;
  write_mdp(ss, mdp);
  const MdpModel back = read_mdp(ss);
  CHECK(back.X == 2);
  CHECK(back.U == 3);
  for (int u = 0; u < 3; ++u) {
    CHECK((back.P[u].mat() - mdp.P[u].mat()).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK((back.cost - mdp.cost).cwiseAbs().maxCoeff() == 0.0);

  std::stringstream bad("2 0\n");
  CHECK_THROWS_AS(read_mdp(bad), std::runtime_error);
}
