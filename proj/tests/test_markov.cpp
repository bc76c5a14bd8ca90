#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "sasim/markov.hpp"

using namespace sasim;

namespace {

StochasticMatrix fixture_chain() {
  Eigen::MatrixXd p(2, 2);
  p << 0.9, 0.1, 0.2, 0.8;
  return StochasticMatrix(p);
}

StochasticMatrix random_regular(int X, RngStream& rng) {
  Eigen::MatrixXd p(X, X);
  for (int i = 0; i < X; ++i) {
    double s = 0.0;
    for (int j = 0; j < X; ++j) {
      p(i, j) = 0.05 + rng.uniform();
      s += p(i, j);
    }
    p.row(i) /= s;
  }
  return StochasticMatrix(p);
}

}  // namespace

TEST_CASE("constructors enforce row sums and entry ranges") {
  Eigen::MatrixXd bad(2, 2);
  bad << 0.9, 0.2, 0.2, 0.8;  // row 0 sums to 1.1
  CHECK_THROWS_AS(StochasticMatrix{bad}, std::invalid_argument);

  Eigen::MatrixXd close(2, 2);
  close << 0.9, 0.1 + 1e-10, 0.2, 0.8;  // renormalized
  const StochasticMatrix m(close);
  CHECK(m.mat().row(0).sum() == doctest::Approx(1.0).epsilon(1e-14));

  CHECK_THROWS_AS(Pmf{Eigen::Vector2d(0.9, 0.2)}, std::invalid_argument);
}

TEST_CASE("simulate_chain on absorbing identity stays put") {
  RngStream rng(1);
  const Trajectory t =
      simulate_chain(StochasticMatrix::identity(2), Pmf::unit(2, 0), 5, rng);
  CHECK(t.states == std::vector<int>{0, 0, 0, 0, 0});
}

TEST_CASE("simulate_chain follows a deterministic cycle") {
  Eigen::MatrixXd p(2, 2);
  p << 0.0, 1.0, 1.0, 0.0;
  RngStream rng(1);
  const Trajectory t =
      simulate_chain(StochasticMatrix(p), Pmf::unit(2, 0), 4, rng);
  CHECK(t.states == std::vector<int>{0, 1, 0, 1});
}

TEST_CASE("long-run state frequency matches the stationary solve") {
  RngStream rng(7);
  const StochasticMatrix P = fixture_chain();
  const Pmf pi = stationary_distribution(P);  // oracle: direct linear system
  CHECK(pi(0) == doctest::Approx(2.0 / 3).epsilon(1e-12));
  const Trajectory t = simulate_chain(P, Pmf::unit(2, 0), 100000, rng);
  double freq = 0.0;
  for (int x : t.states) freq += x == 0;
  freq /= t.length();
  CHECK(std::abs(freq - 2.0 / 3) < 0.01);
}

TEST_CASE("simulate_chain is bit-identical under the same seed") {
  const StochasticMatrix P = fixture_chain();
  RngStream a(42), b(42);
  const Trajectory ta = simulate_chain(P, Pmf::uniform(2), 1000, a);
  const Trajectory tb = simulate_chain(P, Pmf::uniform(2), 1000, b);
  CHECK(ta.states == tb.states);
}

TEST_CASE("stationary distribution: symmetric and hand-solved cases") {
  Eigen::MatrixXd p(2, 2);
  p << 0.5, 0.5, 0.5, 0.5;
  const Pmf sym = stationary_distribution(StochasticMatrix(p));
  CHECK(sym(0) == doctest::Approx(0.5).epsilon(1e-12));

  const Pmf pi = stationary_distribution(fixture_chain());
  // Hand solve: 0.1 pi_0 = 0.2 pi_1 with pi_0 + pi_1 = 1.
  CHECK(pi(0) == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(pi(1) == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("stationary distribution rejects reducible chains") {
  CHECK_THROWS_WITH_AS(stationary_distribution(StochasticMatrix::identity(2)),
                       doctest::Contains("not regular"), std::runtime_error);
}

TEST_CASE("stationary distribution against power iteration, X up to 6") {
  RngStream rng(3);
  for (int X = 2; X <= 6; ++X) {
    for (int rep = 0; rep < 10; ++rep) {
      RngStream r = rng.substream(X * 100 + rep);
      const StochasticMatrix P = random_regular(X, r);
      const Pmf pi = stationary_distribution(P);
      const double residual =
          ((P.mat().transpose() * pi.vec()) - pi.vec()).cwiseAbs().maxCoeff();
      CHECK(residual < 1e-10);
      // Independent oracle: left power iteration.
      Eigen::RowVectorXd v = Eigen::RowVectorXd::Constant(X, 1.0 / X);
      for (int k = 0; k < 10000; ++k) v = v * P.mat();
      CHECK((v.transpose() - pi.vec()).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("dobrushin coefficient") {
  Eigen::MatrixXd same(3, 3);
  same.setConstant(1.0 / 3);
  CHECK(dobrushin_coefficient(StochasticMatrix(same)) == 0.0);
  CHECK(dobrushin_coefficient(StochasticMatrix::identity(3)) == 1.0);
  CHECK(dobrushin_coefficient(fixture_chain()) == doctest::Approx(0.7));
}

TEST_CASE("variational distance") {
  const Pmf p(Eigen::Vector2d(0.7, 0.3));
  const Pmf q(Eigen::Vector2d(0.3, 0.7));
  CHECK(variational_distance(p, p) == 0.0);
  CHECK(variational_distance(Pmf::unit(2, 0), Pmf::unit(2, 1)) == 1.0);
  CHECK(variational_distance(p, q) == doctest::Approx(0.4));
  CHECK_THROWS_AS(variational_distance(p, Pmf::uniform(3)),
                  std::invalid_argument);
}

TEST_CASE("contraction of variational distance at rate dobrushin^n") {
  RngStream rng(11);
  for (int rep = 0; rep < 5; ++rep) {
    RngStream r = rng.substream(rep);
    const StochasticMatrix P = random_regular(3, r);
    const double rho = dobrushin_coefficient(P);
    const Pmf pi = stationary_distribution(P);
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(3);
    v(0) = 1.0;
    const double d0 = variational_distance(Pmf::unit(3, 0), pi);
    for (int n = 1; n <= 50; ++n) {
      v = v * P.mat();
      const double dn = variational_distance(Pmf(v.transpose()), pi);
      CHECK(dn <= std::pow(rho, n) * d0 + 1e-12);
    }
  }
}

TEST_CASE("howlong bounds: hand-computed fixture numbers") {
  const StochasticMatrix P = fixture_chain();
  Eigen::Vector2d h(1.0, 0.0);
  const SimulationBounds b = howlong_bounds(P, h, Pmf::unit(2, 0), 1000);
  CHECK(b.dobrushin == doctest::Approx(0.7));
  // (1/(1000*0.3)) * d_V(e_0, [2/3,1/3]) = (1/300)*(1/3)
  CHECK(b.bias_bound == doctest::Approx(1.0 / 900).epsilon(1e-12));
  // 2 * 1 / (1000*0.3) * [ (1/3)^2*(2/3) + (2/3)^2*(1/3) ]
  CHECK(b.msd_bound == doctest::Approx(2.0 / 300 * (2.0 / 9)).epsilon(1e-12));
  CHECK(b.concentration(0.05) > 0.0);
  CHECK(b.concentration(0.05) <= 2.0);
}

TEST_CASE("howlong bounds vanish at stationarity / degenerate payoff") {
  const StochasticMatrix P = fixture_chain();
  const Pmf pi = stationary_distribution(P);
  Eigen::Vector2d h(1.0, 0.0);
  CHECK(howlong_bounds(P, h, pi, 100).bias_bound == doctest::Approx(0.0));

  Eigen::Vector2d flat(3.0, 3.0);
  const SimulationBounds b = howlong_bounds(P, flat, Pmf::unit(2, 0), 100);
  CHECK(b.degenerate);
  CHECK(b.bias_bound == 0.0);
  CHECK(b.msd_bound == 0.0);
  CHECK(b.concentration(0.1) == 0.0);
}

TEST_CASE("howlong bounds reject a Dobrushin coefficient of 1") {
  Eigen::MatrixXd p(2, 2);
  p << 0.0, 1.0, 1.0, 0.0;  // periodic: rho = 1
  Eigen::Vector2d h(1.0, 0.0);
  CHECK_THROWS_WITH_AS(howlong_bounds(StochasticMatrix(p), h, Pmf::unit(2, 0), 10),
                       doctest::Contains("undefined"), std::runtime_error);
}

TEST_CASE("howlong bounds hold empirically over 200 seeds") {
  const StochasticMatrix P = fixture_chain();
  Eigen::Vector2d h(1.0, 0.0);
  const Pmf pi0 = Pmf::unit(2, 0);
  const int n = 1000;
  const SimulationBounds b = howlong_bounds(P, h, pi0, n);
  const double truth = h.dot(stationary_distribution(P).vec());

  // Exact-expectation route: E phi_n from matrix powers must respect the
  // bias bound with no Monte-Carlo noise at all.
  Eigen::RowVectorXd v = pi0.vec().transpose();
  double exact_mean = 0.0;
  for (int k = 0; k < n; ++k) {
    exact_mean += v.dot(h);
    v = v * P.mat();
  }
  exact_mean /= n;
  CHECK(std::abs(exact_mean - truth) <= b.bias_bound);

  // Monte-Carlo route over 200 seeds.
  RngStream rng(5);
  double sum = 0.0, sumsq = 0.0;
  for (int s = 0; s < 200; ++s) {
    RngStream r = rng.substream(s);
    const double phi = empirical_average(simulate_chain(P, pi0, n, r), h);
    sum += phi;
    sumsq += (phi - truth) * (phi - truth);
  }
  CHECK(std::abs(sum / 200 - truth) <= b.bias_bound);
  CHECK(sumsq / 200 <= 1.05 * b.msd_bound);
}

TEST_CASE("fundamental matrix") {
  const Pmf pi = stationary_distribution(fixture_chain());
  // P with identical rows equal to pi' has Z = I.
  Eigen::MatrixXd flat(2, 2);
  flat.row(0) = pi.vec().transpose();
  flat.row(1) = pi.vec().transpose();
  const Eigen::MatrixXd Z_flat = fundamental_matrix(StochasticMatrix(flat));
  CHECK((Z_flat - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <
        1e-12);

  const StochasticMatrix P = fixture_chain();
  const Eigen::MatrixXd Z = fundamental_matrix(P);
  CHECK((Z * Eigen::Vector2d::Ones() - Eigen::Vector2d::Ones())
            .cwiseAbs()
            .maxCoeff() < 1e-12);

  // Truncated power-series oracle for pi' D sum_k P^k c.
  Eigen::MatrixXd D(2, 2);
  D << -0.1, 0.1, 0.1, -0.1;
  Eigen::Vector2d c(1.0, 2.0);
  const Pmf pif = stationary_distribution(P);
  const double exact = pif.vec().transpose() * D * Z * c;
  double series = 0.0;
  Eigen::Vector2d pk_c = c;
  for (int k = 0; k <= 200; ++k) {
    series += pif.vec().transpose() * D * pk_c;
    pk_c = P.mat() * pk_c;
  }
  CHECK(exact == doctest::Approx(series).epsilon(1e-10));
}

TEST_CASE("empirical average") {
  Trajectory constant{{1, 1, 1}};
  Eigen::Vector2d h(5.0, 7.0);
  CHECK(empirical_average(constant, h) == doctest::Approx(7.0));
  Trajectory alt{{0, 1, 0, 1}};
  CHECK(empirical_average(alt, Eigen::Vector2d(1.0, 0.0)) ==
        doctest::Approx(0.5));
  CHECK_THROWS_AS(empirical_average(Trajectory{}, h), std::invalid_argument);
}

TEST_CASE("long runs sit within the MSD bound across 100 seeds") {
  const StochasticMatrix P = fixture_chain();
  Eigen::Vector2d h(1.0, 0.0);
  const Pmf pi0 = Pmf::unit(2, 0);
  const int n = 100000;
  const SimulationBounds b = howlong_bounds(P, h, pi0, n);
  const double truth = h.dot(stationary_distribution(P).vec());
  RngStream rng(17);
  double msd = 0.0;
  for (int s = 0; s < 100; ++s) {
    RngStream r = rng.substream(s);
    const double phi = empirical_average(simulate_chain(P, pi0, n, r), h);
    msd += (phi - truth) * (phi - truth);
  }
  CHECK(msd / 100 <= 1.05 * b.msd_bound);
}
