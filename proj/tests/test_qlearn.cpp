#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "sasim/qlearn.hpp"

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
    for (int u = 0; u < U; ++u) c(i, u) = rng.uniform();
  }
  return MdpModel(std::move(P), c);
}

}  // namespace

TEST_CASE("q_update moves only the visited entry and respects fixed points") {
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(2, 2);
  Q << 1.0, 2.0, 3.0, 4.0;
  Eigen::MatrixXd before = Q;
  // Deterministic self-loop at the Bellman fixed point: c + rho*min = Q.
  // Q(0,0) = 1, min Q(0,.) = 1, so c = 1 - 0.5 = 0.5 keeps it unchanged.
  q_update(Q, 0, 0, 0.5, 0, 0.5, 1.0);
  CHECK(Q(0, 0) == doctest::Approx(1.0));
  CHECK((Q - before).cwiseAbs().sum() == doctest::Approx(0.0));

  // Off fixed point only (x,u) changes.
  q_update(Q, 1, 0, 10.0, 0, 0.5, 0.5);
  CHECK(Q(1, 0) != before(1, 0));
  CHECK(Q(0, 0) == before(0, 0));
  CHECK(Q(0, 1) == before(0, 1));
  CHECK(Q(1, 1) == before(1, 1));
}

TEST_CASE("q_update geometric convergence on the single-pair chain") {
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(1, 1);
  q_update(Q, 0, 0, 1.0, 0, 0.5, 1.0);
  CHECK(Q(0, 0) == doctest::Approx(1.0));
  q_update(Q, 0, 0, 1.0, 0, 0.5, 1.0);
  CHECK(Q(0, 0) == doctest::Approx(1.5));
  for (int k = 0; k < 200; ++k) q_update(Q, 0, 0, 1.0, 0, 0.5, 0.5);
  CHECK(Q(0, 0) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("q_update accepts the degenerate zero step as a no-op") {
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(1, 1);
  Q(0, 0) = 1.5;
  q_update(Q, 0, 0, 99.0, 0, 0.5, 0.0);
  CHECK(Q(0, 0) == 1.5);
}

TEST_CASE("visit-count step sizes") {
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(2, 2);
  counts(0, 1) = 1;
  CHECK(visit_step_size(counts, 0, 1, 1.0) == doctest::Approx(1.0));
  counts(0, 1) = 10;
  CHECK(visit_step_size(counts, 0, 1, 1.0) == doctest::Approx(0.1));
  CHECK_THROWS_AS(visit_step_size(counts, 1, 1, 1.0), std::invalid_argument);
  // Harmonic sequence: sum eps_k diverges, sum eps_k^2 converges; spot
  // check the tail ratio.
  double sum = 0.0, sumsq = 0.0;
  for (int k = 1; k <= 100000; ++k) {
    sum += 1.0 / k;
    sumsq += 1.0 / (double(k) * k);
  }
  CHECK(sum > 11.0);
  CHECK(sumsq < 1.7);
}

TEST_CASE("q-learning converges on the single-pair chain") {
  Eigen::MatrixXd one(1, 1);
  one << 1.0;
  Eigen::MatrixXd c(1, 1);
  c << 1.0;
  const MdpModel tiny({StochasticMatrix(one)}, c);
  QLearnOptions opts;
  opts.rho = 0.5;
  opts.delta_interval = 100;
  opts.n_intervals = 100;
  opts.exploration = 0.0;
  RngStream rng(1);
  const QLearnResult r =
      q_learning_run(make_mdp_simulator(tiny), 1, 1, opts, rng);
  CHECK(r.Q(0, 0) == doctest::Approx(2.0).epsilon(0.005));
  CHECK(r.unvisited.empty());
}

TEST_CASE("q-learning approaches the value-iteration table on random MDPs") {
  RngStream rng(2);
  int good = 0;
  for (int inst = 0; inst < 3; ++inst) {
    RngStream r = rng.substream(inst);
    const MdpModel mdp = random_mdp(2, 2, r);
    const ValueIterationResult vi = value_iteration(mdp, 0.8, 3000);
    QLearnOptions opts;
    opts.rho = 0.8;
    opts.delta_interval = 100;
    opts.n_intervals = 10000;  // 1e6 steps
    opts.exploration = 0.1;
    RngStream run = r.substream("run");
    const QLearnResult q =
        q_learning_run(make_mdp_simulator(mdp), 2, 2, opts, run);
    const double rel = (q.Q - vi.Q).cwiseAbs().maxCoeff() /
                       vi.Q.cwiseAbs().maxCoeff();
    good += rel < 0.05;
  }
  CHECK(good >= 2);
}

TEST_CASE("greedy-only q-learning flags starved pairs") {
  // Deterministic trap: both actions lead to state 0; greedy play with
  // zero exploration never tries action 1 anywhere once Q stays flat.
  Eigen::MatrixXd p(2, 2);
  p << 1.0, 0.0, 1.0, 0.0;
  Eigen::MatrixXd c(2, 2);
  c << 1.0, 2.0, 1.0, 2.0;
  const MdpModel mdp({StochasticMatrix(p), StochasticMatrix(p)}, c);
  QLearnOptions opts;
  opts.rho = 0.5;
  opts.delta_interval = 10;
  opts.n_intervals = 10;
  opts.exploration = 0.0;
  RngStream rng(3);
  const QLearnResult r =
      q_learning_run(make_mdp_simulator(mdp), 2, 2, opts, rng);
  CHECK(!r.unvisited.empty());
}

TEST_CASE("submodular constraint matrix encodes the pairwise differences") {
  const Eigen::MatrixXd M = submodular_constraint_matrix(2, 2);
  REQUIRE(M.rows() == 4);
  REQUIRE(M.cols() == 1);
  // +1 at (0,0) and (1,1); -1 at (0,1) and (1,0).
  CHECK(M(flatten_state_action(0, 0, 2), 0) == 1.0);
  CHECK(M(flatten_state_action(1, 1, 2), 0) == 1.0);
  CHECK(M(flatten_state_action(0, 1, 2), 0) == -1.0);
  CHECK(M(flatten_state_action(1, 0, 2), 0) == -1.0);

  // Identical rows sit exactly on the constraint boundary.
  Eigen::MatrixXd flatq(3, 3);
  flatq << 1, 2, 3, 1, 2, 3, 1, 2, 3;
  const Eigen::MatrixXd M3 = submodular_constraint_matrix(3, 3);
  Eigen::VectorXd vecq(9);
  for (int i = 0; i < 3; ++i) {
    for (int u = 0; u < 3; ++u) {
      vecq(flatten_state_action(i, u, 3)) = flatq(i, u);
    }
  }
  CHECK((vecq.transpose() * M3).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  // Q(i,u) = (i+1)(u+1) is strictly submodular in this orientation: every
  // constraint value is exactly +1.
  Eigen::VectorXd prodq(9);
  for (int i = 0; i < 3; ++i) {
    for (int u = 0; u < 3; ++u) {
      prodq(flatten_state_action(i, u, 3)) = (i + 1.0) * (u + 1.0);
    }
  }
  const Eigen::RowVectorXd values = prodq.transpose() * M3;
  for (int l = 0; l < values.size(); ++l) {
    CHECK(values(l) == doctest::Approx(1.0));
  }

  CHECK_THROWS_AS(submodular_constraint_matrix(1, 2), std::invalid_argument);
}

TEST_CASE("primal-dual with no constraints is bit-identical to plain q-learning") {
  RngStream rng(4);
  const MdpModel mdp = random_mdp(2, 2, rng);
  QLearnOptions opts;
  opts.rho = 0.7;
  opts.delta_interval = 50;
  opts.n_intervals = 200;
  RngStream a(77), b(77);
  const QLearnResult plain =
      q_learning_run(make_mdp_simulator(mdp), 2, 2, opts, a);
  const PrimalDualQResult pd = primal_dual_q_learning(
      make_mdp_simulator(mdp), 2, 2, Eigen::MatrixXd::Zero(4, 0), opts, b);
  CHECK((plain.Q - pd.Q).cwiseAbs().maxCoeff() == 0.0);
  CHECK(plain.policy == pd.policy);
}

TEST_CASE("primal-dual keeps multipliers at zero on a submodular instance") {
  // Identical transitions across actions make Q-differences equal cost
  // differences, so submodular costs guarantee a submodular Q*.
  Eigen::MatrixXd p(3, 3);
  p << 0.6, 0.3, 0.1, 0.2, 0.5, 0.3, 0.1, 0.3, 0.6;
  Eigen::MatrixXd c(3, 2);
  c << 2.0, 2.0, 1.0, 2.0, 0.0, 2.0;  // c(i,1)-c(i,0) = 0,1,2: increasing
  const MdpModel mdp({StochasticMatrix(p), StochasticMatrix(p)}, c);
  const Eigen::MatrixXd M = submodular_constraint_matrix(3, 2);

  // Oracle: verify Q* really is submodular before asserting on lambda.
  const ValueIterationResult vi = value_iteration(mdp, 0.8, 5000);
  Eigen::VectorXd vecq(6);
  for (int i = 0; i < 3; ++i) {
    for (int u = 0; u < 2; ++u) {
      vecq(flatten_state_action(i, u, 2)) = vi.Q(i, u);
    }
  }
  REQUIRE((vecq.transpose() * M).minCoeff() >= 0.0);

  QLearnOptions opts;
  opts.rho = 0.8;
  opts.delta_interval = 100;
  opts.n_intervals = 3000;
  opts.exploration = 0.15;
  RngStream rng(5);
  const PrimalDualQResult r =
      primal_dual_q_learning(make_mdp_simulator(mdp), 3, 2, M, opts, rng);
  CHECK(r.lambda.minCoeff() >= 0.0);
  CHECK(r.lambda.maxCoeff() < 0.05);
  Eigen::VectorXd final_vecq(6);
  for (int i = 0; i < 3; ++i) {
    for (int u = 0; u < 2; ++u) {
      final_vecq(flatten_state_action(i, u, 2)) = r.Q(i, u);
    }
  }
  CHECK((final_vecq.transpose() * M).minCoeff() >= -0.05);
}

TEST_CASE("qmdp policy") {
  Eigen::MatrixXd Q(2, 2);
  Q << 1.0, 0.0, 0.0, 1.0;
  CHECK(qmdp_policy(Q, Pmf::unit(2, 0)) == 1);  // greedy at state 0
  CHECK(qmdp_policy(Q, Pmf::unit(2, 1)) == 0);
  // Uniform belief gives both actions value 0.5: lowest index wins.
  CHECK(qmdp_policy(Q, Pmf::uniform(2)) == 0);
  // Identical columns tie to action 0.
  Eigen::MatrixXd same(2, 2);
  same << 3.0, 3.0, 1.0, 1.0;
  CHECK(qmdp_policy(same, Pmf::uniform(2)) == 0);
}
