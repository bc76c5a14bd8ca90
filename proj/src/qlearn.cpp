#include "sasim/qlearn.hpp"

#include <stdexcept>
#include <string>

namespace sasim {

QSimulator make_mdp_simulator(const MdpModel& mdp) {
  return [&mdp](int x, int u, RngStream& rng) {
    const int x_next = inverse_cdf_step(mdp.P[u], x, rng.uniform());
    return std::make_pair(x_next, mdp.cost(x, u));
  };
}

void q_update(Eigen::MatrixXd& Q, int x, int u, double cost, int x_next,
              double rho, double eps) {
  if (!(rho > 0.0 && rho < 1.0)) {
    throw std::invalid_argument("q_update: rho must lie in (0,1)");
  }
  if (!(eps >= 0.0 && eps <= 1.0)) {
    throw std::invalid_argument("q_update: eps must lie in [0,1]");
  }
  const double target = cost + rho * Q.row(x_next).minCoeff();
  Q(x, u) += eps * (target - Q(x, u));
}

double visit_step_size(const Eigen::MatrixXi& counts, int x, int u,
                       double eps_base) {
  if (counts(x, u) <= 0) {
    throw std::invalid_argument("visit_step_size: pair (" + std::to_string(x) +
                                "," + std::to_string(u) + ") has zero count");
  }
  return eps_base / counts(x, u);
}

namespace {

std::vector<int> greedy_policy(const Eigen::MatrixXd& Q) {
  std::vector<int> policy(Q.rows());
  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
    int best = 0;
    for (Eigen::Index u = 1; u < Q.cols(); ++u) {
      if (Q(i, u) < Q(i, best)) best = static_cast<int>(u);
    }
    policy[static_cast<size_t>(i)] = best;
  }
  return policy;
}

// Shared fast-scale loop; `constrained` adds the multiplier terms.
template <typename EntryHook>
void run_two_timescale(const QSimulator& sim, int X, int U,
                       const QLearnOptions& opts, RngStream& rng,
                       Eigen::MatrixXd& Q, Eigen::MatrixXi& visits,
                       EntryHook&& hook) {
  int x = opts.x0;
  std::vector<int> policy(X, 0);
  for (long interval = 0; interval < opts.n_intervals; ++interval) {
    policy = greedy_policy(Q);  // slow-scale refresh
    for (int step = 0; step < opts.delta_interval; ++step) {
      int u = policy[x];
      if (opts.exploration > 0.0 && rng.uniform() < opts.exploration) {
        u = rng.uniform_int(U);
      }
      const auto [x_next, cost] = sim(x, u, rng);
      visits(x, u) += 1;
      const double eps = visit_step_size(visits, x, u, opts.eps_base);
      hook(x, u, cost, x_next, eps);
      x = x_next;
    }
  }
}

}  // namespace

QLearnResult q_learning_run(const QSimulator& sim, int X, int U,
                            const QLearnOptions& opts, RngStream& rng) {
  QLearnResult res;
  res.Q = Eigen::MatrixXd::Zero(X, U);
  res.visits = Eigen::MatrixXi::Zero(X, U);
  run_two_timescale(sim, X, U, opts, rng, res.Q, res.visits,
                    [&](int x, int u, double cost, int x_next, double eps) {
                      q_update(res.Q, x, u, cost, x_next, opts.rho, eps);
                    });
  res.policy = greedy_policy(res.Q);
  for (int i = 0; i < X; ++i) {
    for (int u = 0; u < U; ++u) {
      if (res.visits(i, u) == 0) res.unvisited.emplace_back(i, u);
    }
  }
  return res;
}

Eigen::MatrixXd submodular_constraint_matrix(int X, int U) {
  if (X < 2 || U < 2) {
    throw std::invalid_argument(
        "submodular_constraint_matrix: need X >= 2 and U >= 2");
  }
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(X * U, (X - 1) * (U - 1));
  int col = 0;
  for (int i = 0; i + 1 < X; ++i) {
    for (int u = 0; u + 1 < U; ++u) {
      M(flatten_state_action(i, u, U), col) = 1.0;
      M(flatten_state_action(i, u + 1, U), col) = -1.0;
      M(flatten_state_action(i + 1, u, U), col) = -1.0;
      M(flatten_state_action(i + 1, u + 1, U), col) = 1.0;
      ++col;
    }
  }
  return M;
}

PrimalDualQResult primal_dual_q_learning(const QSimulator& sim, int X, int U,
                                         const Eigen::MatrixXd& M,
                                         const QLearnOptions& opts,
                                         RngStream& rng) {
  const long L = M.cols();
  if (L > 0 && M.rows() != X * U) {
    throw std::invalid_argument("primal_dual_q_learning: M must have X*U rows");
  }
  PrimalDualQResult res;
  res.Q = Eigen::MatrixXd::Zero(X, U);
  res.visits = Eigen::MatrixXi::Zero(X, U);
  res.lambda = Eigen::VectorXd::Zero(L);
  run_two_timescale(
      sim, X, U, opts, rng, res.Q, res.visits,
      [&](int x, int u, double cost, int x_next, double eps) {
        const double f =
            cost + opts.rho * res.Q.row(x_next).minCoeff() - res.Q(x, u);
        double multiplier_term = 0.0;
        if (L > 0) {
          multiplier_term = M.row(flatten_state_action(x, u, U)).dot(res.lambda);
        }
        res.Q(x, u) += eps * (f + multiplier_term);
        if (L > 0) {
          // vec(Q) M with vec index x*U+u; both updates share the primal step.
          Eigen::VectorXd qm(L);
          for (long l = 0; l < L; ++l) {
            double acc = 0.0;
            for (int i = 0; i < X; ++i) {
              for (int a = 0; a < U; ++a) {
                const double m = M(flatten_state_action(i, a, U), l);
                if (m != 0.0) acc += res.Q(i, a) * m;
              }
            }
            qm(l) = acc;
          }
          res.lambda = (res.lambda - eps * qm).cwiseMax(0.0);
        }
      });
  res.policy.resize(X);
  for (int i = 0; i < X; ++i) {
    int best = 0;
    for (int u = 1; u < U; ++u) {
      if (res.Q(i, u) < res.Q(i, best)) best = u;
    }
    res.policy[i] = best;
  }
  return res;
}

int qmdp_policy(const Eigen::MatrixXd& Q, const Pmf& belief) {
  if (belief.dim() != Q.rows()) {
    throw std::invalid_argument("qmdp_policy: belief dimension mismatch");
  }
  const Eigen::VectorXd values = Q.transpose() * belief.vec();
  int best = 0;
  for (Eigen::Index u = 1; u < values.size(); ++u) {
    if (values(u) < values(best)) best = static_cast<int>(u);
  }
  return best;
}

}  // namespace sasim
