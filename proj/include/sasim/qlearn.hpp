#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>
#include <vector>

#include "sasim/mdp.hpp"
#include "sasim/rng.hpp"

namespace sasim {

/// Black-box controlled system: returns (next state, cost) for (x, u).
using QSimulator =
    std::function<std::pair<int, double>(int x, int u, RngStream& rng)>;

QSimulator make_mdp_simulator(const MdpModel& mdp);

/// One Q-factor backup: Q(x,u) += eps * [c + rho min_u' Q(x',u') - Q(x,u)].
/// Only entry (x,u) changes.
void q_update(Eigen::MatrixXd& Q, int x, int u, double cost, int x_next,
              double rho, double eps);

/// Visit-count step size eps / count(x,u); the count must already include
/// the current visit.
double visit_step_size(const Eigen::MatrixXi& counts, int x, int u,
                       double eps_base);

struct QLearnOptions {
  double rho = 0.9;
  double eps_base = 1.0;       // numerator of the visit-count step
  int delta_interval = 100;    // steps per frozen-policy interval
  long n_intervals = 1000;
  double exploration = 0.1;    // epsilon-greedy overlay; 0 = greedy only
  int x0 = 0;
};

struct QLearnResult {
  Eigen::MatrixXd Q;
  std::vector<int> policy;  // greedy, lowest index on ties
  Eigen::MatrixXi visits;
  std::vector<std::pair<int, int>> unvisited;  // flagged (x,u) pairs
};

/// Two-time-scale Q-learning: the policy is frozen for delta_interval steps
/// (fast scale) and refreshed as the per-state argmin of Q (slow scale),
/// with an epsilon-greedy overlay so every pair keeps being visited.
QLearnResult q_learning_run(const QSimulator& sim, int X, int U,
                            const QLearnOptions& opts, RngStream& rng);

/// Submodularity of Q as linear inequalities vec(Q) M >= 0: one column per
/// (i, u) with 1 <= i <= X-1, 1 <= u <= U-1 encoding
/// Q(i+1,u+1) - Q(i+1,u) - Q(i,u+1) + Q(i,u) >= 0 (entries in {-1,0,1},
/// vec index = x*U + u).
Eigen::MatrixXd submodular_constraint_matrix(int X, int U);

struct PrimalDualQResult {
  Eigen::MatrixXd Q;
  Eigen::VectorXd lambda;
  std::vector<int> policy;
  Eigen::MatrixXi visits;
};

/// Q-learning with the submodularity constraint enforced through Lagrange
/// multipliers: the visited entry moves along f(Q) + (M lambda) and lambda
/// along max(lambda - eps vec(Q) M, 0), both on the visit-count step size.
/// With an empty M this reduces bit-for-bit to q_learning_run.
PrimalDualQResult primal_dual_q_learning(const QSimulator& sim, int X, int U,
                                         const Eigen::MatrixXd& M,
                                         const QLearnOptions& opts,
                                         RngStream& rng);

/// Belief-weighted greedy action argmin_u sum_x belief(x) Q(x,u); Q entries
/// are costs, ties break to the lowest action index.
int qmdp_policy(const Eigen::MatrixXd& Q, const Pmf& belief);

}  // namespace sasim
