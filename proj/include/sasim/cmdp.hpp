#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "sasim/policy_gradient.hpp"

namespace sasim {

/// Average-cost MDP with L expectation constraints
/// sum pi(i,a) beta_l(i,a) <= gamma_l.
struct CmdpModel {
  MdpModel mdp;
  std::vector<Eigen::MatrixXd> beta;  // L matrices, X x U
  Eigen::VectorXd gamma;              // L levels

  CmdpModel(MdpModel m, std::vector<Eigen::MatrixXd> constraints,
            Eigen::VectorXd levels);
  int n_constraints() const { return static_cast<int>(beta.size()); }
};

/// The X = 2, U = 2, L = 1 instance the training tests run against.
CmdpModel reference_cmdp();

/// Exact constraint value B_l(theta) = sum pi_theta(i,a) beta_l(i,a) (the
/// raw expectation, levels not subtracted).
Eigen::VectorXd exact_constraint_values(const CmdpModel& cmdp,
                                        const ActionProbabilityMatrix& theta);

/// Smoothed tracker step for the constraint violations: B_hat_l +=
/// sqrt(eps) * (batch mean of beta_l(z) - gamma_l - B_hat_l). The tracker
/// holds violations (levels subtracted), which is what the multiplier
/// updates consume.
void constraint_estimate_update(Eigen::VectorXd& B_hat, const CmdpModel& cmdp,
                                const BatchTrajectory& batch, double eps);

/// Augmented-Lagrangian primal-dual step:
///   psi    -= eps (grad_C + sum_l grad_B_l max[0, lambda_l + Delta B_hat_l])
///   lambda` = max[(1 - eps/Delta) lambda, lambda + eps B_hat]  (elementwise)
/// Requires eps < Delta so the shrink factor stays positive.
void primal_dual_update(Eigen::MatrixXd& psi, Eigen::VectorXd& lambda,
                        const Eigen::MatrixXd& grad_C,
                        const std::vector<Eigen::MatrixXd>& grad_B,
                        const Eigen::VectorXd& B_hat, double eps, double Delta);

struct CmdpTrainOptions {
  int batch_size = 200;
  long n_batches = 2000;
  double eps = 0.005;
  double Delta = 100.0;
  PgEstimator estimator = PgEstimator::Wd;
  int wd_burn_in = 100;
};

struct CmdpTrainRecord {
  Eigen::MatrixXd psi;
  Eigen::VectorXd lambda;
  Eigen::VectorXd B_hat;
  double exact_cost = 0.0;
  Eigen::VectorXd exact_B;  // raw constraint values
};

/// Full primal-dual training loop; every batch logs exact diagnostics
/// (average cost and constraint values via the stationary distribution).
std::vector<CmdpTrainRecord> cmdp_train(const CmdpModel& cmdp,
                                        const PolicyParam& psi0,
                                        const CmdpTrainOptions& opts,
                                        RngStream& rng);

struct CmdpGridResult {
  Eigen::MatrixXd theta;
  double cost = 0.0;
  Eigen::VectorXd constraint_values;
  bool feasible = false;
};

/// Exhaustive simplex-grid search over randomized policies (ground truth
/// for small instances): returns the feasible grid point of least exact
/// cost. Requires X * (U - 1) <= 4.
CmdpGridResult cmdp_grid_oracle(const CmdpModel& cmdp, int grid_points_per_axis);

// File format: the MDP block, then L constraint matrices, then the level
// vector as a 1 x L matrix.
CmdpModel read_cmdp(std::istream& in);
void write_cmdp(std::ostream& out, const CmdpModel& cmdp);
CmdpModel read_cmdp_file(const std::string& path);
void write_cmdp_file(const std::string& path, const CmdpModel& cmdp);

}  // namespace sasim
