#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "sasim/rng.hpp"

namespace sasim {

/// Agent-level transition law: pmf over the L agent states for an agent in
/// state i, given the exogenous state and the current population fractions.
using PopulationKernel = std::function<Eigen::VectorXd(
    int i, int psi_exo, const Eigen::VectorXd& theta_pop)>;

/// Integer occupancy bookkeeping: counts sum to the agent total exactly, so
/// the population fractions carry no floating-point drift.
struct PopulationState {
  Eigen::VectorXi counts;

  static PopulationState init(const Eigen::VectorXi& counts);
  int agents() const { return counts.sum(); }
  Eigen::VectorXd fractions() const;
};

/// One population step: pick an agent uniformly (equivalently its state
/// with probability counts_i / M), draw its next state from the kernel, and
/// move one unit of mass.
void population_step(PopulationState& pop, const PopulationKernel& kernel,
                     int psi_exo, RngStream& rng);

/// Expected one-step increment scaled by M:
/// H = sum_i theta(i) sum_j (e_j - e_i) P_ij(psi, theta). Components sum to
/// zero for any kernel.
Eigen::VectorXd drift_H(const Eigen::VectorXd& theta_pop,
                        const PopulationKernel& kernel, int psi_exo);

/// Deterministic mean-field update theta <- theta + H / M; throws if the
/// update exits the simplex beyond round-off (an invalid kernel).
void mean_field_step(Eigen::VectorXd& theta_bar, const PopulationKernel& kernel,
                     int psi_exo, int M);

/// Two-state adoption kernel used by the reference experiments:
/// P(1->2) = a + b * theta(2), P(2->1) = c.
PopulationKernel adoption_kernel(double a, double b, double c);

struct DeviationRow {
  int M = 0;
  int run = 0;
  double max_deviation = 0.0;  // max_k |theta_bar_k - theta_k|_inf, k <= N
};

struct DeviationOptions {
  int runs = 50;
  std::vector<int> M_values = {100, 1000, 10000};
  // horizon per run; 0 means N = M (the regime the deviation bound covers)
  long horizon = 0;
  std::vector<int> exo_path;  // empty = constant exogenous state 0
  Eigen::VectorXd theta0;     // initial fractions; empty = uniform
};

/// For each population size, simulate the random population and the
/// mean-field recursion side by side from the same start and record the
/// max deviation per run.
std::vector<DeviationRow> deviation_experiment(const PopulationKernel& kernel,
                                               int L,
                                               const DeviationOptions& opts,
                                               RngStream& rng);

/// Median max-deviation per M value, in the order of opts.M_values.
std::vector<double> deviation_medians(const std::vector<DeviationRow>& rows,
                                      const std::vector<int>& M_values);

}  // namespace sasim
