#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "sasim/markov.hpp"
#include "sasim/rng.hpp"

namespace sasim {

/// Finite MDP: per-action transition matrices P(u) over X states plus an
/// X x U cost matrix.
struct MdpModel {
  int X = 0;
  int U = 0;
  std::vector<StochasticMatrix> P;  // U matrices, each X x X
  Eigen::MatrixXd cost;             // X x U

  MdpModel(std::vector<StochasticMatrix> transitions, Eigen::MatrixXd costs);
};

/// The 2-state / 3-action instance used throughout the numerical
/// comparisons, together with its reference action probabilities.
MdpModel paper_fixture_mdp();
Eigen::MatrixXd paper_fixture_theta();

/// Randomized policy: theta(i,a) = P(u = a | x = i); rows on the simplex.
class ActionProbabilityMatrix {
 public:
  explicit ActionProbabilityMatrix(Eigen::MatrixXd theta);
  int states() const { return static_cast<int>(theta_.rows()); }
  int actions() const { return static_cast<int>(theta_.cols()); }
  double operator()(int i, int a) const { return theta_(i, a); }
  const Eigen::MatrixXd& mat() const { return theta_; }

 private:
  Eigen::MatrixXd theta_;
};

enum class ParamKind { Exponential, Spherical };

/// Unconstrained policy parameter psi. Exponential: X x U softmax rows.
/// Spherical: X x (U-1) squared-trig angles in radians. Either induces
/// simplex-valid action probabilities for every real psi.
struct PolicyParam {
  ParamKind kind = ParamKind::Exponential;
  Eigen::MatrixXd psi;

  int states() const { return static_cast<int>(psi.rows()); }
  int param_cols() const { return static_cast<int>(psi.cols()); }
};

/// Induced action probabilities. Softmax rows are computed with per-row max
/// subtraction; spherical rows follow the squared-cosine/sine product form.
ActionProbabilityMatrix theta_from_params(const PolicyParam& psi, int actions);

/// Derivative tensor d theta(i, abar) / d psi(i, a); entry (a, abar) of
/// by_state[i]. Spherical components whose tan factor sits within 1e-8 of a
/// pole raise an error naming (i, a).
struct PolicyJacobian {
  std::vector<Eigen::MatrixXd> by_state;  // X matrices, each A x U
};

PolicyJacobian dtheta_dpsi(const PolicyParam& psi, int actions);

/// Flattening convention for the joint process z = (x, u): index x*U + u.
inline int flatten_state_action(int x, int u, int U) { return x * U + u; }
inline std::pair<int, int> unflatten_state_action(int z, int U) {
  return {z / U, z % U};
}

/// Transition matrix of z = (x, u): entry ((i,u), (j, abar)) =
/// theta(j, abar) * P(i,j; u).
StochasticMatrix augmented_kernel(const MdpModel& mdp,
                                  const ActionProbabilityMatrix& theta);

/// Long-run average cost sum_{i,a} pi_theta(i,a) c(i,a) via the stationary
/// distribution of the augmented chain.
double average_cost(const MdpModel& mdp, const ActionProbabilityMatrix& theta);

/// Exact gradient of the average cost with respect to every psi component:
/// pi' (d P_aug / d psi) Z c with Z the fundamental matrix of the augmented
/// kernel. Returns an X x U (exponential) or X x (U-1) (spherical) matrix.
Eigen::MatrixXd exact_policy_gradient(const MdpModel& mdp,
                                      const PolicyParam& psi);

struct ValueIterationResult {
  Eigen::VectorXd V;
  Eigen::MatrixXd Q;        // from the final V
  std::vector<int> policy;  // per-state argmin, lowest index on ties
  double bound = 0.0;       // rho^{N+1}/(1-rho) * max |c|
};

/// N Bellman backups from V_0 = 0 for the discounted problem.
ValueIterationResult value_iteration(const MdpModel& mdp, double rho, int N);

struct MdpStep {
  int x = 0;
  int u = 0;
  double cost = 0.0;
};

/// n steps of the controlled chain from x0: u_k from theta row x_k, then
/// x_{k+1} from P(u_k) row x_k, inverse-CDF draws throughout.
std::vector<MdpStep> simulate_mdp(const MdpModel& mdp,
                                  const ActionProbabilityMatrix& theta, int n,
                                  int x0, RngStream& rng);

// Text format: header "X U", then the U transition matrices, then the cost
// matrix, each in the shared matrix format.
MdpModel read_mdp(std::istream& in);
void write_mdp(std::ostream& out, const MdpModel& mdp);
MdpModel read_mdp_file(const std::string& path);
void write_mdp_file(const std::string& path, const MdpModel& mdp);

}  // namespace sasim
