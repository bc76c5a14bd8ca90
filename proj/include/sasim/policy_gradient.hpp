#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sasim/grad.hpp"
#include "sasim/mdp.hpp"

namespace sasim {

struct AugmentedState {
  int x = 0;
  int u = 0;
  bool operator==(const AugmentedState&) const = default;
};

/// One observed batch of the controlled process z = (x, u) with per-step
/// costs.
struct BatchTrajectory {
  std::vector<AugmentedState> z;
  std::vector<double> costs;
  long batch_index = 0;

  int length() const { return static_cast<int>(z.size()); }
};

/// Simulate the next N steps of the controlled chain, continuing from and
/// updating `x`.
BatchTrajectory simulate_batch(const MdpModel& mdp,
                               const ActionProbabilityMatrix& theta, int N,
                               int& x, RngStream& rng, long batch_index = 0);

/// Score-function policy-gradient estimate from one observed batch.
/// Exponential increments: component (x_k, u_k) adds 1 - theta(x_k, u_k) and
/// (x_k, a != u_k) adds -theta(x_k, a). Spherical increments follow the
/// squared-trig form: 2/tan(psi) below the taken action, -2 tan(psi) at it,
/// zero above. S_k = increment_k + beta * S_{k-1} with S reset per batch;
/// the estimate is (1/N) sum_k c_k S_k.
Eigen::MatrixXd score_gradient_mdp(const BatchTrajectory& batch,
                                   const ActionProbabilityMatrix& theta,
                                   const PolicyParam& psi, double beta = 1.0);

struct WdGradientResult {
  Eigen::MatrixXd grad;
  long anchors = 0;
  long truncations = 0;  // phantom windows cut off at the batch end
  long discarded = 0;    // parameter-free anchors whose hitting time nu
                         // never occurred inside the batch
  double mean_cost = 0.0;
};

/// Weak-derivative policy-gradient estimate with a model in hand. Simulates
/// the nominal chain for m + N steps; every post-burn-in visit to (x, a)
/// anchors component (x, a): a phantom starts at (x, u-ddot) with u-ddot
/// drawn from the negative part of the derivative of the action row, and
/// both chains then advance on the nominal's recorded uniforms until they
/// couple. Component estimate = visit frequency of (x,a) times the
/// per-anchor mean of (g_xa / theta_xa) * sum of coupled cost differences.
WdGradientResult wd_gradient_mdp(const MdpModel& mdp, const PolicyParam& psi,
                                 int m, int N, RngStream& rng);

/// Same anchored estimator evaluated for several X x U stage functions on
/// one shared nominal path and shared phantoms (the coupled windows do not
/// depend on the stage costs). Result k corresponds to stages[k]; entry 0
/// of a CMDP call is the cost, the rest are constraint functions.
std::vector<WdGradientResult> wd_gradient_mdp_multi(
    const MdpModel& mdp, const PolicyParam& psi, int m, int N, RngStream& rng,
    std::span<const Eigen::MatrixXd> stages);

/// Parameter-free variant of the weak-derivative estimate operating on an
/// observed batch (cut and paste): at an anchor k the phantom action u-ddot
/// is drawn, nu is the first j > 0 with z_{k+j} = (x_k, u-ddot), and the
/// anchor contributes sum_{j=k}^{k+nu-1} c(z_j) - nu * c_hat. Anchors whose
/// nu does not occur inside the batch are discarded and counted. c_hat
/// defaults to the batch mean cost.
WdGradientResult wd_gradient_parameter_free(
    const BatchTrajectory& batch, const ActionProbabilityMatrix& theta,
    const PolicyParam& psi, RngStream& rng,
    std::optional<double> c_hat = std::nullopt);

enum class PgEstimator { Score, Wd, WdParameterFree };

struct TrainResult {
  std::vector<Eigen::MatrixXd> psi_trajectory;  // psi_0 first
  std::vector<double> batch_mean_cost;
};

struct TrainOptions {
  StepSchedule schedule = StepSchedule::constant(0.01, 0.1);
  int batch_size = 100;
  long n_batches = 1000;
  PgEstimator estimator = PgEstimator::Wd;
  int wd_burn_in = 100;
  double score_beta = 1.0;
};

/// psi_{n+1} = psi_n - eps_n * gradient-estimate(batch n), treating the MDP
/// model as the simulator. Aborts with the batch index on a non-finite
/// iterate.
TrainResult policy_gradient_train(const MdpModel& mdp, const PolicyParam& psi0,
                                  const TrainOptions& opts, RngStream& rng);

// ---------------------------------------------------------------------------
// Estimator comparison experiment
// ---------------------------------------------------------------------------

struct EstimatorStats {
  std::string estimator;
  int N = 0;
  long batches = 0;
  Eigen::MatrixXd mean;
  Eigen::MatrixXd variance;
  Eigen::MatrixXd half_width;  // 95% over batches
  double seconds = 0.0;
  long truncations = 0;
  long discarded = 0;
};

struct VarianceComparisonReport {
  std::vector<EstimatorStats> rows;
  Eigen::MatrixXd exact_gradient;

  const EstimatorStats& find(const std::string& estimator, int N) const;
};

/// Reproduces the estimator comparison on a fixture: for each N, runs the
/// score estimator (beta = 1) and both weak-derivative variants over
/// independent batches at the policy theta(psi) and reports per-component
/// mean, variance, confidence half-widths and wall time.
VarianceComparisonReport variance_comparison_experiment(
    const MdpModel& mdp, const PolicyParam& psi, std::span<const int> Ns,
    long batches, RngStream& rng);

// ---------------------------------------------------------------------------
// Sliding-window state adapter
// ---------------------------------------------------------------------------

/// Bijective encoding of the last `window` (observation, action) pairs into
/// one state index, for driving the policy-gradient machinery on processes
/// whose true state is hidden. Missing history is padded with a reserved
/// null symbol.
class WindowCodec {
 public:
  static constexpr int kNull = -1;

  WindowCodec(int n_obs, int n_act, int window);

  int n_states() const { return n_states_; }
  int window() const { return window_; }

  /// History pairs in chronological order; only the trailing `window` pairs
  /// matter. Shorter histories are null-padded.
  int encode(std::span<const std::pair<int, int>> history) const;
  std::vector<std::pair<int, int>> decode(int index) const;

 private:
  int n_obs_, n_act_, window_, base_, n_states_;
};

}  // namespace sasim
