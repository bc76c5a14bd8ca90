#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "sasim/mdp.hpp"

namespace sasim {

/// Gaussian-emission HMM with a parametrized transition matrix. Emissions
/// are y = (x+1) + sigma(x) v with v standard normal (state i has mean
/// i+1, matching 1-based state labels). The free parameter vector packs
/// the transition parameters row-major first, then the per-state sigmas:
/// theta = [psi(0,0..A-1), ..., psi(X-1,0..A-1), sigma(0..X-1)].
struct HmmModel {
  ParamKind kind = ParamKind::Exponential;
  Eigen::MatrixXd psi;    // X x A transition parameters
  Eigen::VectorXd sigma;  // X emission widths
  double sigma_lo = 0.1;
  double sigma_hi = 10.0;

  HmmModel(ParamKind k, Eigen::MatrixXd psi_in, Eigen::VectorXd sigma_in);
  /// Convenience: exponential parametrization hitting a target transition
  /// matrix exactly (psi = log P).
  static HmmModel from_transition(const Eigen::MatrixXd& P,
                                  Eigen::VectorXd sigma);

  int states() const { return static_cast<int>(psi.rows()); }
  int n_params() const {
    return static_cast<int>(psi.size() + sigma.size());
  }
  StochasticMatrix transition() const;

  /// log p(y | x = i) for every state.
  Eigen::VectorXd log_emission(double y) const;
  /// d log p(y | x = i) / d sigma_i.
  double dlog_emission_dsigma(double y, int i) const;
};

struct PredictorState {
  Eigen::VectorXd pi;  // pi_{k | k-1}
};

PredictorState uniform_predictor(int X);

struct PredictorStepResult {
  PredictorState state;
  double log_lik_inc = 0.0;  // log of the normalization, the per-step
                             // increment of the normalized log likelihood
};

/// One HMM prediction step pi <- P' B_y pi / (1' B_y pi). Emission weights
/// are max-log scaled, so far-off observations do not underflow; throws on
/// an impossible observation (zero likelihood).
PredictorStepResult predictor_step(const PredictorState& state, double y,
                                   const HmmModel& model);

/// Derivative filter w(:,l) = d pi_{k|k-1} / d theta_l for all parameter
/// components at once (the contraction factor R1 is shared). `pi` must be
/// the pre-update predictor state. Columns keep summing to zero.
Eigen::MatrixXd sensitivity_step(const Eigen::MatrixXd& w,
                                 const PredictorState& state, double y,
                                 const HmmModel& model);

/// Incremental score S_l = d/d theta_l log(1' B_y pi), assembled from the
/// sensitivity matrix and the emission derivatives.
Eigen::VectorXd incremental_score(const PredictorState& state,
                                  const Eigen::MatrixXd& w, double y,
                                  const HmmModel& model);

/// Projected stochastic-approximation step theta <- Proj(theta + eps S):
/// transition parameters are unconstrained (the parametrization keeps the
/// matrix stochastic), sigmas clip to [sigma_lo, sigma_hi].
void rmle_step(HmmModel& model, const Eigen::VectorXd& score, double eps);

struct HmmSample {
  std::vector<int> states;
  std::vector<double> observations;
};

HmmSample simulate_hmm(const HmmModel& model, int n, RngStream& rng,
                       int x0 = 0);

struct RmleResult {
  HmmModel model;
  double normalized_log_lik = 0.0;
};

/// Full online RMLE pass over an observation sequence.
RmleResult rmle_run(HmmModel model, const std::vector<double>& observations,
                    double eps);

/// Normalized log likelihood (1/n) sum log(1' B_y pi) of a fixed model.
double normalized_log_likelihood(const HmmModel& model,
                                 const std::vector<double>& observations);

// Observation files: one float per line.
std::vector<double> read_observations(const std::string& path);
void write_observations(const std::string& path,
                        const std::vector<double>& ys);

// ---------------------------------------------------------------------------
// LMS tracking of a slow Markov hypermodel
// ---------------------------------------------------------------------------

/// theta <- theta + mu phi (y - phi' theta).
void lms_step(Eigen::VectorXd& theta, const Eigen::VectorXd& phi, double y,
              double mu);

/// Hypermodel: a slow chain with transition I + eps_slow * Q jumping between
/// the rows of `values` (one true parameter vector per hyper-state).
struct SlowChainModel {
  Eigen::MatrixXd Q_gen;   // generator: off-diagonals >= 0, rows sum to 0
  double eps_slow = 1e-4;
  Eigen::MatrixXd values;  // X x r

  SlowChainModel(Eigen::MatrixXd Q, double eps, Eigen::MatrixXd vals);
  StochasticMatrix transition() const;  // I + eps_slow Q, validated
};

using RegressionLaw = std::function<Eigen::VectorXd(RngStream& rng)>;

/// Default (A2) regression vectors: i.i.d. uniform on the sphere of radius
/// sqrt(r), so E[phi phi'] = I.
RegressionLaw sphere_regressors(int r);

struct TrackOptions {
  long n_steps = 100000;
  long burn_in = 1000;
  double noise_sd = 0.1;  // bounded zero-mean noise (uniform)
  RegressionLaw regressors;  // defaults to sphere_regressors(r)
};

struct TrackResult {
  double mse = 0.0;                // time-averaged |theta_hat - theta|^2
  std::vector<double> error_sq;    // per-step squared error
  std::vector<int> hyper_states;
};

/// Simulate the hypermodel and run LMS on y = phi' theta(x) + v; reports
/// the post-burn-in mean squared tracking error.
TrackResult slow_chain_track(const SlowChainModel& model, double mu,
                             const TrackOptions& opts, RngStream& rng);

}  // namespace sasim
