#include "sasim/hmm.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sasim {

HmmModel::HmmModel(ParamKind k, Eigen::MatrixXd psi_in,
                   Eigen::VectorXd sigma_in)
    : kind(k), psi(std::move(psi_in)), sigma(std::move(sigma_in)) {
  const int X = static_cast<int>(psi.rows());
  const int want_cols = kind == ParamKind::Exponential ? X : X - 1;
  if (X < 1 || psi.cols() != want_cols) {
    throw std::invalid_argument("HmmModel: psi shape mismatch");
  }
  if (sigma.size() != X || (sigma.array() <= 0.0).any()) {
    throw std::invalid_argument("HmmModel: sigma must be positive per state");
  }
}

HmmModel HmmModel::from_transition(const Eigen::MatrixXd& P,
                                   Eigen::VectorXd sigma) {
  if ((P.array() <= 0.0).any()) {
    throw std::invalid_argument(
        "HmmModel::from_transition: needs strictly positive entries");
  }
  return HmmModel(ParamKind::Exponential, P.array().log().matrix(),
                  std::move(sigma));
}

StochasticMatrix HmmModel::transition() const {
  PolicyParam p{kind, psi};
  return StochasticMatrix(theta_from_params(p, states()).mat());
}

Eigen::VectorXd HmmModel::log_emission(double y) const {
  const int X = states();
  Eigen::VectorXd lp(X);
  for (int i = 0; i < X; ++i) {
    const double mean = i + 1.0;
    const double z = (y - mean) / sigma(i);
    lp(i) = -0.5 * z * z - std::log(sigma(i)) -
            0.5 * std::log(2.0 * std::numbers::pi);
  }
  return lp;
}

double HmmModel::dlog_emission_dsigma(double y, int i) const {
  const double mean = i + 1.0;
  const double d = y - mean;
  return d * d / (sigma(i) * sigma(i) * sigma(i)) - 1.0 / sigma(i);
}

PredictorState uniform_predictor(int X) {
  return PredictorState{Eigen::VectorXd::Constant(X, 1.0 / X)};
}

namespace {

// Emission weights scaled by exp(-max log), shared by the filter and the
// derivative recursions (every expression below is invariant to this
// scaling as long as the emission derivatives are scaled identically).
struct EmissionScaled {
  Eigen::VectorXd b;      // scaled densities
  double max_log = 0.0;
  double denom = 0.0;     // b' pi
};

EmissionScaled scale_emissions(const HmmModel& model,
                               const Eigen::VectorXd& pi, double y) {
  EmissionScaled e;
  const Eigen::VectorXd lp = model.log_emission(y);
  e.max_log = lp.maxCoeff();
  e.b = (lp.array() - e.max_log).exp();
  e.denom = e.b.dot(pi);
  if (!(e.denom > 0.0) || !std::isfinite(e.denom)) {
    throw std::runtime_error("hmm predictor: zero observation likelihood");
  }
  return e;
}

}  // namespace

PredictorStepResult predictor_step(const PredictorState& state, double y,
                                   const HmmModel& model) {
  const EmissionScaled e = scale_emissions(model, state.pi, y);
  const StochasticMatrix P = model.transition();
  Eigen::VectorXd next = P.mat().transpose() * e.b.cwiseProduct(state.pi);
  next /= e.denom;
  // Renormalize every step so round-off never accumulates.
  next = next.cwiseMax(0.0);
  next /= next.sum();
  return {PredictorState{std::move(next)}, std::log(e.denom) + e.max_log};
}

Eigen::MatrixXd sensitivity_step(const Eigen::MatrixXd& w,
                                 const PredictorState& state, double y,
                                 const HmmModel& model) {
  const int X = model.states();
  const int A = static_cast<int>(model.psi.cols());
  const int p = model.n_params();
  if (w.rows() != X || w.cols() != p) {
    throw std::invalid_argument("sensitivity_step: w must be X x n_params");
  }
  const EmissionScaled e = scale_emissions(model, state.pi, y);
  const StochasticMatrix P = model.transition();
  const Eigen::VectorXd bpi = e.b.cwiseProduct(state.pi);

  // R1 = P' [I - b pi 1' / (b'pi)] diag(b) / (b'pi)
  Eigen::MatrixXd center =
      Eigen::MatrixXd::Identity(X, X) -
      bpi * Eigen::RowVectorXd::Ones(X) / e.denom;
  Eigen::MatrixXd R1 =
      P.mat().transpose() * center * (e.b / e.denom).asDiagonal();

  Eigen::MatrixXd w_next = R1 * w;

  // Transition-parameter columns get the (dP'/d theta_l) b pi / (b'pi) term.
  const PolicyJacobian jac = dtheta_dpsi(PolicyParam{model.kind, model.psi}, X);
  for (int i = 0; i < X; ++i) {
    for (int a = 0; a < A; ++a) {
      const int l = i * A + a;
      // dP(i,j)/d psi(i,a) = jac.by_state[i](a, j); other rows unaffected.
      // (dP' bpi)(j) = sum_row dP(row, j) bpi(row) = dP(i,j) bpi(i).
      for (int j = 0; j < X; ++j) {
        w_next(j, l) += jac.by_state[i](a, j) * bpi(i) / e.denom;
      }
    }
  }
  // Sigma columns get the emission-derivative term
  // P' [I - bpi 1'/(b'pi)] (dB/dsigma_i) pi / (b'pi); dB has a single
  // nonzero diagonal entry b_i * dlog b_i.
  for (int i = 0; i < X; ++i) {
    const int l = X * A + i;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(X);
    v(i) = e.b(i) * model.dlog_emission_dsigma(y, i) * state.pi(i) / e.denom;
    w_next.col(l) += P.mat().transpose() * (center * v);
  }
  return w_next;
}

Eigen::VectorXd incremental_score(const PredictorState& state,
                                  const Eigen::MatrixXd& w, double y,
                                  const HmmModel& model) {
  const int X = model.states();
  const int A = static_cast<int>(model.psi.cols());
  const EmissionScaled e = scale_emissions(model, state.pi, y);
  Eigen::VectorXd score(model.n_params());
  // 1' B w part for every component.
  for (int l = 0; l < model.n_params(); ++l) {
    score(l) = e.b.dot(w.col(l)) / e.denom;
  }
  // 1' (dB/d sigma_i) pi part; transition components have dB = 0.
  for (int i = 0; i < X; ++i) {
    score(X * A + i) +=
        e.b(i) * model.dlog_emission_dsigma(y, i) * state.pi(i) / e.denom;
  }
  return score;
}

void rmle_step(HmmModel& model, const Eigen::VectorXd& score, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("rmle_step: eps must be > 0");
  const int X = model.states();
  const int A = static_cast<int>(model.psi.cols());
  if (score.size() != model.n_params()) {
    throw std::invalid_argument("rmle_step: score size mismatch");
  }
  for (int i = 0; i < X; ++i) {
    for (int a = 0; a < A; ++a) model.psi(i, a) += eps * score(i * A + a);
  }
  for (int i = 0; i < X; ++i) {
    const double s = model.sigma(i) + eps * score(X * A + i);
    model.sigma(i) = std::clamp(s, model.sigma_lo, model.sigma_hi);
  }
  if (!model.psi.allFinite()) {
    throw std::runtime_error("rmle_step: non-finite transition parameters");
  }
}

HmmSample simulate_hmm(const HmmModel& model, int n, RngStream& rng, int x0) {
  const StochasticMatrix P = model.transition();
  HmmSample out;
  out.states.reserve(n);
  out.observations.reserve(n);
  int x = x0;
  for (int k = 0; k < n; ++k) {
    out.states.push_back(x);
    out.observations.push_back(x + 1.0 + model.sigma(x) * rng.normal());
    x = inverse_cdf_step(P, x, rng.uniform());
  }
  return out;
}

RmleResult rmle_run(HmmModel model, const std::vector<double>& observations,
                    double eps) {
  const int X = model.states();
  PredictorState state = uniform_predictor(X);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(X, model.n_params());
  double loglik = 0.0;
  for (double y : observations) {
    const Eigen::VectorXd S = incremental_score(state, w, y, model);
    rmle_step(model, S, eps);
    // Filter and derivative advance under the freshly updated parameters.
    w = sensitivity_step(w, state, y, model);
    const PredictorStepResult r = predictor_step(state, y, model);
    state = r.state;
    loglik += r.log_lik_inc;
  }
  return {std::move(model),
          observations.empty() ? 0.0 : loglik / observations.size()};
}

double normalized_log_likelihood(const HmmModel& model,
                                 const std::vector<double>& observations) {
  // Frozen parameters: hoist the transition matrix out of the loop.
  const StochasticMatrix P = model.transition();
  Eigen::VectorXd pi = uniform_predictor(model.states()).pi;
  double loglik = 0.0;
  for (double y : observations) {
    const EmissionScaled e = scale_emissions(model, pi, y);
    loglik += std::log(e.denom) + e.max_log;
    pi = P.mat().transpose() * e.b.cwiseProduct(pi) / e.denom;
    pi = pi.cwiseMax(0.0);
    pi /= pi.sum();
  }
  return observations.empty() ? 0.0 : loglik / observations.size();
}

std::vector<double> read_observations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<double> ys;
  double v = 0.0;
  while (in >> v) ys.push_back(v);
  return ys;
}

void write_observations(const std::string& path,
                        const std::vector<double>& ys) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.precision(17);
  for (double y : ys) out << y << '\n';
}

void lms_step(Eigen::VectorXd& theta, const Eigen::VectorXd& phi, double y,
              double mu) {
  if (mu <= 0.0) throw std::invalid_argument("lms_step: mu must be > 0");
  theta += mu * phi * (y - phi.dot(theta));
}

SlowChainModel::SlowChainModel(Eigen::MatrixXd Q, double eps,
                               Eigen::MatrixXd vals)
    : Q_gen(std::move(Q)), eps_slow(eps), values(std::move(vals)) {
  if (Q_gen.rows() != Q_gen.cols() || Q_gen.rows() != values.rows()) {
    throw std::invalid_argument("SlowChainModel: dimension mismatch");
  }
  for (Eigen::Index i = 0; i < Q_gen.rows(); ++i) {
    if (std::abs(Q_gen.row(i).sum()) > 1e-12) {
      throw std::invalid_argument("SlowChainModel: generator rows must sum to 0");
    }
    for (Eigen::Index j = 0; j < Q_gen.cols(); ++j) {
      if (i != j && Q_gen(i, j) < 0.0) {
        throw std::invalid_argument(
            "SlowChainModel: off-diagonal generator entries must be >= 0");
      }
    }
  }
  transition();  // validates I + eps Q is stochastic
}

StochasticMatrix SlowChainModel::transition() const {
  const int X = static_cast<int>(Q_gen.rows());
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(X, X) + eps_slow * Q_gen;
  if ((P.array() < -1e-12).any()) {
    throw std::invalid_argument(
        "SlowChainModel: eps_slow too large, I + eps Q has negative entries");
  }
  return StochasticMatrix(std::move(P));
}

RegressionLaw sphere_regressors(int r) {
  return [r](RngStream& rng) -> Eigen::VectorXd {
    Eigen::VectorXd g(r);
    for (int i = 0; i < r; ++i) g(i) = rng.normal();
    const double norm = g.norm();
    if (norm == 0.0) return Eigen::VectorXd::Ones(r);
    return (std::sqrt(static_cast<double>(r)) / norm) * g;
  };
}

TrackResult slow_chain_track(const SlowChainModel& model, double mu,
                             const TrackOptions& opts, RngStream& rng) {
  const int r = static_cast<int>(model.values.cols());
  const StochasticMatrix P = model.transition();
  const RegressionLaw law =
      opts.regressors ? opts.regressors : sphere_regressors(r);
  TrackResult res;
  res.error_sq.reserve(opts.n_steps);
  res.hyper_states.reserve(opts.n_steps);

  int x = 0;
  Eigen::VectorXd theta_hat = Eigen::VectorXd::Zero(r);
  const double noise_half = opts.noise_sd * std::sqrt(3.0);  // uniform width
  double acc = 0.0;
  long counted = 0;
  for (long n = 0; n < opts.n_steps; ++n) {
    const Eigen::VectorXd truth = model.values.row(x).transpose();
    const Eigen::VectorXd phi = law(rng);
    const double v = noise_half * (2.0 * rng.uniform() - 1.0);
    const double y = phi.dot(truth) + v;
    lms_step(theta_hat, phi, y, mu);
    const double err = (theta_hat - truth).squaredNorm();
    res.error_sq.push_back(err);
    res.hyper_states.push_back(x);
    if (n >= opts.burn_in) {
      acc += err;
      ++counted;
    }
    x = inverse_cdf_step(P, x, rng.uniform());
  }
  res.mse = counted > 0 ? acc / counted : 0.0;
  return res;
}

}  // namespace sasim
