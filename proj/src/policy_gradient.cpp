#include "sasim/policy_gradient.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sasim {

namespace {

double clock_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// Number of psi components per state: every action for the exponential
// parametrization, the first U-1 for spherical.
int param_cols_for(const PolicyParam& psi, int U) {
  return psi.kind == ParamKind::Exponential ? U : U - 1;
}

// Phantom action distribution at an anchor on (x, a): the negative part of
// d theta(x, .) / d psi_{xa} normalized to a pmf. Returns the raw mass so
// callers can fold any renormalization into the scale factor.
double phantom_action_pmf(const ActionProbabilityMatrix& theta,
                          const PolicyParam& psi, int x, int a,
                          Eigen::VectorXd& pmf) {
  const int U = theta.actions();
  pmf.setZero(U);
  double mass = 0.0;
  if (psi.kind == ParamKind::Exponential) {
    for (int ab = 0; ab < U; ++ab) {
      if (ab == a) continue;
      pmf(ab) = theta(x, ab);
      mass += pmf(ab);
    }
  } else {
    const double t = std::tan(psi.psi(x, a));
    const double denom = theta(x, a) * t * t;
    for (int ab = a + 1; ab < U; ++ab) {
      pmf(ab) = theta(x, ab) / denom;
      mass += pmf(ab);
    }
  }
  if (mass > 0.0) pmf /= mass;
  return mass;
}

// Per-anchor weight for component (x, a): g_xa / theta_xa. For the
// exponential parametrization that is 1 - theta_xa, which coincides with
// the raw phantom mass; for spherical it is -2 tan(psi_xa). The raw
// spherical mass is 1 analytically (the sin^2 products telescope), so
// renormalizing the phantom pmf only sponges up round-off.
double anchor_weight(const ActionProbabilityMatrix& theta,
                     const PolicyParam& psi, int x, int a, double raw_mass) {
  if (psi.kind == ParamKind::Exponential) {
    (void)theta;
    return raw_mass;
  }
  return -2.0 * std::tan(psi.psi(x, a));
}

}  // namespace

BatchTrajectory simulate_batch(const MdpModel& mdp,
                               const ActionProbabilityMatrix& theta, int N,
                               int& x, RngStream& rng, long batch_index) {
  BatchTrajectory b;
  b.batch_index = batch_index;
  b.z.reserve(N);
  b.costs.reserve(N);
  Eigen::VectorXd row(mdp.U);
  for (int k = 0; k < N; ++k) {
    row = theta.mat().row(x).transpose();
    const int u = rng.categorical({row.data(), static_cast<size_t>(mdp.U)});
    b.z.push_back({x, u});
    b.costs.push_back(mdp.cost(x, u));
    x = inverse_cdf_step(mdp.P[u], x, rng.uniform());
  }
  return b;
}

Eigen::MatrixXd score_gradient_mdp(const BatchTrajectory& batch,
                                   const ActionProbabilityMatrix& theta,
                                   const PolicyParam& psi, double beta) {
  if (batch.length() == 0) {
    throw std::invalid_argument("score_gradient_mdp: empty batch");
  }
  if (!(beta > 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("score_gradient_mdp: beta must lie in (0,1]");
  }
  const int X = theta.states();
  const int U = theta.actions();
  const int A = param_cols_for(psi, U);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(X, A);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(X, A);
  const int N = batch.length();
  for (int k = 0; k < N; ++k) {
    const auto [x, u] = batch.z[k];
    S *= beta;
    if (psi.kind == ParamKind::Exponential) {
      if (theta(x, u) <= 0.0) {
        throw std::runtime_error(
            "score_gradient_mdp: visited action has zero probability at step " +
            std::to_string(k));
      }
      for (int a = 0; a < U; ++a) {
        S(x, a) += (a == u) ? 1.0 - theta(x, a) : -theta(x, a);
      }
    } else {
      for (int a = 0; a < A; ++a) {
        if (a > u) continue;
        const double t = std::tan(psi.psi(x, a));
        if (std::abs(std::cos(psi.psi(x, a))) < 1e-8 ||
            std::abs(std::sin(psi.psi(x, a))) < 1e-8) {
          throw std::runtime_error("score_gradient_mdp: spherical pole at (" +
                                   std::to_string(x) + "," + std::to_string(a) +
                                   ")");
        }
        S(x, a) += (a == u) ? -2.0 * t : 2.0 / t;
      }
    }
    acc += batch.costs[k] * S;
  }
  return acc / static_cast<double>(N);
}

WdGradientResult wd_gradient_mdp(const MdpModel& mdp, const PolicyParam& psi,
                                 int m, int N, RngStream& rng) {
  const Eigen::MatrixXd stage = mdp.cost;
  return wd_gradient_mdp_multi(mdp, psi, m, N, rng, {&stage, 1}).front();
}

std::vector<WdGradientResult> wd_gradient_mdp_multi(
    const MdpModel& mdp, const PolicyParam& psi, int m, int N, RngStream& rng,
    std::span<const Eigen::MatrixXd> stages) {
  if (m < 1 || N < 1) {
    throw std::invalid_argument("wd_gradient_mdp: need m >= 1 and N >= 1");
  }
  if (stages.empty()) {
    throw std::invalid_argument("wd_gradient_mdp: no stage functions");
  }
  const ActionProbabilityMatrix theta = theta_from_params(psi, mdp.U);
  const int X = mdp.X;
  const int U = mdp.U;
  const int A = param_cols_for(psi, U);
  const int total = m + N;
  const size_t S = stages.size();

  // Nominal path plus the uniforms that drove it, retained so phantoms can
  // replay the same randomness (the coupling mechanism).
  std::vector<AugmentedState> z(total);
  std::vector<double> u_state(total), u_action(total);
  RngStream path_rng = rng.substream("wd-nominal");
  RngStream branch_rng = rng.substream("wd-branch");
  Eigen::VectorXd row(std::max(X, U));
  {
    int x = 0;
    row.head(U) = theta.mat().row(x).transpose();
    int u = path_rng.categorical({row.data(), static_cast<size_t>(U)});
    z[0] = {x, u};
    for (int k = 1; k < total; ++k) {
      u_state[k] = path_rng.uniform();
      x = inverse_cdf_step(mdp.P[u], x, u_state[k]);
      u_action[k] = path_rng.uniform();
      row.head(U) = theta.mat().row(x).transpose();
      u = inverse_cdf_index({row.data(), static_cast<size_t>(U)}, u_action[k]);
      z[k] = {x, u};
    }
  }

  std::vector<WdGradientResult> out(S);
  std::vector<Eigen::MatrixXd> sum_d(S, Eigen::MatrixXd::Zero(X, A));
  for (auto& o : out) o.grad = Eigen::MatrixXd::Zero(X, A);
  Eigen::MatrixXi n_anchor = Eigen::MatrixXi::Zero(X, A);
  Eigen::MatrixXi busy_until = Eigen::MatrixXi::Constant(X, A, 0);
  Eigen::VectorXd pmf(U);
  std::vector<double> diff(S);

  double cost_sum = 0.0;
  long truncations = 0, anchors = 0;
  for (int k = m; k < total; ++k) {
    const auto [x, a] = z[k];
    cost_sum += mdp.cost(x, a);
    if (a >= A) continue;  // spherical: the last action anchors no component
    if (k < busy_until(x, a)) continue;  // non-overlapping coupling windows
    const double raw_mass = phantom_action_pmf(theta, psi, x, a, pmf);
    if (raw_mass <= 0.0) continue;  // degenerate row: g = 0, contributes zero
    n_anchor(x, a) += 1;
    ++anchors;
    int px = x;
    int pu = branch_rng.categorical({pmf.data(), static_cast<size_t>(U)});
    for (size_t s = 0; s < S; ++s) diff[s] = stages[s](x, a) - stages[s](px, pu);
    bool coupled = (px == x && pu == a);
    int j = k;
    while (!coupled && j + 1 < total) {
      ++j;
      px = inverse_cdf_step(mdp.P[pu], px, u_state[j]);
      row.head(U) = theta.mat().row(px).transpose();
      pu = inverse_cdf_index({row.data(), static_cast<size_t>(U)}, u_action[j]);
      coupled = (px == z[j].x && pu == z[j].u);
      for (size_t s = 0; s < S; ++s) {
        diff[s] += stages[s](z[j].x, z[j].u) - stages[s](px, pu);
      }
    }
    if (!coupled) ++truncations;
    busy_until(x, a) = j + 1;
    const double w = anchor_weight(theta, psi, x, a, raw_mass);
    for (size_t s = 0; s < S; ++s) sum_d[s](x, a) += w * diff[s];
  }

  // The model is in hand, so weight each component by the exact stationary
  // probability of its anchor pair rather than the noisier empirical visit
  // frequency. The pair probability factors as pi_X(x) theta(x,a) through
  // the mixed state chain, which stays regular even when theta has
  // degenerate rows (where the full pair chain does not).
  Eigen::MatrixXd mixed = Eigen::MatrixXd::Zero(X, X);
  for (int a = 0; a < U; ++a) {
    for (int i = 0; i < X; ++i) {
      mixed.row(i) += theta(i, a) * mdp.P[a].mat().row(i);
    }
  }
  const Pmf pi_x = stationary_distribution(StochasticMatrix(std::move(mixed)));
  for (size_t s = 0; s < S; ++s) {
    for (int x = 0; x < X; ++x) {
      for (int a = 0; a < A; ++a) {
        if (n_anchor(x, a) > 0) {
          const double pair_prob = pi_x(x) * theta(x, a);
          out[s].grad(x, a) = pair_prob * sum_d[s](x, a) / n_anchor(x, a);
        }
      }
    }
    out[s].anchors = anchors;
    out[s].truncations = truncations;
    out[s].mean_cost = cost_sum / N;
  }
  return out;
}

WdGradientResult wd_gradient_parameter_free(const BatchTrajectory& batch,
                                            const ActionProbabilityMatrix& theta,
                                            const PolicyParam& psi,
                                            RngStream& rng,
                                            std::optional<double> c_hat_opt) {
  const int N = batch.length();
  if (N < 2) {
    throw std::invalid_argument("wd_gradient_parameter_free: batch too short");
  }
  const int X = theta.states();
  const int U = theta.actions();
  const int A = param_cols_for(psi, U);

  double c_hat;
  if (c_hat_opt.has_value()) {
    c_hat = *c_hat_opt;
  } else {
    double s = 0.0;
    for (double c : batch.costs) s += c;
    c_hat = s / N;
  }

  // Prefix sums of costs so each anchor window is O(1) after the nu scan.
  std::vector<double> prefix(N + 1, 0.0);
  for (int k = 0; k < N; ++k) prefix[k + 1] = prefix[k] + batch.costs[k];

  WdGradientResult out;
  out.grad = Eigen::MatrixXd::Zero(X, A);
  out.mean_cost = prefix[N] / N;
  Eigen::MatrixXd sum_d = Eigen::MatrixXd::Zero(X, A);
  Eigen::MatrixXi n_anchor = Eigen::MatrixXi::Zero(X, A);
  Eigen::VectorXd state_visits = Eigen::VectorXd::Zero(X);
  Eigen::VectorXd pmf(U);

  for (int k = 0; k < N; ++k) {
    const auto [x, a] = batch.z[k];
    state_visits(x) += 1.0;
    if (a >= A) continue;
    const double raw_mass = phantom_action_pmf(theta, psi, x, a, pmf);
    if (raw_mass <= 0.0) continue;
    const int pu = rng.categorical({pmf.data(), static_cast<size_t>(U)});
    int nu = -1;
    for (int j = k + 1; j < N; ++j) {
      if (batch.z[j].x == x && batch.z[j].u == pu) {
        nu = j - k;
        break;
      }
    }
    if (nu < 0) {
      ++out.discarded;
      continue;
    }
    n_anchor(x, a) += 1;
    const double window_cost = prefix[k + nu] - prefix[k];
    sum_d(x, a) += anchor_weight(theta, psi, x, a, raw_mass) *
                   (window_cost - nu * c_hat);
  }

  // Anchor-pair frequency factored as (empirical state frequency) x (exact
  // action probability): theta is the experimenter's own policy, so only the
  // state marginal needs estimating.
  bool any_anchor = false;
  for (int x = 0; x < X; ++x) {
    for (int a = 0; a < A; ++a) {
      if (n_anchor(x, a) > 0) {
        any_anchor = true;
        const double pair_freq = state_visits(x) / N * theta(x, a);
        out.grad(x, a) = pair_freq * sum_d(x, a) / n_anchor(x, a);
      }
      out.anchors += n_anchor(x, a);
    }
  }
  if (!any_anchor) {
    throw std::runtime_error(
        "wd_gradient_parameter_free: no valid anchor in batch");
  }
  return out;
}

TrainResult policy_gradient_train(const MdpModel& mdp, const PolicyParam& psi0,
                                  const TrainOptions& opts, RngStream& rng) {
  TrainResult res;
  res.psi_trajectory.reserve(opts.n_batches + 1);
  res.psi_trajectory.push_back(psi0.psi);
  PolicyParam psi = psi0;
  int x = 0;
  RngStream sim_rng = rng.substream("train-sim");
  for (long n = 0; n < opts.n_batches; ++n) {
    RngStream batch_rng = rng.substream(static_cast<std::uint64_t>(n));
    Eigen::MatrixXd g;
    double mean_cost = 0.0;
    if (opts.estimator == PgEstimator::Wd) {
      WdGradientResult r =
          wd_gradient_mdp(mdp, psi, opts.wd_burn_in, opts.batch_size, batch_rng);
      g = r.grad;
      mean_cost = r.mean_cost;
    } else {
      const ActionProbabilityMatrix theta = theta_from_params(psi, mdp.U);
      BatchTrajectory batch =
          simulate_batch(mdp, theta, opts.batch_size, x, sim_rng, n);
      if (opts.estimator == PgEstimator::Score) {
        g = score_gradient_mdp(batch, theta, psi, opts.score_beta);
      } else {
        g = wd_gradient_parameter_free(batch, theta, psi, batch_rng).grad;
      }
      for (double c : batch.costs) mean_cost += c;
      mean_cost /= batch.length();
    }
    psi.psi -= opts.schedule.eps_at(n) * g;
    if (!psi.psi.allFinite()) {
      throw std::runtime_error("policy_gradient_train: non-finite psi at batch " +
                               std::to_string(n));
    }
    res.psi_trajectory.push_back(psi.psi);
    res.batch_mean_cost.push_back(mean_cost);
  }
  return res;
}

const EstimatorStats& VarianceComparisonReport::find(
    const std::string& estimator, int N) const {
  for (const auto& r : rows) {
    if (r.estimator == estimator && r.N == N) return r;
  }
  throw std::out_of_range("no stats row " + estimator + " @ N=" +
                          std::to_string(N));
}

VarianceComparisonReport variance_comparison_experiment(
    const MdpModel& mdp, const PolicyParam& psi, std::span<const int> Ns,
    long batches, RngStream& rng) {
  const ActionProbabilityMatrix theta = theta_from_params(psi, mdp.U);
  VarianceComparisonReport report;
  report.exact_gradient = exact_policy_gradient(mdp, psi);

  for (int N : Ns) {
    // Score estimator over a continuing chain chopped into batches.
    {
      std::vector<Eigen::MatrixXd> samples;
      samples.reserve(batches);
      RngStream r = rng.substream("score").substream(N);
      int x = 0;
      const double t0 = clock_seconds();
      for (long b = 0; b < batches; ++b) {
        BatchTrajectory batch = simulate_batch(mdp, theta, N, x, r, b);
        samples.push_back(score_gradient_mdp(batch, theta, psi, 1.0));
      }
      const double t1 = clock_seconds();
      GradientEstimate est = GradientEstimate::from_samples(samples);
      report.rows.push_back({"score", N, batches, est.value, est.variance,
                             est.half_width, t1 - t0, 0, 0});
    }
    // Parameter-free weak derivative on the same kind of observed batches.
    {
      std::vector<Eigen::MatrixXd> samples;
      samples.reserve(batches);
      RngStream r = rng.substream("wd-pf").substream(N);
      RngStream branch = rng.substream("wd-pf-branch").substream(N);
      int x = 0;
      long truncated = 0, discarded = 0;
      const double t0 = clock_seconds();
      for (long b = 0; b < batches; ++b) {
        BatchTrajectory batch = simulate_batch(mdp, theta, N, x, r, b);
        WdGradientResult wr =
            wd_gradient_parameter_free(batch, theta, psi, branch);
        discarded += wr.discarded;
        samples.push_back(wr.grad);
      }
      const double t1 = clock_seconds();
      GradientEstimate est = GradientEstimate::from_samples(samples);
      report.rows.push_back({"wd-parameter-free", N, batches, est.value,
                             est.variance, est.half_width, t1 - t0, truncated,
                             discarded});
    }
    // Model-based weak derivative.
    {
      std::vector<Eigen::MatrixXd> samples;
      samples.reserve(batches);
      RngStream r = rng.substream("wd-model").substream(N);
      long truncated = 0;
      const double t0 = clock_seconds();
      for (long b = 0; b < batches; ++b) {
        RngStream br = r.substream(static_cast<std::uint64_t>(b));
        WdGradientResult wr = wd_gradient_mdp(mdp, psi, 100, N, br);
        truncated += wr.truncations;
        samples.push_back(wr.grad);
      }
      const double t1 = clock_seconds();
      GradientEstimate est = GradientEstimate::from_samples(samples);
      report.rows.push_back({"wd-model", N, batches, est.value, est.variance,
                             est.half_width, t1 - t0, truncated, 0});
    }
  }
  return report;
}

WindowCodec::WindowCodec(int n_obs, int n_act, int window)
    : n_obs_(n_obs), n_act_(n_act), window_(window) {
  if (n_obs < 1 || n_act < 1 || window < 1) {
    throw std::invalid_argument("WindowCodec: alphabets and window must be >= 1");
  }
  // Pair symbol alphabet: null plus every (y, u) combination.
  base_ = n_obs * n_act + 1;
  long long states = 1;
  for (int t = 0; t < window; ++t) {
    states *= base_;
    if (states > std::numeric_limits<int>::max()) {
      throw std::overflow_error("WindowCodec: state index overflows int");
    }
  }
  n_states_ = static_cast<int>(states);
}

int WindowCodec::encode(std::span<const std::pair<int, int>> history) const {
  long long index = 0;
  // Most recent pair in the lowest digit.
  for (int t = 0; t < window_; ++t) {
    const long long h = static_cast<long long>(history.size()) - 1 - t;
    int symbol = 0;
    if (h >= 0) {
      const auto [y, u] = history[static_cast<size_t>(h)];
      if (y == kNull && u == kNull) {
        symbol = 0;  // padded slot round-tripping through decode
      } else if (y < 0 || y >= n_obs_ || u < 0 || u >= n_act_) {
        throw std::invalid_argument("WindowCodec: symbol out of range");
      } else {
        symbol = 1 + y + n_obs_ * u;
      }
    }
    long long weight = 1;
    for (int i = 0; i < t; ++i) weight *= base_;
    index += symbol * weight;
  }
  return static_cast<int>(index);
}

std::vector<std::pair<int, int>> WindowCodec::decode(int index) const {
  if (index < 0 || index >= n_states_) {
    throw std::invalid_argument("WindowCodec: index out of range");
  }
  std::vector<std::pair<int, int>> pairs(window_, {kNull, kNull});
  long long rest = index;
  for (int t = 0; t < window_; ++t) {
    const int symbol = static_cast<int>(rest % base_);
    rest /= base_;
    if (symbol != 0) {
      const int v = symbol - 1;
      pairs[window_ - 1 - t] = {v % n_obs_, v / n_obs_};
    }
  }
  return pairs;
}

}  // namespace sasim
