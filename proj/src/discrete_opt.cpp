#include "sasim/discrete_opt.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sasim {

Eigen::VectorXd boltzmann_probabilities(const Eigen::VectorXd& phi,
                                        double gamma) {
  if (gamma <= 0.0) throw std::invalid_argument("boltzmann: gamma must be > 0");
  const double mn = phi.minCoeff();
  Eigen::VectorXd b = ((mn - phi.array()) / gamma).exp();
  return b / b.sum();
}

int boltzmann_sample(const Eigen::VectorXd& phi, double gamma, RngStream& rng) {
  const Eigen::VectorXd b = boltzmann_probabilities(phi, gamma);
  return rng.categorical({b.data(), static_cast<size_t>(b.size())});
}

AsStepResult as_step(Eigen::VectorXd& phi, double gamma, double mu_step,
                     const NoisyObjective& objective, RngStream& rng) {
  if (!(mu_step > 0.0 && mu_step <= 1.0)) {
    throw std::invalid_argument("as_step: mu_step must lie in (0,1]");
  }
  const Eigen::VectorXd b = boltzmann_probabilities(phi, gamma);
  const int theta_n =
      rng.categorical({b.data(), static_cast<size_t>(b.size())});
  const double c_n = objective(theta_n, rng);
  // f has one nonzero entry: the sampled candidate, importance-weighted by
  // its exact sampling probability.
  Eigen::VectorXd f = Eigen::VectorXd::Zero(phi.size());
  f(theta_n) = c_n / b(theta_n);
  phi += mu_step * (f - phi);
  return {theta_n, c_n};
}

RsState RsState::init(int S, int start) {
  if (S < 2) throw std::invalid_argument("RsState: need at least 2 candidates");
  if (start < 0 || start >= S) throw std::invalid_argument("RsState: bad start");
  RsState st;
  st.current = start;
  st.occupation = Eigen::VectorXd::Zero(S);
  st.occupation(start) = 1.0;
  return st;
}

int RsState::estimate() const {
  int best = 0;
  for (Eigen::Index i = 1; i < occupation.size(); ++i) {
    if (occupation(i) > occupation(best)) best = static_cast<int>(i);
  }
  return best;
}

void rs_step(RsState& state, const NoisyObjective& objective, double mu_step,
             RngStream& rng) {
  const int S = static_cast<int>(state.occupation.size());
  int candidate = rng.uniform_int(S - 1);
  if (candidate >= state.current) ++candidate;  // uniform on others
  const double c_current = objective(state.current, rng);
  const double c_candidate = objective(candidate, rng);
  if (c_candidate < c_current) state.current = candidate;  // strict move rule
  state.occupation *= (1.0 - mu_step);
  state.occupation(state.current) += mu_step;
}

UcbState UcbState::init(int S, double mu_disc, double xi, double B_bound,
                        const NoisyObjective& payoff, RngStream& rng) {
  if (!(mu_disc > 0.0 && mu_disc <= 1.0)) {
    throw std::invalid_argument("UcbState: discount must lie in (0,1]");
  }
  UcbState st;
  st.mu_disc = mu_disc;
  st.xi = xi;
  st.B_bound = B_bound;
  st.c_hat = Eigen::VectorXd::Zero(S);
  st.m = Eigen::VectorXd::Zero(S);
  // Each seeding pull occupies its own time slot, so earlier arms carry one
  // extra discount factor per later pull, exactly like regular steps.
  Eigen::VectorXd numer = Eigen::VectorXd::Zero(S);
  for (int i = 0; i < S; ++i) {
    numer *= mu_disc;
    st.m *= mu_disc;
    numer(i) += payoff(i, rng);
    st.m(i) += 1.0;
  }
  for (int i = 0; i < S; ++i) st.c_hat(i) = numer(i) / st.m(i);
  st.M_total = st.m.sum();
  return st;
}

int UcbState::estimate() const {
  int best = 0;
  for (Eigen::Index i = 1; i < c_hat.size(); ++i) {
    if (c_hat(i) > c_hat(best)) best = static_cast<int>(i);
  }
  return best;
}

int ucb_step(UcbState& state, const NoisyObjective& payoff, RngStream& rng) {
  const int S = static_cast<int>(state.c_hat.size());
  int arm = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < S; ++i) {
    const double bonus =
        state.B_bound * std::sqrt(state.xi * std::log(state.M_total + 1.0) /
                                  state.m(i));
    const double v = state.c_hat(i) + bonus;
    if (v > best) {
      best = v;
      arm = i;
    }
  }
  const double reward = payoff(arm, rng);
  // Discounted statistics kept incrementally: scale everything by mu, then
  // add the fresh pull with unit weight. c_hat stays the weighted mean, so
  // its numerator m * c_hat scales alongside m.
  Eigen::VectorXd numer = state.m.cwiseProduct(state.c_hat);
  numer *= state.mu_disc;
  state.m *= state.mu_disc;
  numer(arm) += reward;
  state.m(arm) += 1.0;
  for (int i = 0; i < S; ++i) {
    state.c_hat(i) = state.m(i) > 0.0 ? numer(i) / state.m(i) : 0.0;
  }
  state.M_total = state.m.sum();
  state.n += 1;
  return arm;
}

int poisson_sample(double lambda, RngStream& rng) {
  if (lambda <= 0.0) throw std::invalid_argument("poisson_sample: lambda <= 0");
  const double u = rng.uniform();
  double p = std::exp(-lambda);
  double cum = p;
  int k = 0;
  while (u >= cum && k < 10000) {
    ++k;
    p *= lambda / k;
    cum += p;
  }
  return k;
}

std::vector<int> poisson_mode_target_set(double lambda) {
  const int fl = static_cast<int>(std::floor(lambda));
  std::vector<int> g;
  if (std::floor(lambda) == lambda && fl >= 1) g.push_back(fl - 1);
  g.push_back(fl);
  return g;
}

std::vector<BenchmarkRow> poisson_mode_benchmark(double lambda, int S,
                                                 SearchAlgo algo,
                                                 const BenchmarkOptions& opts,
                                                 RngStream& rng) {
  const int n_candidates = S + 1;  // candidates {0, ..., S}
  const std::vector<int> target = poisson_mode_target_set(lambda);
  auto in_target = [&target](int e) {
    return std::find(target.begin(), target.end(), e) != target.end();
  };
  // One poll: does a fresh degree sample equal the candidate? Draws above S
  // are reported as "no".
  auto indicator = [lambda, S](int candidate, RngStream& r) {
    const int d = poisson_sample(lambda, r);
    return (d <= S && d == candidate) ? 1.0 : 0.0;
  };
  const NoisyObjective minimized = [&indicator](int c, RngStream& r) {
    return -indicator(c, r);
  };

  std::vector<long> checkpoints = opts.checkpoints;
  std::sort(checkpoints.begin(), checkpoints.end());
  while (!checkpoints.empty() && checkpoints.back() > opts.n_steps) {
    checkpoints.pop_back();
  }
  if (checkpoints.empty() || checkpoints.back() != opts.n_steps) {
    checkpoints.push_back(opts.n_steps);
  }

  std::vector<long> hits(checkpoints.size(), 0);
  for (int run = 0; run < opts.n_runs; ++run) {
    RngStream r = rng.substream(static_cast<std::uint64_t>(run));
    size_t next_cp = 0;

    if (algo == SearchAlgo::AdaptiveSearch) {
      Eigen::VectorXd phi = Eigen::VectorXd::Zero(n_candidates);
      for (long n = 1; n <= opts.n_steps; ++n) {
        const double mu =
            opts.as_decreasing ? 1.0 / static_cast<double>(n) : opts.as_mu;
        const double gamma = opts.as_decreasing
                                 ? std::pow(static_cast<double>(n), -0.2)
                                 : opts.as_gamma;
        as_step(phi, gamma, mu, minimized, r);
        while (next_cp < checkpoints.size() && n == checkpoints[next_cp]) {
          int est = 0;
          for (int i = 1; i < n_candidates; ++i) {
            if (phi(i) < phi(est)) est = i;
          }
          if (in_target(est)) ++hits[next_cp];
          ++next_cp;
        }
      }
    } else if (algo == SearchAlgo::RandomSearch) {
      RsState st = RsState::init(n_candidates, r.uniform_int(n_candidates));
      for (long n = 1; n <= opts.n_steps; ++n) {
        rs_step(st, minimized, opts.rs_mu, r);
        while (next_cp < checkpoints.size() && n == checkpoints[next_cp]) {
          if (in_target(st.estimate())) ++hits[next_cp];
          ++next_cp;
        }
      }
    } else {
      UcbState st = UcbState::init(n_candidates, opts.ucb_mu_disc, opts.ucb_xi,
                                   1.0, indicator, r);
      for (long n = 1; n <= opts.n_steps; ++n) {
        ucb_step(st, indicator, r);
        while (next_cp < checkpoints.size() && n == checkpoints[next_cp]) {
          if (in_target(st.estimate())) ++hits[next_cp];
          ++next_cp;
        }
      }
    }
  }

  std::vector<BenchmarkRow> rows;
  rows.reserve(checkpoints.size());
  for (size_t i = 0; i < checkpoints.size(); ++i) {
    rows.push_back(
        {checkpoints[i], 100.0 * hits[i] / static_cast<double>(opts.n_runs)});
  }
  return rows;
}

}  // namespace sasim
