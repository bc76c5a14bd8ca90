#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sasim/cmdp.hpp"
#include "sasim/discrete_opt.hpp"
#include "sasim/grad.hpp"
#include "sasim/hmm.hpp"
#include "sasim/markov.hpp"
#include "sasim/mdp.hpp"
#include "sasim/meanfield.hpp"
#include "sasim/policy_gradient.hpp"
#include "sasim/qlearn.hpp"

namespace py = pybind11;
using namespace sasim;

namespace {

MdpModel make_mdp(const std::vector<Eigen::MatrixXd>& transitions,
                  const Eigen::MatrixXd& cost) {
  std::vector<StochasticMatrix> P;
  P.reserve(transitions.size());
  for (const auto& t : transitions) P.emplace_back(t);
  return MdpModel(std::move(P), cost);
}

PolicyParam make_param(const std::string& kind, const Eigen::MatrixXd& psi) {
  return PolicyParam{kind == "spherical" ? ParamKind::Spherical
                                         : ParamKind::Exponential,
                     psi};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Simulation-based stochastic approximation for Markov models";

  py::class_<RngStream>(m, "RngStream")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("uniform", &RngStream::uniform)
      .def("normal", &RngStream::normal)
      .def("substream",
           py::overload_cast<std::uint64_t>(&RngStream::substream, py::const_))
      .def("named_substream", [](const RngStream& r, const std::string& name) {
        return r.substream(name);
      });

  // Markov chain core.
  m.def(
      "simulate_chain",
      [](const Eigen::MatrixXd& P, const Eigen::VectorXd& pi0, int n,
         RngStream& rng) {
        return simulate_chain(StochasticMatrix(P), Pmf(pi0), n, rng).states;
      },
      py::arg("P"), py::arg("pi0"), py::arg("n"), py::arg("rng"));
  m.def("stationary_distribution", [](const Eigen::MatrixXd& P) {
    return stationary_distribution(StochasticMatrix(P)).vec();
  });
  m.def("dobrushin_coefficient", [](const Eigen::MatrixXd& P) {
    return dobrushin_coefficient(StochasticMatrix(P));
  });
  m.def("variational_distance",
        [](const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
          return variational_distance(Pmf(p), Pmf(q));
        });
  m.def("fundamental_matrix", [](const Eigen::MatrixXd& P) {
    return fundamental_matrix(StochasticMatrix(P));
  });
  m.def(
      "howlong_bounds",
      [](const Eigen::MatrixXd& P, const Eigen::VectorXd& h,
         const Eigen::VectorXd& pi0, int n) {
        const SimulationBounds b =
            howlong_bounds(StochasticMatrix(P), h, Pmf(pi0), n);
        py::dict d;
        d["bias_bound"] = b.bias_bound;
        d["msd_bound"] = b.msd_bound;
        d["dobrushin"] = b.dobrushin;
        d["degenerate"] = b.degenerate;
        return d;
      },
      py::arg("P"), py::arg("h"), py::arg("pi0"), py::arg("n"));

  // Gradient estimation on chains.
  m.def("hahn_jordan_decompose", [](const Eigen::MatrixXd& dP) {
    const WeakDerivativeTriplet t = hahn_jordan_decompose(dP);
    return py::make_tuple(t.g, t.p_dot.mat(), t.p_ddot.mat());
  });
  m.def(
      "score_gradient_chain",
      [](const Eigen::MatrixXd& P, const Eigen::MatrixXd& dP,
         const Eigen::VectorXd& c, const Eigen::VectorXd& pi0, int N,
         int batches, RngStream& rng) {
        const GradientEstimate e = score_gradient_chain(
            StochasticMatrix(P), dP, c, Pmf(pi0), N, batches, rng);
        return py::make_tuple(e.value(0, 0), e.variance(0, 0),
                              e.half_width(0, 0));
      },
      py::arg("P"), py::arg("dP"), py::arg("c"), py::arg("pi0"), py::arg("N"),
      py::arg("batches"), py::arg("rng"));
  m.def(
      "weak_derivative_gradient_chain",
      [](const Eigen::MatrixXd& P, const Eigen::MatrixXd& dP,
         const Eigen::VectorXd& c, const Eigen::VectorXd& pi0, int m_burn,
         int N, int replications, RngStream& rng) {
        const GradientEstimate e = weak_derivative_gradient_chain(
            StochasticMatrix(P), hahn_jordan_decompose(dP), c, Pmf(pi0),
            m_burn, N, replications, rng);
        return py::make_tuple(e.value(0, 0), e.variance(0, 0),
                              e.half_width(0, 0));
      },
      py::arg("P"), py::arg("dP"), py::arg("c"), py::arg("pi0"), py::arg("m"),
      py::arg("N"), py::arg("replications"), py::arg("rng"));

  // MDP core.
  m.def("paper_fixture", []() {
    const MdpModel mdp = paper_fixture_mdp();
    std::vector<Eigen::MatrixXd> P;
    for (const auto& p : mdp.P) P.push_back(p.mat());
    return py::make_tuple(P, mdp.cost, paper_fixture_theta());
  });
  m.def(
      "theta_from_params",
      [](const std::string& kind, const Eigen::MatrixXd& psi, int actions) {
        return theta_from_params(make_param(kind, psi), actions).mat();
      },
      py::arg("kind"), py::arg("psi"), py::arg("actions"));
  m.def(
      "average_cost",
      [](const std::vector<Eigen::MatrixXd>& P, const Eigen::MatrixXd& cost,
         const Eigen::MatrixXd& theta) {
        return average_cost(make_mdp(P, cost), ActionProbabilityMatrix(theta));
      },
      py::arg("transitions"), py::arg("cost"), py::arg("theta"));
  m.def(
      "exact_policy_gradient",
      [](const std::vector<Eigen::MatrixXd>& P, const Eigen::MatrixXd& cost,
         const std::string& kind, const Eigen::MatrixXd& psi) {
        return exact_policy_gradient(make_mdp(P, cost), make_param(kind, psi));
      },
      py::arg("transitions"), py::arg("cost"), py::arg("kind"), py::arg("psi"));
  m.def(
      "value_iteration",
      [](const std::vector<Eigen::MatrixXd>& P, const Eigen::MatrixXd& cost,
         double rho, int N) {
        const ValueIterationResult r = value_iteration(make_mdp(P, cost), rho, N);
        py::dict d;
        d["V"] = r.V;
        d["Q"] = r.Q;
        d["policy"] = r.policy;
        d["bound"] = r.bound;
        return d;
      },
      py::arg("transitions"), py::arg("cost"), py::arg("rho"), py::arg("N"));

  // Policy-gradient estimators.
  m.def(
      "wd_gradient_mdp",
      [](const std::vector<Eigen::MatrixXd>& P, const Eigen::MatrixXd& cost,
         const std::string& kind, const Eigen::MatrixXd& psi, int m, int N,
         RngStream& rng) {
        return wd_gradient_mdp(make_mdp(P, cost), make_param(kind, psi), m, N,
                               rng)
            .grad;
      },
      py::arg("transitions"), py::arg("cost"), py::arg("kind"), py::arg("psi"),
      py::arg("m"), py::arg("N"), py::arg("rng"));

  // Q-learning.
  m.def(
      "q_learning_run",
      [](const std::vector<Eigen::MatrixXd>& P, const Eigen::MatrixXd& cost,
         double rho, int delta_interval, long n_intervals, double exploration,
         RngStream& rng) {
        const MdpModel mdp = make_mdp(P, cost);
        QLearnOptions opts;
        opts.rho = rho;
        opts.delta_interval = delta_interval;
        opts.n_intervals = n_intervals;
        opts.exploration = exploration;
        const QLearnResult r =
            q_learning_run(make_mdp_simulator(mdp), mdp.X, mdp.U, opts, rng);
        py::dict d;
        d["Q"] = r.Q;
        d["policy"] = r.policy;
        return d;
      },
      py::arg("transitions"), py::arg("cost"), py::arg("rho"),
      py::arg("delta_interval"), py::arg("n_intervals"), py::arg("exploration"),
      py::arg("rng"));
  m.def(
      "qmdp_policy",
      [](const Eigen::MatrixXd& Q, const Eigen::VectorXd& belief) {
        return qmdp_policy(Q, Pmf(belief));
      },
      py::arg("Q"), py::arg("belief"));

  // Discrete search benchmark.
  m.def(
      "poisson_mode_benchmark",
      [](double lambda, int S, const std::string& algo, long n_steps,
         int n_runs, std::uint64_t seed) {
        BenchmarkOptions opts;
        opts.n_steps = n_steps;
        opts.n_runs = n_runs;
        const SearchAlgo a = algo == "rs"    ? SearchAlgo::RandomSearch
                             : algo == "ucb" ? SearchAlgo::Ucb
                                             : SearchAlgo::AdaptiveSearch;
        RngStream rng(seed);
        std::vector<std::pair<long, double>> rows;
        for (const auto& r : poisson_mode_benchmark(lambda, S, a, opts, rng)) {
          rows.emplace_back(r.checkpoint, r.pct_converged);
        }
        return rows;
      },
      py::arg("lam"), py::arg("S"), py::arg("algo"), py::arg("n_steps"),
      py::arg("n_runs"), py::arg("seed"));

  // HMM estimation.
  m.def(
      "hmm_filter_loglik",
      [](const Eigen::MatrixXd& P, const Eigen::VectorXd& sigma,
         const std::vector<double>& ys) {
        return normalized_log_likelihood(HmmModel::from_transition(P, sigma),
                                         ys);
      },
      py::arg("P"), py::arg("sigma"), py::arg("observations"));
  m.def(
      "simulate_hmm",
      [](const Eigen::MatrixXd& P, const Eigen::VectorXd& sigma, int n,
         RngStream& rng) {
        const HmmSample s =
            simulate_hmm(HmmModel::from_transition(P, sigma), n, rng);
        return py::make_tuple(s.states, s.observations);
      },
      py::arg("P"), py::arg("sigma"), py::arg("n"), py::arg("rng"));
  m.def(
      "lms_track_mse",
      [](double mu, double kappa, long n_steps, std::uint64_t seed) {
        Eigen::MatrixXd Q(2, 2), values(2, 3);
        Q << -1.0, 1.0, 1.0, -1.0;
        values << 1.0, 0.0, -1.0, -1.0, 2.0, 0.5;
        const SlowChainModel model(Q, kappa * mu * mu, values);
        TrackOptions opts;
        opts.n_steps = n_steps;
        RngStream rng(seed);
        return slow_chain_track(model, mu, opts, rng).mse;
      },
      py::arg("mu"), py::arg("kappa"), py::arg("n_steps"), py::arg("seed"));

  // Mean field.
  m.def(
      "mean_field_trajectory",
      [](double a, double b, double c, int M, long n_steps,
         const Eigen::VectorXd& theta0) {
        const PopulationKernel kernel = adoption_kernel(a, b, c);
        Eigen::VectorXd theta = theta0;
        std::vector<Eigen::VectorXd> out;
        out.push_back(theta);
        for (long k = 0; k < n_steps; ++k) {
          mean_field_step(theta, kernel, 0, M);
          out.push_back(theta);
        }
        return out;
      },
      py::arg("a"), py::arg("b"), py::arg("c"), py::arg("M"),
      py::arg("n_steps"), py::arg("theta0"));
}
