#include "sasim/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sasim/cmdp.hpp"
#include "sasim/discrete_opt.hpp"
#include "sasim/grad.hpp"
#include "sasim/hmm.hpp"
#include "sasim/markov.hpp"
#include "sasim/matrix_io.hpp"
#include "sasim/mdp.hpp"
#include "sasim/meanfield.hpp"
#include "sasim/policy_gradient.hpp"
#include "sasim/qlearn.hpp"

#ifndef SASIM_VERSION
#define SASIM_VERSION "0.0.0"
#endif

namespace sasim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  size_t b = s.find_last_not_of(" \t\r\n");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

const std::vector<std::string> kExperiments = {
    "gradcheck", "compare-estimators", "qlearn",    "cmdp",  "discrete-opt",
    "hmm-rmle",  "lms-track",          "meanfield", "bounds"};

const std::vector<std::string> kFixtures = {"paper-2x3", "chain-2", "cmdp-2x2",
                                            "hmm-2", "adoption-2"};

// Experiment-specific hyperparameter keys accepted by validate/run.
const std::map<std::string, std::vector<std::string>> kKnownParams = {
    {"gradcheck", {"kind", "batches", "N", "burn_in", "score_batches"}},
    {"compare-estimators", {"batches", "N_values"}},
    {"qlearn",
     {"rho", "n_intervals", "delta_interval", "exploration", "eps_base",
      "log_every", "vi_iterations"}},
    {"cmdp",
     {"batch_size", "n_batches", "eps", "Delta", "estimator", "grid_points",
      "zeta", "gamma_exp", "schedule"}},
    {"discrete-opt", {"lambda", "S", "n_steps", "n_runs", "algo"}},
    {"hmm-rmle", {"n_samples", "eps_step", "trace_every"}},
    {"lms-track", {"mu", "n_steps", "kappa", "noise_sd", "burn_in"}},
    {"meanfield", {"runs", "M_values", "a", "b", "c"}},
    {"bounds", {"n", "seeds"}},
};

int edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::vector<int>> d(a.size() + 1,
                                  std::vector<int>(b.size() + 1, 0));
  for (size_t i = 0; i <= a.size(); ++i) d[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= b.size(); ++j) d[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      const int sub = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, sub});
    }
  }
  return d[a.size()][b.size()];
}

std::string nearest(const std::string& name,
                    const std::vector<std::string>& options) {
  std::string best;
  int best_d = std::numeric_limits<int>::max();
  for (const auto& o : options) {
    const int d = edit_distance(name, o);
    if (d < best_d) {
      best_d = d;
      best = o;
    }
  }
  return best;
}

bool is_builtin_fixture(const std::string& name) {
  return std::find(kFixtures.begin(), kFixtures.end(), name) != kFixtures.end();
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// CSV writer that enforces the finite-cells rule and fixes the numeric
// format (12 significant digits, '.' decimal separator).
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header)
      : header_(std::move(header)) {}

  void add_row(const std::vector<std::string>& cells) {
    if (cells.size() != header_.size()) {
      throw std::runtime_error("csv row width mismatch");
    }
    rows_.push_back(cells);
  }

  static std::string num(double v) {
    if (!std::isfinite(v)) {
      throw std::runtime_error("refusing to write non-finite value to CSV");
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
  }
  static std::string num(long v) { return std::to_string(v); }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    for (size_t i = 0; i < header_.size(); ++i) {
      out << header_[i] << (i + 1 == header_.size() ? '\n' : ',');
    }
    for (const auto& row : rows_) {
      for (size_t i = 0; i < row.size(); ++i) {
        out << row[i] << (i + 1 == row.size() ? '\n' : ',');
      }
    }
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << '\n';
}

double finite(double v) {
  if (!std::isfinite(v)) {
    throw std::runtime_error("non-finite value in experiment output");
  }
  return v;
}

// ---------------------------------------------------------------------------
// Fixture loading
// ---------------------------------------------------------------------------

MdpModel load_mdp_instance(const std::string& instance) {
  if (instance.empty() || instance == "paper-2x3") return paper_fixture_mdp();
  if (is_builtin_fixture(instance)) {
    throw std::runtime_error("fixture '" + instance +
                             "' is not an MDP instance");
  }
  return read_mdp_file(instance);
}

StochasticMatrix load_chain_instance(const std::string& instance) {
  if (instance.empty() || instance == "chain-2") {
    Eigen::MatrixXd p(2, 2);
    p << 0.9, 0.1, 0.2, 0.8;
    return StochasticMatrix(p);
  }
  if (is_builtin_fixture(instance)) {
    throw std::runtime_error("fixture '" + instance + "' is not a chain");
  }
  return StochasticMatrix(read_matrix_file(instance));
}

CmdpModel load_cmdp_instance(const std::string& instance) {
  if (instance.empty() || instance == "cmdp-2x2") return reference_cmdp();
  if (is_builtin_fixture(instance)) {
    throw std::runtime_error("fixture '" + instance +
                             "' is not a CMDP instance");
  }
  return read_cmdp_file(instance);
}

HmmModel load_hmm_instance(const std::string& instance) {
  if (instance.empty() || instance == "hmm-2") {
    Eigen::MatrixXd p(2, 2);
    p << 0.9, 0.1, 0.2, 0.8;
    return HmmModel::from_transition(p, Eigen::Vector2d(1.0, 1.0));
  }
  throw std::runtime_error("fixture '" + instance + "' is not an HMM");
}

// ---------------------------------------------------------------------------
// Experiment bodies; each returns the files it wrote (relative names).
// ---------------------------------------------------------------------------

std::vector<std::string> run_bounds(const ExperimentConfig& cfg,
                                    const fs::path& dir) {
  const StochasticMatrix P = load_chain_instance(cfg.instance);
  const int n = static_cast<int>(cfg.param_l("n", 1000));
  const int seeds = static_cast<int>(cfg.param_l("seeds", 200));
  Eigen::VectorXd h = Eigen::VectorXd::Zero(P.dim());
  h(0) = 1.0;
  const Pmf pi0 = Pmf::unit(P.dim(), 0);
  const Pmf pi_inf = stationary_distribution(P);
  const SimulationBounds bounds = howlong_bounds(P, h, pi0, n);
  const double truth = h.dot(pi_inf.vec());

  RngStream rng(cfg.seed);
  double sum = 0.0, sumsq_dev = 0.0;
  for (int s = 0; s < seeds; ++s) {
    RngStream r = rng.substream("bounds").substream(s);
    const Trajectory traj = simulate_chain(P, pi0, n, r);
    const double phi = empirical_average(traj, h);
    sum += phi;
    sumsq_dev += (phi - truth) * (phi - truth);
  }
  const double emp_bias = sum / seeds - truth;
  const double emp_msd = sumsq_dev / seeds;

  CsvWriter csv({"quantity", "bound", "empirical", "within_bound"});
  csv.add_row({"bias", CsvWriter::num(bounds.bias_bound),
               CsvWriter::num(std::abs(emp_bias)),
               std::abs(emp_bias) <= bounds.bias_bound ? "1" : "0"});
  csv.add_row({"msd", CsvWriter::num(1.05 * bounds.msd_bound),
               CsvWriter::num(emp_msd),
               emp_msd <= 1.05 * bounds.msd_bound ? "1" : "0"});
  csv.write((dir / "bounds.csv").string());

  json j;
  j["dobrushin"] = finite(bounds.dobrushin);
  j["bias_bound"] = finite(bounds.bias_bound);
  j["msd_bound"] = finite(bounds.msd_bound);
  j["empirical_bias"] = finite(emp_bias);
  j["empirical_msd"] = finite(emp_msd);
  j["n"] = n;
  j["seeds"] = seeds;
  write_json((dir / "summary.json").string(), j);
  return {"bounds.csv", "summary.json"};
}

std::vector<std::string> run_gradcheck(const ExperimentConfig& cfg,
                                       const fs::path& dir) {
  const MdpModel mdp = load_mdp_instance(cfg.instance);
  const bool spherical = cfg.param_s("kind", "exponential") == "spherical";
  PolicyParam psi;
  if (!spherical) {
    psi = PolicyParam{ParamKind::Exponential,
                      paper_fixture_theta().array().log().matrix()};
    if (mdp.U != 3 || mdp.X != 2) {
      psi = PolicyParam{ParamKind::Exponential,
                        Eigen::MatrixXd::Zero(mdp.X, mdp.U)};
    }
  } else {
    psi = PolicyParam{ParamKind::Spherical,
                      Eigen::MatrixXd::Constant(mdp.X, mdp.U - 1, 0.7)};
  }
  const Eigen::MatrixXd exact = exact_policy_gradient(mdp, psi);
  const int N = static_cast<int>(cfg.param_l("N", 1000));
  const long batches = cfg.param_l("batches", 100);
  const int burn_in = static_cast<int>(cfg.param_l("burn_in", 100));

  RngStream rng(cfg.seed);
  std::vector<Eigen::MatrixXd> wd_samples, score_samples, pf_samples;
  const ActionProbabilityMatrix theta = theta_from_params(psi, mdp.U);
  int x = 0;
  RngStream sim = rng.substream("sim");
  RngStream branch = rng.substream("branch");
  for (long b = 0; b < batches; ++b) {
    RngStream r = rng.substream(static_cast<std::uint64_t>(b));
    wd_samples.push_back(wd_gradient_mdp(mdp, psi, burn_in, N, r).grad);
    BatchTrajectory batch = simulate_batch(mdp, theta, N, x, sim, b);
    score_samples.push_back(score_gradient_mdp(batch, theta, psi, 1.0));
    pf_samples.push_back(
        wd_gradient_parameter_free(batch, theta, psi, branch).grad);
  }
  const GradientEstimate wd = GradientEstimate::from_samples(wd_samples);
  const GradientEstimate score = GradientEstimate::from_samples(score_samples);
  const GradientEstimate pf = GradientEstimate::from_samples(pf_samples);

  CsvWriter csv({"estimator", "state", "component", "exact", "mean",
                 "variance", "half_width"});
  auto emit = [&](const std::string& name, const GradientEstimate& est) {
    for (int i = 0; i < est.value.rows(); ++i) {
      for (int a = 0; a < est.value.cols(); ++a) {
        csv.add_row({name, CsvWriter::num(static_cast<long>(i + 1)),
                     CsvWriter::num(static_cast<long>(a + 1)),
                     CsvWriter::num(exact(i, a)), CsvWriter::num(est.value(i, a)),
                     CsvWriter::num(est.variance(i, a)),
                     CsvWriter::num(est.half_width(i, a))});
      }
    }
  };
  emit("wd", wd);
  emit("score", score);
  emit("wd-parameter-free", pf);
  csv.write((dir / "gradcheck.csv").string());

  json j;
  j["exact_max_abs"] = finite(exact.cwiseAbs().maxCoeff());
  j["wd_max_error"] = finite((wd.value - exact).cwiseAbs().maxCoeff());
  j["pf_max_error"] = finite((pf.value - exact).cwiseAbs().maxCoeff());
  j["score_max_error"] = finite((score.value - exact).cwiseAbs().maxCoeff());
  write_json((dir / "summary.json").string(), j);
  return {"gradcheck.csv", "summary.json"};
}

std::vector<std::string> run_compare(const ExperimentConfig& cfg,
                                     const fs::path& dir) {
  const MdpModel mdp = load_mdp_instance(cfg.instance);
  PolicyParam psi{ParamKind::Exponential,
                  paper_fixture_theta().array().log().matrix()};
  const long batches = cfg.param_l("batches", 100);
  std::vector<int> Ns;
  {
    std::stringstream ss(cfg.param_s("N_values", "1000,10000"));
    std::string tok;
    while (std::getline(ss, tok, ',')) Ns.push_back(std::stoi(trim(tok)));
  }
  RngStream rng(cfg.seed);
  const VarianceComparisonReport rep =
      variance_comparison_experiment(mdp, psi, Ns, batches, rng);

  CsvWriter csv({"estimator", "N", "state", "component", "mean", "variance",
                 "half_width", "seconds"});
  for (const auto& row : rep.rows) {
    for (int i = 0; i < row.mean.rows(); ++i) {
      for (int a = 0; a < row.mean.cols(); ++a) {
        csv.add_row({row.estimator, CsvWriter::num(static_cast<long>(row.N)),
                     CsvWriter::num(static_cast<long>(i + 1)),
                     CsvWriter::num(static_cast<long>(a + 1)),
                     CsvWriter::num(row.mean(i, a)),
                     CsvWriter::num(row.variance(i, a)),
                     CsvWriter::num(row.half_width(i, a)),
                     CsvWriter::num(row.seconds)});
      }
    }
  }
  csv.write((dir / "estimator_comparison.csv").string());

  json j;
  j["exact_gradient_11"] = finite(rep.exact_gradient(0, 0));
  for (const auto& row : rep.rows) {
    json r;
    r["seconds"] = finite(row.seconds);
    r["max_variance"] = finite(row.variance.maxCoeff());
    j["rows"][row.estimator + "@" + std::to_string(row.N)] = r;
  }
  const auto& score_row = rep.find("score", Ns.front());
  const auto& wd_row = rep.find("wd-parameter-free", Ns.front());
  j["cpu_ratio_score_over_wd"] =
      finite(score_row.seconds / std::max(wd_row.seconds, 1e-12));
  write_json((dir / "summary.json").string(), j);
  return {"estimator_comparison.csv", "summary.json"};
}

std::vector<std::string> run_qlearn(const ExperimentConfig& cfg,
                                    const fs::path& dir) {
  const MdpModel mdp = load_mdp_instance(cfg.instance);
  QLearnOptions opts;
  opts.rho = cfg.param_d("rho", 0.8);
  opts.n_intervals = cfg.param_l("n_intervals", 10000);
  opts.delta_interval = static_cast<int>(cfg.param_l("delta_interval", 100));
  opts.exploration = cfg.param_d("exploration", 0.1);
  opts.eps_base = cfg.param_d("eps_base", 1.0);
  const long log_every = cfg.param_l("log_every", 1000);

  RngStream rng(cfg.seed);
  const QSimulator sim = make_mdp_simulator(mdp);

  // Instrumented run so the step log can be emitted.
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(mdp.X, mdp.U);
  Eigen::MatrixXi visits = Eigen::MatrixXi::Zero(mdp.X, mdp.U);
  CsvWriter log({"step", "x", "u", "cost", "max_q_delta"});
  int x = 0;
  long step = 0;
  std::vector<int> policy(mdp.X, 0);
  RngStream run_rng = rng.substream("qlearn");
  for (long interval = 0; interval < opts.n_intervals; ++interval) {
    for (int i = 0; i < mdp.X; ++i) {
      int best = 0;
      for (int u = 1; u < mdp.U; ++u) {
        if (Q(i, u) < Q(i, best)) best = u;
      }
      policy[i] = best;
    }
    for (int k = 0; k < opts.delta_interval; ++k, ++step) {
      int u = policy[x];
      if (opts.exploration > 0.0 && run_rng.uniform() < opts.exploration) {
        u = run_rng.uniform_int(mdp.U);
      }
      const auto [x_next, cost] = sim(x, u, run_rng);
      visits(x, u) += 1;
      const double eps = visit_step_size(visits, x, u, opts.eps_base);
      const double before = Q(x, u);
      q_update(Q, x, u, cost, x_next, opts.rho, eps);
      if (step % log_every == 0) {
        log.add_row({CsvWriter::num(step), CsvWriter::num(static_cast<long>(x)),
                     CsvWriter::num(static_cast<long>(u)), CsvWriter::num(cost),
                     CsvWriter::num(std::abs(Q(x, u) - before))});
      }
      x = x_next;
    }
  }
  log.write((dir / "qlearn_log.csv").string());
  write_matrix_file((dir / "q_table.txt").string(), Q);

  const int vi_iter = static_cast<int>(cfg.param_l("vi_iterations", 2000));
  const ValueIterationResult vi = value_iteration(mdp, opts.rho, vi_iter);
  json j;
  j["sup_error"] = finite((Q - vi.Q).cwiseAbs().maxCoeff());
  j["sup_relative_error"] =
      finite((Q - vi.Q).cwiseAbs().maxCoeff() / vi.Q.cwiseAbs().maxCoeff());
  j["steps"] = step;
  write_json((dir / "summary.json").string(), j);
  return {"qlearn_log.csv", "q_table.txt", "summary.json"};
}

std::vector<std::string> run_cmdp(const ExperimentConfig& cfg,
                                  const fs::path& dir) {
  const CmdpModel cmdp = load_cmdp_instance(cfg.instance);
  CmdpTrainOptions opts;
  opts.batch_size = static_cast<int>(cfg.param_l("batch_size", 200));
  opts.n_batches = cfg.param_l("n_batches", 2000);
  opts.eps = cfg.param_d("eps", 0.005);
  opts.Delta = cfg.param_d("Delta", 100.0);
  const std::string est = cfg.param_s("estimator", "wd");
  opts.estimator = est == "score"
                       ? PgEstimator::Score
                       : (est == "wd-parameter-free" ? PgEstimator::WdParameterFree
                                                     : PgEstimator::Wd);
  RngStream rng(cfg.seed);
  PolicyParam psi0{ParamKind::Exponential,
                   Eigen::MatrixXd::Zero(cmdp.mdp.X, cmdp.mdp.U)};
  const auto trace = cmdp_train(cmdp, psi0, opts, rng);

  CsvWriter csv({"batch", "exact_cost", "exact_B1", "lambda1", "B_hat1"});
  for (size_t n = 0; n < trace.size(); ++n) {
    csv.add_row({CsvWriter::num(static_cast<long>(n)),
                 CsvWriter::num(trace[n].exact_cost),
                 CsvWriter::num(trace[n].exact_B(0)),
                 CsvWriter::num(trace[n].lambda(0)),
                 CsvWriter::num(trace[n].B_hat(0))});
  }
  csv.write((dir / "cmdp_trace.csv").string());

  const int grid_pts = static_cast<int>(cfg.param_l("grid_points", 41));
  const CmdpGridResult oracle = cmdp_grid_oracle(cmdp, grid_pts);
  json j;
  j["final_cost"] = finite(trace.back().exact_cost);
  j["final_constraint"] = finite(trace.back().exact_B(0));
  j["level"] = finite(cmdp.gamma(0));
  j["oracle_cost"] = finite(oracle.cost);
  j["oracle_constraint"] = finite(oracle.constraint_values(0));
  write_json((dir / "summary.json").string(), j);
  return {"cmdp_trace.csv", "summary.json"};
}

std::vector<std::string> run_discrete_opt(const ExperimentConfig& cfg,
                                          const fs::path& dir) {
  const double lambda = cfg.param_d("lambda", 1.0);
  const int S = static_cast<int>(cfg.param_l("S", 10));
  BenchmarkOptions opts;
  opts.n_steps = cfg.param_l("n_steps", 10000);
  opts.n_runs = static_cast<int>(cfg.param_l("n_runs", 100));
  RngStream rng(cfg.seed);

  RngStream rng_as = rng.substream("as");
  RngStream rng_rs = rng.substream("rs");
  RngStream rng_ucb = rng.substream("ucb");
  const auto as = poisson_mode_benchmark(lambda, S, SearchAlgo::AdaptiveSearch,
                                         opts, rng_as);
  const auto rs =
      poisson_mode_benchmark(lambda, S, SearchAlgo::RandomSearch, opts, rng_rs);
  const auto ucb =
      poisson_mode_benchmark(lambda, S, SearchAlgo::Ucb, opts, rng_ucb);

  CsvWriter csv({"n", "AS", "RS", "UCB"});
  for (size_t i = 0; i < as.size(); ++i) {
    csv.add_row({CsvWriter::num(as[i].checkpoint),
                 CsvWriter::num(as[i].pct_converged),
                 CsvWriter::num(rs[i].pct_converged),
                 CsvWriter::num(ucb[i].pct_converged)});
  }
  csv.write((dir / "convergence.csv").string());

  json j;
  j["lambda"] = lambda;
  j["S"] = S;
  j["target_set"] = poisson_mode_target_set(lambda);
  j["final_pct"]["AS"] = finite(as.back().pct_converged);
  j["final_pct"]["RS"] = finite(rs.back().pct_converged);
  j["final_pct"]["UCB"] = finite(ucb.back().pct_converged);
  write_json((dir / "summary.json").string(), j);
  return {"convergence.csv", "summary.json"};
}

std::vector<std::string> run_hmm_rmle(const ExperimentConfig& cfg,
                                      const fs::path& dir) {
  const HmmModel truth = load_hmm_instance(cfg.instance);
  const long n_samples = cfg.param_l("n_samples", 200000);
  const double eps = cfg.param_d("eps_step", 1e-3);
  const long trace_every = cfg.param_l("trace_every", 1000);

  RngStream rng(cfg.seed);
  RngStream sim = rng.substream("hmm-sim");
  const HmmSample data =
      simulate_hmm(truth, static_cast<int>(n_samples), sim);

  HmmModel model(truth.kind, Eigen::MatrixXd::Zero(truth.states(),
                                                   truth.psi.cols()),
                 Eigen::VectorXd::Ones(truth.states()));
  PredictorState state = uniform_predictor(model.states());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(model.states(), model.n_params());
  CsvWriter csv({"step", "P00", "P11", "sigma0", "sigma1"});
  for (long k = 0; k < n_samples; ++k) {
    const double y = data.observations[static_cast<size_t>(k)];
    const Eigen::VectorXd S = incremental_score(state, w, y, model);
    rmle_step(model, S, eps);
    w = sensitivity_step(w, state, y, model);
    state = predictor_step(state, y, model).state;
    if (k % trace_every == 0) {
      const Eigen::MatrixXd P = model.transition().mat();
      csv.add_row({CsvWriter::num(k), CsvWriter::num(P(0, 0)),
                   CsvWriter::num(P(1, 1)), CsvWriter::num(model.sigma(0)),
                   CsvWriter::num(model.sigma(1))});
    }
  }
  csv.write((dir / "rmle_trace.csv").string());

  json j;
  const Eigen::MatrixXd err =
      (model.transition().mat() - truth.transition().mat()).cwiseAbs();
  j["transition_sup_error"] = finite(err.maxCoeff());
  j["sigma"] = {finite(model.sigma(0)), finite(model.sigma(1))};
  write_json((dir / "summary.json").string(), j);
  return {"rmle_trace.csv", "summary.json"};
}

std::vector<std::string> run_lms_track(const ExperimentConfig& cfg,
                                       const fs::path& dir) {
  const double mu = cfg.param_d("mu", 0.05);
  const double kappa = cfg.param_d("kappa", 1.0);
  TrackOptions opts;
  opts.n_steps = cfg.param_l("n_steps", 200000);
  opts.burn_in = cfg.param_l("burn_in", 2000);
  opts.noise_sd = cfg.param_d("noise_sd", 0.1);

  Eigen::MatrixXd Q(2, 2), values(2, 3);
  Q << -1.0, 1.0, 1.0, -1.0;
  values << 1.0, 0.0, -1.0, -1.0, 2.0, 0.5;

  RngStream rng(cfg.seed);
  CsvWriter csv({"mu", "eps_slow", "mse"});
  json ratios;
  double prev_mse = 0.0;
  for (int half = 0; half < 2; ++half) {
    const double mu_h = half == 0 ? mu : mu / 2.0;
    const SlowChainModel model(Q, kappa * mu_h * mu_h, values);
    RngStream r = rng.substream(half);
    const TrackResult res = slow_chain_track(model, mu_h, opts, r);
    csv.add_row({CsvWriter::num(mu_h), CsvWriter::num(kappa * mu_h * mu_h),
                 CsvWriter::num(res.mse)});
    if (half == 1) ratios["mse_ratio_half_mu"] = finite(res.mse / prev_mse);
    prev_mse = res.mse;
  }
  csv.write((dir / "lms_mse.csv").string());
  write_json((dir / "summary.json").string(), ratios);
  return {"lms_mse.csv", "summary.json"};
}

std::vector<std::string> run_meanfield(const ExperimentConfig& cfg,
                                       const fs::path& dir) {
  DeviationOptions opts;
  opts.runs = static_cast<int>(cfg.param_l("runs", 50));
  {
    std::stringstream ss(cfg.param_s("M_values", "100,1000,10000"));
    std::string tok;
    opts.M_values.clear();
    while (std::getline(ss, tok, ',')) {
      opts.M_values.push_back(std::stoi(trim(tok)));
    }
  }
  const PopulationKernel kernel =
      adoption_kernel(cfg.param_d("a", 0.05), cfg.param_d("b", 0.3),
                      cfg.param_d("c", 0.2));
  RngStream rng(cfg.seed);
  const auto rows = deviation_experiment(kernel, 2, opts, rng);

  CsvWriter csv({"M", "run", "max_deviation"});
  for (const auto& r : rows) {
    csv.add_row({CsvWriter::num(static_cast<long>(r.M)),
                 CsvWriter::num(static_cast<long>(r.run)),
                 CsvWriter::num(r.max_deviation)});
  }
  csv.write((dir / "deviation.csv").string());

  const auto medians = deviation_medians(rows, opts.M_values);
  json j;
  for (size_t i = 0; i < medians.size(); ++i) {
    j["median_max_deviation"][std::to_string(opts.M_values[i])] =
        finite(medians[i]);
  }
  write_json((dir / "summary.json").string(), j);
  return {"deviation.csv", "summary.json"};
}

}  // namespace

double ExperimentConfig::param_d(const std::string& key,
                                 double fallback) const {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  return std::stod(it->second);
}

long ExperimentConfig::param_l(const std::string& key, long fallback) const {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  return std::stol(it->second);
}

std::string ExperimentConfig::param_s(const std::string& key,
                                      const std::string& fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "experiment") {
      cfg.experiment = value;
    } else if (key == "instance" || key == "fixture") {
      cfg.instance = value;
    } else if (key == "seed") {
      cfg.seed = std::stoull(value);
      cfg.seed_was_set = true;
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else if (cfg.params.count(key)) {
      throw std::runtime_error("config: duplicate key '" + key + "'");
    } else {
      cfg.params[key] = value;
    }
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

ValidationReport validate_config(const ExperimentConfig& config) {
  ValidationReport rep;
  if (config.experiment.empty()) {
    rep.errors.push_back("missing 'experiment' key");
    return rep;
  }
  if (std::find(kExperiments.begin(), kExperiments.end(), config.experiment) ==
      kExperiments.end()) {
    rep.errors.push_back("unknown experiment '" + config.experiment +
                         "' (did you mean '" +
                         nearest(config.experiment, kExperiments) + "'?)");
    return rep;
  }
  if (!config.seed_was_set) {
    rep.warnings.push_back("seed not set; defaulting to 0");
  }
  const auto& known = kKnownParams.at(config.experiment);
  for (const auto& [key, value] : config.params) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      rep.errors.push_back("unknown key '" + key + "' for experiment '" +
                           config.experiment + "'");
    }
    try {
      (void)value;
    } catch (...) {
    }
  }
  // Hyperparameter constraints shared across experiments.
  if (config.params.count("zeta") || config.params.count("gamma_exp")) {
    const double zeta = config.param_d("zeta", 1.0);
    const double ge = config.param_d("gamma_exp", 0.16);
    if (!(2.0 * zeta - 2.0 * ge > 1.0)) {
      rep.errors.push_back(
          "step schedule violates 2*zeta - 2*gamma_exp > 1 (zeta=" +
          std::to_string(zeta) + ", gamma_exp=" + std::to_string(ge) + ")");
    }
  }
  if (config.params.count("eps") && config.params.count("Delta")) {
    if (!(config.param_d("eps", 0.0) < config.param_d("Delta", 1.0))) {
      rep.errors.push_back("need eps < Delta for the primal-dual update");
    }
  }
  // Fixture / instance checks with a nearest-name hint for likely typos.
  if (!config.instance.empty() && !is_builtin_fixture(config.instance)) {
    if (config.instance.find('/') == std::string::npos &&
        config.instance.find('.') == std::string::npos) {
      rep.errors.push_back("unknown fixture '" + config.instance +
                           "' (did you mean '" +
                           nearest(config.instance, kFixtures) + "'?)");
    } else if (!fs::exists(config.instance)) {
      rep.errors.push_back("instance file not found: " + config.instance);
    } else {
      try {
        if (config.experiment == "cmdp") {
          (void)load_cmdp_instance(config.instance);
        } else if (config.experiment == "bounds") {
          (void)load_chain_instance(config.instance);
        } else if (config.experiment == "gradcheck" ||
                   config.experiment == "compare-estimators" ||
                   config.experiment == "qlearn") {
          (void)load_mdp_instance(config.instance);
        }
      } catch (const std::exception& e) {
        rep.errors.push_back(std::string("instance failed to load: ") +
                             e.what());
      }
    }
  }
  return rep;
}

std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> list_fixtures() { return kFixtures; }
std::vector<std::string> list_experiments() { return kExperiments; }

RunManifest run_experiment(const ExperimentConfig& config) {
  const ValidationReport rep = validate_config(config);
  if (!rep.ok()) {
    throw std::invalid_argument("invalid config: " + rep.errors.front());
  }

  fs::path out_dir = config.output_dir;
  if (const char* root = std::getenv("SASIM_OUTPUT_ROOT");
      root != nullptr && out_dir.is_relative()) {
    out_dir = fs::path(root) / out_dir;
  }
  out_dir /= config.experiment;
  fs::create_directories(out_dir);

  RunManifest manifest;
  manifest.experiment = config.experiment;
  manifest.version = std::string("sasim ") + SASIM_VERSION;
  manifest.started_utc = utc_now();
  manifest.resolved_config["experiment"] = config.experiment;
  manifest.resolved_config["instance"] = config.instance;
  manifest.resolved_config["seed"] = std::to_string(config.seed);
  manifest.resolved_config["output_dir"] = out_dir.string();
  for (const auto& [k, v] : config.params) manifest.resolved_config[k] = v;

  std::vector<std::string> files;
  if (config.experiment == "bounds") {
    files = run_bounds(config, out_dir);
  } else if (config.experiment == "gradcheck") {
    files = run_gradcheck(config, out_dir);
  } else if (config.experiment == "compare-estimators") {
    files = run_compare(config, out_dir);
  } else if (config.experiment == "qlearn") {
    files = run_qlearn(config, out_dir);
  } else if (config.experiment == "cmdp") {
    files = run_cmdp(config, out_dir);
  } else if (config.experiment == "discrete-opt") {
    files = run_discrete_opt(config, out_dir);
  } else if (config.experiment == "hmm-rmle") {
    files = run_hmm_rmle(config, out_dir);
  } else if (config.experiment == "lms-track") {
    files = run_lms_track(config, out_dir);
  } else if (config.experiment == "meanfield") {
    files = run_meanfield(config, out_dir);
  }
  manifest.finished_utc = utc_now();
  for (const auto& f : files) {
    manifest.output_checksums[f] = file_checksum((out_dir / f).string());
  }

  json j;
  j["experiment"] = manifest.experiment;
  j["version"] = manifest.version;
  j["started_utc"] = manifest.started_utc;
  j["finished_utc"] = manifest.finished_utc;
  j["config"] = manifest.resolved_config;
  j["checksums"] = manifest.output_checksums;
  write_json((out_dir / "manifest.json").string(), j);
  return manifest;
}

}  // namespace sasim
