#include "sasim/cmdp.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "sasim/matrix_io.hpp"

namespace sasim {

namespace {

// Exact average of an X x U stage function under theta, through the state
// marginal chain P_theta(i,j) = sum_a theta(i,a) P_a(i,j). Works for every
// theta whose mixed state chain is regular, including pure policies where
// the augmented pair chain is not.
double exact_stage_average(const MdpModel& mdp,
                           const ActionProbabilityMatrix& theta,
                           const Eigen::MatrixXd& stage) {
  Eigen::MatrixXd mixed = Eigen::MatrixXd::Zero(mdp.X, mdp.X);
  for (int a = 0; a < mdp.U; ++a) {
    for (int i = 0; i < mdp.X; ++i) {
      mixed.row(i) += theta(i, a) * mdp.P[a].mat().row(i);
    }
  }
  const Pmf pi = stationary_distribution(StochasticMatrix(std::move(mixed)));
  double acc = 0.0;
  for (int i = 0; i < mdp.X; ++i) {
    for (int a = 0; a < mdp.U; ++a) acc += pi(i) * theta(i, a) * stage(i, a);
  }
  return acc;
}

// All rows of a U-simplex grid with `points` levels per axis (step
// 1/(points-1)), enumerated recursively.
void simplex_grid(int U, int ticks, int pos, Eigen::VectorXd& row, int left,
                  std::vector<Eigen::VectorXd>& out) {
  if (pos == U - 1) {
    row(pos) = static_cast<double>(left) / ticks;
    out.push_back(row);
    return;
  }
  for (int k = 0; k <= left; ++k) {
    row(pos) = static_cast<double>(k) / ticks;
    simplex_grid(U, ticks, pos + 1, row, left - k, out);
  }
}

}  // namespace

CmdpModel::CmdpModel(MdpModel m, std::vector<Eigen::MatrixXd> constraints,
                     Eigen::VectorXd levels)
    : mdp(std::move(m)), beta(std::move(constraints)), gamma(std::move(levels)) {
  if (beta.empty()) throw std::invalid_argument("CmdpModel: need L >= 1");
  if (gamma.size() != static_cast<long>(beta.size())) {
    throw std::invalid_argument("CmdpModel: levels/constraints count mismatch");
  }
  for (const auto& b : beta) {
    if (b.rows() != mdp.X || b.cols() != mdp.U) {
      throw std::invalid_argument("CmdpModel: constraint matrix must be X x U");
    }
  }
}

CmdpModel reference_cmdp() {
  Eigen::MatrixXd p1(2, 2), p2(2, 2), c(2, 2), b(2, 2);
  p1 << 0.7, 0.3, 0.4, 0.6;
  p2 << 0.2, 0.8, 0.6, 0.4;
  c << 4.0, 1.0, 6.0, 1.0;
  b << 0.0, 3.0, 0.0, 3.0;
  std::vector<StochasticMatrix> P;
  P.emplace_back(p1);
  P.emplace_back(p2);
  Eigen::VectorXd gamma(1);
  gamma << 1.5;
  return CmdpModel(MdpModel(std::move(P), c), {b}, gamma);
}

Eigen::VectorXd exact_constraint_values(const CmdpModel& cmdp,
                                        const ActionProbabilityMatrix& theta) {
  Eigen::VectorXd v(cmdp.n_constraints());
  for (int l = 0; l < cmdp.n_constraints(); ++l) {
    v(l) = exact_stage_average(cmdp.mdp, theta, cmdp.beta[l]);
  }
  return v;
}

void constraint_estimate_update(Eigen::VectorXd& B_hat, const CmdpModel& cmdp,
                                const BatchTrajectory& batch, double eps) {
  if (B_hat.size() != cmdp.n_constraints()) {
    throw std::invalid_argument("constraint_estimate_update: size mismatch");
  }
  const double root_eps = std::sqrt(eps);
  for (int l = 0; l < cmdp.n_constraints(); ++l) {
    double mean = 0.0;
    for (const auto& z : batch.z) mean += cmdp.beta[l](z.x, z.u);
    mean = mean / batch.length() - cmdp.gamma(l);
    B_hat(l) += root_eps * (mean - B_hat(l));
  }
}

void primal_dual_update(Eigen::MatrixXd& psi, Eigen::VectorXd& lambda,
                        const Eigen::MatrixXd& grad_C,
                        const std::vector<Eigen::MatrixXd>& grad_B,
                        const Eigen::VectorXd& B_hat, double eps,
                        double Delta) {
  if (!(eps > 0.0 && Delta > 0.0 && eps < Delta)) {
    throw std::invalid_argument("primal_dual_update: need 0 < eps < Delta");
  }
  Eigen::MatrixXd step = grad_C;
  for (long l = 0; l < lambda.size(); ++l) {
    const double weight = std::max(0.0, lambda(l) + Delta * B_hat(l));
    step += weight * grad_B[static_cast<size_t>(l)];
  }
  psi -= eps * step;
  if (!psi.allFinite()) {
    throw std::runtime_error("primal_dual_update: non-finite psi");
  }
  for (long l = 0; l < lambda.size(); ++l) {
    lambda(l) = std::max((1.0 - eps / Delta) * lambda(l),
                         lambda(l) + eps * B_hat(l));
  }
}

std::vector<CmdpTrainRecord> cmdp_train(const CmdpModel& cmdp,
                                        const PolicyParam& psi0,
                                        const CmdpTrainOptions& opts,
                                        RngStream& rng) {
  const int L = cmdp.n_constraints();
  PolicyParam psi = psi0;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(L);
  Eigen::VectorXd B_hat = Eigen::VectorXd::Zero(L);
  std::vector<CmdpTrainRecord> trace;
  trace.reserve(opts.n_batches);
  int x = 0;
  RngStream sim_rng = rng.substream("cmdp-sim");

  // The constraint gradients reuse the cost machinery with beta_l as the
  // stage function.
  std::vector<Eigen::MatrixXd> stages;
  stages.push_back(cmdp.mdp.cost);
  for (const auto& b : cmdp.beta) stages.push_back(b);

  for (long n = 0; n < opts.n_batches; ++n) {
    RngStream batch_rng = rng.substream(static_cast<std::uint64_t>(n));
    const ActionProbabilityMatrix theta = theta_from_params(psi, cmdp.mdp.U);

    std::vector<Eigen::MatrixXd> grads;
    BatchTrajectory batch;
    if (opts.estimator == PgEstimator::Wd) {
      for (auto& r : wd_gradient_mdp_multi(cmdp.mdp, psi, opts.wd_burn_in,
                                           opts.batch_size, batch_rng, stages)) {
        grads.push_back(std::move(r.grad));
      }
      // Tracker still needs an observed batch under the current policy.
      batch = simulate_batch(cmdp.mdp, theta, opts.batch_size, x, sim_rng, n);
    } else {
      batch = simulate_batch(cmdp.mdp, theta, opts.batch_size, x, sim_rng, n);
      for (const auto& stage : stages) {
        BatchTrajectory relabeled = batch;
        for (int k = 0; k < batch.length(); ++k) {
          relabeled.costs[static_cast<size_t>(k)] =
              stage(batch.z[static_cast<size_t>(k)].x,
                    batch.z[static_cast<size_t>(k)].u);
        }
        if (opts.estimator == PgEstimator::Score) {
          grads.push_back(score_gradient_mdp(relabeled, theta, psi));
        } else {
          grads.push_back(
              wd_gradient_parameter_free(relabeled, theta, psi, batch_rng).grad);
        }
      }
    }

    constraint_estimate_update(B_hat, cmdp, batch, opts.eps);
    std::vector<Eigen::MatrixXd> grad_B(grads.begin() + 1, grads.end());
    primal_dual_update(psi.psi, lambda, grads[0], grad_B, B_hat, opts.eps,
                       opts.Delta);

    CmdpTrainRecord rec;
    rec.psi = psi.psi;
    rec.lambda = lambda;
    rec.B_hat = B_hat;
    const ActionProbabilityMatrix theta_new = theta_from_params(psi, cmdp.mdp.U);
    rec.exact_cost = exact_stage_average(cmdp.mdp, theta_new, cmdp.mdp.cost);
    rec.exact_B = exact_constraint_values(cmdp, theta_new);
    trace.push_back(std::move(rec));
  }
  return trace;
}

CmdpGridResult cmdp_grid_oracle(const CmdpModel& cmdp,
                                int grid_points_per_axis) {
  const int X = cmdp.mdp.X;
  const int U = cmdp.mdp.U;
  if (X * (U - 1) > 4) {
    throw std::invalid_argument("cmdp_grid_oracle: instance too large for grid");
  }
  if (grid_points_per_axis < 2) {
    throw std::invalid_argument("cmdp_grid_oracle: need at least 2 points");
  }
  std::vector<Eigen::VectorXd> rows;
  Eigen::VectorXd row(U);
  simplex_grid(U, grid_points_per_axis - 1, 0, row, grid_points_per_axis - 1,
               rows);

  CmdpGridResult best;
  best.cost = std::numeric_limits<double>::infinity();
  std::vector<size_t> idx(static_cast<size_t>(X), 0);
  const size_t n_rows = rows.size();
  bool done = false;
  while (!done) {
    Eigen::MatrixXd theta_m(X, U);
    for (int i = 0; i < X; ++i) theta_m.row(i) = rows[idx[i]].transpose();
    ActionProbabilityMatrix theta(theta_m);
    try {
      const Eigen::VectorXd b = exact_constraint_values(cmdp, theta);
      if ((b.array() <= cmdp.gamma.array() + 1e-12).all()) {
        const double c = exact_stage_average(cmdp.mdp, theta, cmdp.mdp.cost);
        if (c < best.cost) {
          best.cost = c;
          best.theta = theta_m;
          best.constraint_values = b;
          best.feasible = true;
        }
      }
    } catch (const std::runtime_error&) {
      // Grid point with a non-regular mixed chain; skip it.
    }
    // Advance the mixed-radix row index.
    done = true;
    for (int i = 0; i < X; ++i) {
      if (++idx[static_cast<size_t>(i)] < n_rows) {
        done = false;
        break;
      }
      idx[static_cast<size_t>(i)] = 0;
    }
  }
  if (!best.feasible) {
    throw std::runtime_error("cmdp_grid_oracle: no feasible grid point");
  }
  return best;
}

CmdpModel read_cmdp(std::istream& in) {
  MdpModel mdp = read_mdp(in);
  // Constraint count comes from the level vector at the end, so read
  // matrices until the stream is exhausted; the final matrix is 1 x L.
  std::vector<Eigen::MatrixXd> blocks;
  while (true) {
    std::streampos pos = in.tellg();
    long r = 0, c = 0;
    if (!(in >> r >> c)) break;
    in.seekg(pos);
    blocks.push_back(read_matrix(in));
  }
  if (blocks.size() < 2) {
    throw std::runtime_error("read_cmdp: expected constraint matrices and levels");
  }
  Eigen::MatrixXd levels = blocks.back();
  blocks.pop_back();
  if (levels.rows() != 1 ||
      levels.cols() != static_cast<long>(blocks.size())) {
    throw std::runtime_error("read_cmdp: level vector shape mismatch");
  }
  return CmdpModel(std::move(mdp), std::move(blocks),
                   levels.row(0).transpose());
}

void write_cmdp(std::ostream& out, const CmdpModel& cmdp) {
  write_mdp(out, cmdp.mdp);
  for (const auto& b : cmdp.beta) write_matrix(out, b);
  write_matrix(out, cmdp.gamma.transpose());
}

CmdpModel read_cmdp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_cmdp(in);
}

void write_cmdp_file(const std::string& path, const CmdpModel& cmdp) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_cmdp(out, cmdp);
}

}  // namespace sasim
