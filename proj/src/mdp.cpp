#include "sasim/mdp.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "sasim/matrix_io.hpp"

namespace sasim {

namespace {
constexpr double kPoleGuard = 1e-8;

void check_spherical_pole(double psi, int i, int a) {
  // Guard both tan poles: the derivative formulas divide by sin and cos.
  if (std::abs(std::cos(psi)) < kPoleGuard || std::abs(std::sin(psi)) < kPoleGuard) {
    throw std::runtime_error("spherical parametrization pole at component (" +
                             std::to_string(i) + "," + std::to_string(a) + ")");
  }
}
}  // namespace

MdpModel::MdpModel(std::vector<StochasticMatrix> transitions,
                   Eigen::MatrixXd costs)
    : P(std::move(transitions)), cost(std::move(costs)) {
  if (P.empty()) throw std::invalid_argument("MdpModel: no actions");
  U = static_cast<int>(P.size());
  X = P[0].dim();
  for (const auto& p : P) {
    if (p.dim() != X) throw std::invalid_argument("MdpModel: P(u) size mismatch");
  }
  if (cost.rows() != X || cost.cols() != U) {
    throw std::invalid_argument("MdpModel: cost matrix must be X x U");
  }
  if (!cost.allFinite()) throw std::invalid_argument("MdpModel: non-finite cost");
}

MdpModel paper_fixture_mdp() {
  Eigen::MatrixXd p1(2, 2), p2(2, 2), p3(2, 2), c(2, 3);
  p1 << 0.9, 0.1, 0.2, 0.8;
  p2 << 0.3, 0.7, 0.6, 0.4;
  p3 << 0.5, 0.5, 0.1, 0.9;
  c << 50.0, 200.0, 10.0, 3.0, 500.0, 0.0;
  std::vector<StochasticMatrix> P;
  P.emplace_back(p1);
  P.emplace_back(p2);
  P.emplace_back(p3);
  return MdpModel(std::move(P), c);
}

Eigen::MatrixXd paper_fixture_theta() {
  Eigen::MatrixXd t(2, 3);
  t << 0.2, 0.6, 0.2, 0.4, 0.4, 0.2;
  return t;
}

ActionProbabilityMatrix::ActionProbabilityMatrix(Eigen::MatrixXd theta)
    : theta_(std::move(theta)) {
  if (theta_.rows() == 0 || theta_.cols() == 0) {
    throw std::invalid_argument("ActionProbabilityMatrix: empty");
  }
  for (Eigen::Index i = 0; i < theta_.rows(); ++i) {
    double s = theta_.row(i).sum();
    if ((theta_.row(i).array() < -1e-12).any() || std::abs(s - 1.0) > 1e-9) {
      throw std::invalid_argument("ActionProbabilityMatrix: row " +
                                  std::to_string(i) + " not on the simplex");
    }
    theta_.row(i) = theta_.row(i).cwiseMax(0.0);
    if (std::abs(s - 1.0) > 1e-12) theta_.row(i) /= theta_.row(i).sum();
  }
}

ActionProbabilityMatrix theta_from_params(const PolicyParam& psi, int actions) {
  const int X = psi.states();
  Eigen::MatrixXd theta(X, actions);
  if (psi.kind == ParamKind::Exponential) {
    if (psi.param_cols() != actions) {
      throw std::invalid_argument("theta_from_params: psi must be X x U");
    }
    for (int i = 0; i < X; ++i) {
      const double mx = psi.psi.row(i).maxCoeff();
      Eigen::VectorXd e = (psi.psi.row(i).array() - mx).exp();
      theta.row(i) = (e / e.sum()).transpose();
    }
  } else {
    if (actions < 2 || psi.param_cols() != actions - 1) {
      throw std::invalid_argument(
          "theta_from_params: spherical psi must be X x (U-1) with U >= 2");
    }
    for (int i = 0; i < X; ++i) {
      double sin_prod = 1.0;
      for (int u = 0; u < actions - 1; ++u) {
        const double cu = std::cos(psi.psi(i, u));
        theta(i, u) = cu * cu * sin_prod;
        const double su = std::sin(psi.psi(i, u));
        sin_prod *= su * su;
      }
      theta(i, actions - 1) = sin_prod;
    }
  }
  return ActionProbabilityMatrix(theta);
}

PolicyJacobian dtheta_dpsi(const PolicyParam& psi, int actions) {
  const ActionProbabilityMatrix theta = theta_from_params(psi, actions);
  const int X = psi.states();
  const int A = psi.param_cols();
  PolicyJacobian jac;
  jac.by_state.resize(X);
  for (int i = 0; i < X; ++i) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(A, actions);
    if (psi.kind == ParamKind::Exponential) {
      for (int a = 0; a < A; ++a) {
        for (int ab = 0; ab < actions; ++ab) {
          d(a, ab) = (a == ab) ? theta(i, a) * (1.0 - theta(i, a))
                               : -theta(i, a) * theta(i, ab);
        }
      }
    } else {
      for (int a = 0; a < A; ++a) {
        check_spherical_pole(psi.psi(i, a), i, a);
        const double t = std::tan(psi.psi(i, a));
        for (int ab = 0; ab < actions; ++ab) {
          if (ab < a) {
            d(a, ab) = 0.0;
          } else if (ab == a) {
            d(a, ab) = -2.0 * theta(i, a) * t;
          } else {
            d(a, ab) = 2.0 * theta(i, ab) / t;
          }
        }
      }
    }
    jac.by_state[i] = std::move(d);
  }
  return jac;
}

StochasticMatrix augmented_kernel(const MdpModel& mdp,
                                  const ActionProbabilityMatrix& theta) {
  if (theta.states() != mdp.X || theta.actions() != mdp.U) {
    throw std::invalid_argument("augmented_kernel: theta dimension mismatch");
  }
  const int Z = mdp.X * mdp.U;
  Eigen::MatrixXd k(Z, Z);
  for (int i = 0; i < mdp.X; ++i) {
    for (int u = 0; u < mdp.U; ++u) {
      const int zi = flatten_state_action(i, u, mdp.U);
      for (int j = 0; j < mdp.X; ++j) {
        for (int ab = 0; ab < mdp.U; ++ab) {
          k(zi, flatten_state_action(j, ab, mdp.U)) =
              theta(j, ab) * mdp.P[u](i, j);
        }
      }
    }
  }
  return StochasticMatrix(std::move(k));
}

namespace {
Eigen::VectorXd flattened_costs(const MdpModel& mdp) {
  Eigen::VectorXd c(mdp.X * mdp.U);
  for (int i = 0; i < mdp.X; ++i) {
    for (int u = 0; u < mdp.U; ++u) {
      c(flatten_state_action(i, u, mdp.U)) = mdp.cost(i, u);
    }
  }
  return c;
}
}  // namespace

double average_cost(const MdpModel& mdp, const ActionProbabilityMatrix& theta) {
  const StochasticMatrix k = augmented_kernel(mdp, theta);
  const Pmf pi = stationary_distribution(k);
  return pi.vec().dot(flattened_costs(mdp));
}

Eigen::MatrixXd exact_policy_gradient(const MdpModel& mdp,
                                      const PolicyParam& psi) {
  const ActionProbabilityMatrix theta = theta_from_params(psi, mdp.U);
  const PolicyJacobian jac = dtheta_dpsi(psi, mdp.U);
  const StochasticMatrix k = augmented_kernel(mdp, theta);
  const Pmf pi = stationary_distribution(k);
  const Eigen::MatrixXd Z = fundamental_matrix(k);
  const Eigen::VectorXd zc = Z * flattened_costs(mdp);

  const int A = psi.param_cols();
  Eigen::MatrixXd grad(mdp.X, A);
  // Component (x, a): d P_aug((i,u),(j,abar)) / d psi_{xa} is nonzero only
  // for j = x, where it equals P(i,x; u) * d theta(x, abar) / d psi_{xa}.
  for (int x = 0; x < mdp.X; ++x) {
    for (int a = 0; a < A; ++a) {
      double acc = 0.0;
      for (int i = 0; i < mdp.X; ++i) {
        for (int u = 0; u < mdp.U; ++u) {
          const double w = pi(flatten_state_action(i, u, mdp.U)) * mdp.P[u](i, x);
          if (w == 0.0) continue;
          double inner = 0.0;
          for (int ab = 0; ab < mdp.U; ++ab) {
            inner += jac.by_state[x](a, ab) *
                     zc(flatten_state_action(x, ab, mdp.U));
          }
          acc += w * inner;
        }
      }
      grad(x, a) = acc;
    }
  }
  return grad;
}

ValueIterationResult value_iteration(const MdpModel& mdp, double rho, int N) {
  if (!(rho > 0.0 && rho < 1.0)) {
    throw std::invalid_argument("value_iteration: rho must lie in (0,1)");
  }
  if (N < 0) throw std::invalid_argument("value_iteration: N must be >= 0");
  Eigen::VectorXd V = Eigen::VectorXd::Zero(mdp.X);
  Eigen::VectorXd next(mdp.X);
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < mdp.X; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int u = 0; u < mdp.U; ++u) {
        const double q = mdp.cost(i, u) + rho * mdp.P[u].mat().row(i).dot(V);
        best = std::min(best, q);
      }
      next(i) = best;
    }
    V = next;
  }
  ValueIterationResult out;
  out.V = V;
  out.Q.resize(mdp.X, mdp.U);
  out.policy.resize(mdp.X);
  for (int i = 0; i < mdp.X; ++i) {
    for (int u = 0; u < mdp.U; ++u) {
      out.Q(i, u) = mdp.cost(i, u) + rho * mdp.P[u].mat().row(i).dot(V);
    }
    int best = 0;
    for (int u = 1; u < mdp.U; ++u) {
      if (out.Q(i, u) < out.Q(i, best)) best = u;
    }
    out.policy[i] = best;
  }
  out.bound = std::pow(rho, N + 1) / (1.0 - rho) * mdp.cost.cwiseAbs().maxCoeff();
  return out;
}

std::vector<MdpStep> simulate_mdp(const MdpModel& mdp,
                                  const ActionProbabilityMatrix& theta, int n,
                                  int x0, RngStream& rng) {
  if (x0 < 0 || x0 >= mdp.X) throw std::invalid_argument("simulate_mdp: bad x0");
  std::vector<MdpStep> out;
  out.reserve(n);
  Eigen::VectorXd row(mdp.U);
  int x = x0;
  for (int k = 0; k < n; ++k) {
    row = theta.mat().row(x).transpose();
    const int u =
        rng.categorical({row.data(), static_cast<size_t>(row.size())});
    out.push_back({x, u, mdp.cost(x, u)});
    x = inverse_cdf_step(mdp.P[u], x, rng.uniform());
  }
  return out;
}

MdpModel read_mdp(std::istream& in) {
  int X = 0, U = 0;
  if (!(in >> X >> U) || X <= 0 || U <= 0) {
    throw std::runtime_error("read_mdp: bad header (want \"X U\")");
  }
  std::vector<StochasticMatrix> P;
  P.reserve(U);
  for (int u = 0; u < U; ++u) {
    Eigen::MatrixXd m = read_matrix(in);
    if (m.rows() != X || m.cols() != X) {
      throw std::runtime_error("read_mdp: transition matrix " +
                               std::to_string(u) + " is not X x X");
    }
    P.emplace_back(std::move(m));
  }
  Eigen::MatrixXd c = read_matrix(in);
  if (c.rows() != X || c.cols() != U) {
    throw std::runtime_error("read_mdp: cost matrix is not X x U");
  }
  return MdpModel(std::move(P), std::move(c));
}

void write_mdp(std::ostream& out, const MdpModel& mdp) {
  out << mdp.X << ' ' << mdp.U << '\n';
  for (const auto& p : mdp.P) write_matrix(out, p.mat());
  write_matrix(out, mdp.cost);
}

MdpModel read_mdp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_mdp(in);
}

void write_mdp_file(const std::string& path, const MdpModel& mdp) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_mdp(out, mdp);
}

}  // namespace sasim
