#include "sasim/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sasim {

PopulationState PopulationState::init(const Eigen::VectorXi& counts) {
  if (counts.size() == 0 || (counts.array() < 0).any() || counts.sum() <= 0) {
    throw std::invalid_argument("PopulationState: bad counts");
  }
  return PopulationState{counts};
}

Eigen::VectorXd PopulationState::fractions() const {
  return counts.cast<double>() / static_cast<double>(agents());
}

namespace {
void check_pmf(const Eigen::VectorXd& pmf, int L) {
  if (pmf.size() != L || (pmf.array() < -1e-12).any() ||
      std::abs(pmf.sum() - 1.0) > 1e-9) {
    throw std::runtime_error("population kernel returned an invalid pmf");
  }
}
}  // namespace

void population_step(PopulationState& pop, const PopulationKernel& kernel,
                     int psi_exo, RngStream& rng) {
  const int L = static_cast<int>(pop.counts.size());
  const Eigen::VectorXd theta = pop.fractions();
  // Uniform agent choice = state choice with the occupancy weights.
  const int i =
      rng.categorical({theta.data(), static_cast<size_t>(theta.size())});
  const Eigen::VectorXd pmf = kernel(i, psi_exo, theta);
  check_pmf(pmf, L);
  const int j = rng.categorical({pmf.data(), static_cast<size_t>(pmf.size())});
  pop.counts(i) -= 1;
  pop.counts(j) += 1;
}

Eigen::VectorXd drift_H(const Eigen::VectorXd& theta_pop,
                        const PopulationKernel& kernel, int psi_exo) {
  const int L = static_cast<int>(theta_pop.size());
  Eigen::VectorXd H = Eigen::VectorXd::Zero(L);
  for (int i = 0; i < L; ++i) {
    if (theta_pop(i) == 0.0) continue;
    const Eigen::VectorXd pmf = kernel(i, psi_exo, theta_pop);
    check_pmf(pmf, L);
    for (int j = 0; j < L; ++j) {
      if (i == j) continue;
      const double flow = theta_pop(i) * pmf(j);
      H(j) += flow;
      H(i) -= flow;
    }
  }
  return H;
}

void mean_field_step(Eigen::VectorXd& theta_bar, const PopulationKernel& kernel,
                     int psi_exo, int M) {
  if (M < 1) throw std::invalid_argument("mean_field_step: M must be >= 1");
  theta_bar += drift_H(theta_bar, kernel, psi_exo) / static_cast<double>(M);
  const double sum = theta_bar.sum();
  if ((theta_bar.array() < -1e-12).any() || std::abs(sum - 1.0) > 1e-12) {
    throw std::runtime_error(
        "mean_field_step: update left the simplex (invalid kernel)");
  }
  theta_bar = theta_bar.cwiseMax(0.0);
  theta_bar /= theta_bar.sum();
}

PopulationKernel adoption_kernel(double a, double b, double c) {
  return [a, b, c](int i, int /*psi_exo*/, const Eigen::VectorXd& theta) {
    Eigen::VectorXd pmf(2);
    if (i == 0) {
      const double p = a + b * theta(1);
      pmf << 1.0 - p, p;
    } else {
      pmf << c, 1.0 - c;
    }
    return pmf;
  };
}

std::vector<DeviationRow> deviation_experiment(const PopulationKernel& kernel,
                                               int L,
                                               const DeviationOptions& opts,
                                               RngStream& rng) {
  std::vector<DeviationRow> rows;
  for (int M : opts.M_values) {
    const long N = opts.horizon > 0 ? opts.horizon : M;
    for (int run = 0; run < opts.runs; ++run) {
      RngStream r = rng.substream(static_cast<std::uint64_t>(M))
                        .substream(static_cast<std::uint64_t>(run));
      // Shared start: integer counts nearest the requested fractions.
      Eigen::VectorXd theta0 = opts.theta0.size() == L
                                   ? opts.theta0
                                   : Eigen::VectorXd::Constant(L, 1.0 / L);
      Eigen::VectorXi counts(L);
      int assigned = 0;
      for (int l = 0; l < L; ++l) {
        counts(l) = static_cast<int>(std::floor(theta0(l) * M));
        assigned += counts(l);
      }
      counts(0) += M - assigned;
      PopulationState pop = PopulationState::init(counts);
      Eigen::VectorXd theta_bar = pop.fractions();

      double worst = 0.0;
      for (long k = 0; k < N; ++k) {
        const int exo =
            opts.exo_path.empty()
                ? 0
                : opts.exo_path[static_cast<size_t>(k) % opts.exo_path.size()];
        population_step(pop, kernel, exo, r);
        mean_field_step(theta_bar, kernel, exo, M);
        worst = std::max(
            worst, (theta_bar - pop.fractions()).cwiseAbs().maxCoeff());
      }
      rows.push_back({M, run, worst});
    }
  }
  return rows;
}

std::vector<double> deviation_medians(const std::vector<DeviationRow>& rows,
                                      const std::vector<int>& M_values) {
  std::vector<double> medians;
  for (int M : M_values) {
    std::vector<double> devs;
    for (const auto& r : rows) {
      if (r.M == M) devs.push_back(r.max_deviation);
    }
    if (devs.empty()) throw std::invalid_argument("no rows for M value");
    std::sort(devs.begin(), devs.end());
    const size_t n = devs.size();
    medians.push_back(n % 2 == 1 ? devs[n / 2]
                                 : 0.5 * (devs[n / 2 - 1] + devs[n / 2]));
  }
  return medians;
}

}  // namespace sasim
