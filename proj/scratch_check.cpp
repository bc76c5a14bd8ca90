#include <cstdio>

#include "sasim/hmm.hpp"

using namespace sasim;

int main() {
  Eigen::MatrixXd p(2, 2);
  p << 0.9, 0.1, 0.2, 0.8;
  const HmmModel truth = HmmModel::from_transition(p, Eigen::Vector2d(1, 1));
  RngStream rng(6);
  int good = 0;
  for (int seed = 0; seed < 10; ++seed) {
    RngStream r = rng.substream(seed);
    const HmmSample data = simulate_hmm(truth, 200000, r);
    HmmModel start(ParamKind::Exponential, Eigen::MatrixXd::Zero(2, 2),
                   Eigen::Vector2d(1.0, 1.0));
    const RmleResult res = rmle_run(start, data.observations, 1e-3);
    const Eigen::MatrixXd Pf = res.model.transition().mat();
    const double err = (Pf - p).cwiseAbs().maxCoeff();
    good += err < 0.05;
    std::printf("seed %d: err %.4f  P=[%.3f %.3f; %.3f %.3f] sig=[%.3f %.3f]\n",
                seed, err, Pf(0, 0), Pf(0, 1), Pf(1, 0), Pf(1, 1),
                res.model.sigma(0), res.model.sigma(1));
  }
  std::printf("good %d/10\n", good);
  return 0;
}
