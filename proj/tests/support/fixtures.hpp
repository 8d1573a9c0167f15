#ifndef OVBSENS_TESTS_FIXTURES_HPP
#define OVBSENS_TESTS_FIXTURES_HPP

#include <map>
#include <string>
#include <vector>

#include "ovbsens/covkernel.hpp"
#include "ovbsens/rng.hpp"

namespace ovbsens::testing {

// Reference 4-variable fixture used across the suites.
inline CovarianceModel ref_cov() {
  Eigen::MatrixXd sigma(4, 4);
  sigma << 1.0, 0.5, 0.3, 0.2,  //
      0.5, 1.0, 0.4, 0.1,       //
      0.3, 0.4, 1.0, 0.0,       //
      0.2, 0.1, 0.0, 1.0;
  const std::vector<std::string> labels{"Y", "X", "W11", "W12"};
  const std::map<std::string, Role> roles{{"Y", Role::outcome},
                                          {"X", Role::treatment},
                                          {"W11", Role::calibration},
                                          {"W12", Role::calibration}};
  return CovarianceModel(sigma, labels, roles);
}

// Random positive-definite model with d1 calibration covariates and
// optionally some controls. Knife-edge configurations have measure zero.
inline CovarianceModel random_pd_model(int d1, std::uint64_t seed,
                                       int n_controls = 0) {
  const int p = 2 + d1 + n_controls;
  Rng rng(seed, 0);
  Eigen::MatrixXd a(p, p + 3);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p + 3; ++j) a(i, j) = rng.normal();
  Eigen::MatrixXd m = a * a.transpose() / double(p + 3);
  // normalize to a correlation matrix, then rescale variances
  Eigen::VectorXd d = m.diagonal().cwiseSqrt().cwiseInverse();
  m = (d.asDiagonal() * m * d.asDiagonal()).eval();
  Eigen::VectorXd scale(p);
  for (int i = 0; i < p; ++i) scale(i) = std::sqrt(rng.uniform(0.5, 2.0));
  m = (scale.asDiagonal() * m * scale.asDiagonal()).eval();
  m = ((m + m.transpose()) / 2.0).eval();

  std::vector<std::string> labels{"Y", "X"};
  std::map<std::string, Role> roles{{"Y", Role::outcome},
                                    {"X", Role::treatment}};
  for (int k = 0; k < d1; ++k) {
    labels.push_back("W1" + std::to_string(k + 1));
    roles[labels.back()] = Role::calibration;
  }
  for (int k = 0; k < n_controls; ++k) {
    labels.push_back("W0" + std::to_string(k + 1));
    roles[labels.back()] = Role::control;
  }
  return CovarianceModel(m, labels, roles);
}

}  // namespace ovbsens::testing

#endif  // OVBSENS_TESTS_FIXTURES_HPP
