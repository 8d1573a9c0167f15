#ifndef OVBSENS_ORACLE_HPP
#define OVBSENS_ORACLE_HPP

#include <cstdint>

#include "ovbsens/identify.hpp"

namespace ovbsens {

// One sampled parameter configuration together with its feasibility verdict.
struct CandidatePoint {
  Eigen::VectorXd r_x;
  Eigen::VectorXd r_y;
  Eigen::VectorXd c;
  double b = 0.0;
  bool feasible = false;
  double witness_z = 0.0;
};

// Checks the identified-set membership conditions directly. Pathological
// inputs (r_x'c = -1, degenerate denominators) report infeasible.
bool membership(const NormalizedModel& nm, double b,
                const Eigen::VectorXd& r_x, const Eigen::VectorXd& r_y,
                const Eigen::VectorXd& c);

// Inner approximation of the identified set by randomized search over
// (r_x, r_y, c). Every collected point re-verifies membership, so the hull
// is guaranteed to sit inside the closed-form interval. Growing n_samples
// extends the sample stream without disturbing its prefix.
IdentifiedInterval brute_force_bounds(const NormalizedModel& nm,
                                      const SensitivityBudget& budget,
                                      std::int64_t n_samples,
                                      std::uint64_t seed);

// Randomized maximization of |z_X(r_x, c)| over the budget set; used to
// cross-check the closed form zbar_x.
double zbar_oracle(const NormalizedModel& nm, double rx_bar, double c_low,
                   double c_high, std::int64_t grid_density,
                   std::uint64_t seed = 12345);

// z_X(r_x, c); throws DomainError when r_x'c = -1.
double z_x(const NormalizedModel& nm, const Eigen::VectorXd& r_x,
           const Eigen::VectorXd& c);

// Minimal-norm r_Y rationalizing beta_long = b at (z, c); the witness used
// by brute_force_bounds. Throws DomainError when the direction degenerates.
Eigen::VectorXd minimal_r_y(const NormalizedModel& nm, double z,
                            const Eigen::VectorXd& c, double b);

}  // namespace ovbsens

#endif  // OVBSENS_ORACLE_HPP
