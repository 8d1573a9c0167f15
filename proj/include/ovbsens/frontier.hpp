#ifndef OVBSENS_FRONTIER_HPP
#define OVBSENS_FRONTIER_HPP

#include <optional>
#include <vector>

#include "ovbsens/identify.hpp"

namespace ovbsens {

enum class FrontierCase { zero, infinite, interior };

std::string frontier_case_name(FrontierCase c);

struct SolverReport {
  int restarts = 0;
  int feasible_restarts = 0;
  int evaluations = 0;
  double best_objective = 0.0;
  // residuals of the two nonlinear constraints at the reported minimizer
  // (nonnegative values mean satisfied-with-slack)
  double p_slack = 0.0;
  double devsq_slack = 0.0;
};

struct FrontierPoint {
  double rx_bar = 0.0;
  double ry_bf = 0.0;  // meaningful only when case is interior or zero
  FrontierCase case_tag = FrontierCase::interior;
  SolverReport solver_report;

  bool is_infinite() const { return case_tag == FrontierCase::infinite; }
  // +inf reported as such in serialization; arithmetic uses the tag
  double value_or(double inf_substitute) const {
    return is_infinite() ? inf_substitute : ry_bf;
  }
};

struct FrontierCurve {
  double b_low = 0.0;
  double c_low = 0.0;
  double c_high = 1.0;
  std::vector<FrontierPoint> points;  // ordered by rx_bar
};

struct FrontierOptions {
  int restarts = 32;
  int grid_per_dim = 8;   // coarse seeding grid, one slice per dimension
  int halton_seeds = 512;
  int max_iterations = 800;
};

// devsq(z) = Var(Y^{perp X,W1})/Var(X^{perp W1}) * z^2 / (Var(X^{perp W1}) - z^2)
double devsq(const NormalizedModel& nm, double z);

// Smallest |r_Y| able to rationalize beta_long = b at a given (z, c).
double underline_r_y(const NormalizedModel& nm, double z,
                     const Eigen::VectorXd& c, double b);

// p(z, c; rx_bar) >= 0 certifies a feasible r_X vector with |r_X| <= rx_bar.
double p_constraint(const NormalizedModel& nm, double z,
                    const Eigen::VectorXd& c, double rx_bar);

FrontierPoint breakdown_frontier(const NormalizedModel& nm, double rx_bar,
                                 double b_low,
                                 const FrontierOptions& opt = {});

FrontierPoint breakdown_frontier_c(const NormalizedModel& nm, double rx_bar,
                                   double b_low, double c_low, double c_high,
                                   const FrontierOptions& opt = {});

// Fixed point of r |-> ry_bf(r, b_low, c_low, c_high).
double common_breakdown(const NormalizedModel& nm, double b_low, double c_low,
                        double c_high, const FrontierOptions& opt = {});

// Sharp bounds under the full (rx_bar, ry_bar, c_low, c_high) budget, by the
// duality between the breakdown frontier and the identified set.
IdentifiedInterval bounds_rx_ry(const NormalizedModel& nm, double rx_bar,
                                double ry_bar, double c_low, double c_high,
                                const FrontierOptions& opt = {});

}  // namespace ovbsens

#endif  // OVBSENS_FRONTIER_HPP
