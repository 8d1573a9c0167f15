#ifndef OVBSENS_IDENTIFY_HPP
#define OVBSENS_IDENTIFY_HPP

#include <limits>

#include "ovbsens/covkernel.hpp"

namespace ovbsens {

// Restriction bundle (rx_bar, ry_bar, [c_low, c_high]). ry_bar may be
// infinity, meaning no outcome-equation restriction.
struct SensitivityBudget {
  double rx_bar = 0.0;
  double ry_bar = std::numeric_limits<double>::infinity();
  double c_low = 0.0;
  double c_high = 1.0;

  void validate() const;
};

// Closed interval for beta_long, symmetric around beta_med when produced by
// the closed-form theorems. Infinite endpoints are carried by flags; none of
// the arithmetic downstream ever touches a floating-point infinity.
struct IdentifiedInterval {
  double lower = 0.0;  // meaningful only when lower_finite
  double upper = 0.0;  // meaningful only when upper_finite
  double center = 0.0;
  double dev = 0.0;  // half-width, meaningful only when finite
  bool lower_finite = true;
  bool upper_finite = true;
  bool finite = true;  // == lower_finite && upper_finite

  static IdentifiedInterval point(double center);
  static IdentifiedInterval symmetric(double center, double dev);
  static IdentifiedInterval whole_line(double center);
  static IdentifiedInterval asymmetric(double lower, bool lower_finite,
                                       double upper, bool upper_finite);

  bool contains(double b) const;
};

// Half-width of the identified set under the rx_bar restriction alone.
// Returns +inf when rx_bar^2 >= 1 - R^2_{X~W1} (equality included).
double dev_rx(const NormalizedModel& nm, double rx_bar);

IdentifiedInterval bounds_rx(const NormalizedModel& nm, double rx_bar);

// Maximum of |z_X(r_X, c)| over the budget ball and c-annulus. +inf when
// rx_bar * c_high >= 1.
double zbar_x(double rx_bar, double c_low, double c_high,
              double norm_sigma_w1x);

double dev_rx_c(const NormalizedModel& nm, double rx_bar, double c_low,
                double c_high);

IdentifiedInterval bounds_rx_c(const NormalizedModel& nm, double rx_bar,
                               double c_low, double c_high);

// Largest rx_bar preserving the sign of beta_med (closed form).
double breakdown_point_rx(const NormalizedModel& nm);

// Same under the [c_low, c_high] endogeneity restriction, by bisection on
// the monotone predicate dev(rx_bar) < |beta_med|.
double breakdown_point_rx_c(const NormalizedModel& nm, double c_low,
                            double c_high);

// Throws KnifeEdgeViolated when Cov(W1,X) ~ 0 or Cov(W1,Y) is proportional
// to Cov(W1,X) via Cov(X,Y). Called by every bound entry point.
void require_no_knife_edge(const NormalizedModel& nm);

}  // namespace ovbsens

#endif  // OVBSENS_IDENTIFY_HPP
