#include "ovbsens/identify.hpp"

#include <algorithm>
#include <cmath>

namespace ovbsens {

namespace {
constexpr double kKnifeEdgeTol = 1e-12;  // relative
constexpr double kBisectTol = 1e-10;
constexpr int kBisectMaxIter = 200;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

void SensitivityBudget::validate() const {
  if (rx_bar < 0.0) throw DomainError("rx_bar must be >= 0");
  if (ry_bar < 0.0) throw DomainError("ry_bar must be >= 0");
  if (c_low < 0.0 || c_high > 1.0 || c_low > c_high)
    throw DomainError("need 0 <= c_low <= c_high <= 1");
  if (c_low >= 1.0)
    throw EmptyConstraint("[c_low, c_high] must intersect [0, 1)");
}

IdentifiedInterval IdentifiedInterval::point(double center) {
  return IdentifiedInterval{center, center, center, 0.0, true, true, true};
}

IdentifiedInterval IdentifiedInterval::symmetric(double center, double dev) {
  return IdentifiedInterval{center - dev, center + dev,
                            center,       dev,
                            true,         true,
                            true};
}

IdentifiedInterval IdentifiedInterval::whole_line(double center) {
  return IdentifiedInterval{0.0, 0.0, center, 0.0, false, false, false};
}

IdentifiedInterval IdentifiedInterval::asymmetric(double lower,
                                                  bool lower_finite,
                                                  double upper,
                                                  bool upper_finite) {
  IdentifiedInterval out;
  out.lower_finite = lower_finite;
  out.upper_finite = upper_finite;
  out.finite = lower_finite && upper_finite;
  out.lower = lower_finite ? lower : 0.0;
  out.upper = upper_finite ? upper : 0.0;
  if (out.finite) {
    out.center = 0.5 * (lower + upper);
    out.dev = 0.5 * (upper - lower);
  }
  return out;
}

bool IdentifiedInterval::contains(double b) const {
  if (lower_finite && b < lower) return false;
  if (upper_finite && b > upper) return false;
  return true;
}

void require_no_knife_edge(const NormalizedModel& nm) {
  // normalized scale: Var(X) = 1, Var(W1) = I
  if (nm.sigma_w1x.norm() < kKnifeEdgeTol)
    throw KnifeEdgeViolated(
        "Cov(W1, X) is numerically zero; the bound formulas assume the "
        "calibration covariates predict treatment");
  const Eigen::VectorXd diff = nm.sigma_w1y - nm.sigma_xy * nm.sigma_w1x;
  const double scale =
      std::max(1.0, nm.sigma_w1y.norm() +
                        std::abs(nm.sigma_xy) * nm.sigma_w1x.norm());
  if (diff.norm() < kKnifeEdgeTol * scale)
    throw KnifeEdgeViolated(
        "Cov(W1, Y) equals Cov(W1, X) Cov(X, Y): short and medium "
        "regressions knife-edge coincide");
}

double dev_rx(const NormalizedModel& nm, double rx_bar) {
  if (rx_bar < 0.0) throw DomainError("rx_bar must be >= 0");
  if (rx_bar == 0.0) return 0.0;
  const double r2 = nm.r2_x_w1;
  const double denom = 1.0 - r2 - rx_bar * rx_bar;
  if (!(denom > 0.0)) return kInf;  // equality maps to the infinite branch
  return std::sqrt(nm.var_y_perp_xw1 / nm.k0 * rx_bar * rx_bar * r2 / denom);
}

IdentifiedInterval bounds_rx(const NormalizedModel& nm, double rx_bar) {
  require_no_knife_edge(nm);
  const double dev = dev_rx(nm, rx_bar);
  if (!std::isfinite(dev)) return IdentifiedInterval::whole_line(nm.beta_med);
  return IdentifiedInterval::symmetric(nm.beta_med, dev);
}

double zbar_x(double rx_bar, double c_low, double c_high,
              double norm_sigma_w1x) {
  if (!(c_low >= 0.0 && c_low <= c_high && c_high <= 1.0 && c_low < 1.0))
    throw DomainError("need 0 <= c_low <= c_high <= 1, c_low < 1");
  if (rx_bar < 0.0) throw DomainError("rx_bar must be >= 0");
  if (rx_bar * c_high >= 1.0) return kInf;
  const double m = std::max(std::min(c_high, rx_bar), c_low);
  return rx_bar * norm_sigma_w1x * std::sqrt(1.0 - m * m) /
         (1.0 - rx_bar * m);
}

double dev_rx_c(const NormalizedModel& nm, double rx_bar, double c_low,
                double c_high) {
  // the window [0,1] reduces algebraically to the rx-only bound; routing it
  // through the same arithmetic keeps the identity exact
  if (c_low == 0.0 && c_high == 1.0) return dev_rx(nm, rx_bar);
  const double zbar = zbar_x(rx_bar, c_low, c_high, nm.sigma_w1x.norm());
  if (!std::isfinite(zbar)) return kInf;
  const double z2 = zbar * zbar;
  if (!(z2 < nm.k0)) return kInf;
  return std::sqrt(nm.var_y_perp_xw1 / nm.k0 * z2 / (nm.k0 - z2));
}

IdentifiedInterval bounds_rx_c(const NormalizedModel& nm, double rx_bar,
                               double c_low, double c_high) {
  require_no_knife_edge(nm);
  const double dev = dev_rx_c(nm, rx_bar, c_low, c_high);
  if (!std::isfinite(dev)) return IdentifiedInterval::whole_line(nm.beta_med);
  return IdentifiedInterval::symmetric(nm.beta_med, dev);
}

double breakdown_point_rx(const NormalizedModel& nm) {
  require_no_knife_edge(nm);
  if (nm.beta_med == 0.0) return 0.0;
  const double r2yx = nm.r2_yx_dot_w1;
  const double r2xw = nm.r2_x_w1;
  return std::sqrt(r2yx / (r2xw / (1.0 - r2xw) + r2yx));
}

double breakdown_point_rx_c(const NormalizedModel& nm, double c_low,
                            double c_high) {
  require_no_knife_edge(nm);
  if (!(c_low >= 0.0 && c_low <= c_high && c_high <= 1.0 && c_low < 1.0))
    throw DomainError("need 0 <= c_low <= c_high <= 1, c_low < 1");
  if (nm.beta_med == 0.0) return 0.0;
  const double target = std::abs(nm.beta_med);
  const auto below = [&](double r) {
    const double d = dev_rx_c(nm, r, c_low, c_high);
    return std::isfinite(d) && d < target;
  };
  // dev is 0 at r = 0 and reaches the target before the infinite branch
  double lo = 0.0;
  double hi = 1.0;
  while (below(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) return hi;  // unreachable for PD inputs
  }
  for (int it = 0; it < kBisectMaxIter && hi - lo > kBisectTol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (below(mid))
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace ovbsens
