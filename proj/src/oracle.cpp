#include "ovbsens/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "ovbsens/frontier.hpp"
#include "ovbsens/rng.hpp"

namespace ovbsens {

namespace {

constexpr double kEqTol = 1e-9;       // equality conditions
constexpr double kStrictTol = 1e-12;  // margin on strict inequalities
constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd random_direction(Rng& rng, int d) {
  Eigen::VectorXd v(d);
  double n2 = 0.0;
  do {
    for (int i = 0; i < d; ++i) v(i) = rng.normal();
    n2 = v.squaredNorm();
  } while (n2 < 1e-30);
  return v / std::sqrt(n2);
}

}  // namespace

double z_x(const NormalizedModel& nm, const Eigen::VectorXd& r_x,
           const Eigen::VectorXd& c) {
  const double denom = 1.0 + r_x.dot(c);
  if (denom == 0.0) throw DomainError("z_x undefined: r_x'c = -1");
  const double c2 = c.squaredNorm();
  if (!(c2 < 1.0)) throw DomainError("z_x requires |c| < 1");
  return r_x.dot(nm.sigma_w1x) * std::sqrt(1.0 - c2) / denom;
}

Eigen::VectorXd minimal_r_y(const NormalizedModel& nm, double z,
                            const Eigen::VectorXd& c, double b) {
  const double kdiff = nm.k1 - b * nm.k0;
  const double c2 = c.squaredNorm();
  if (!(c2 < 1.0)) throw DomainError("minimal_r_y requires |c| < 1");
  const Eigen::VectorXd v =
      z * std::sqrt(1.0 - c2) * (nm.sigma_w1y - b * nm.sigma_w1x) - kdiff * c;
  const double vn2 = v.squaredNorm();
  if (vn2 == 0.0) throw DomainError("minimal_r_y direction degenerates");
  return (kdiff / vn2) * v;
}

bool membership(const NormalizedModel& nm, double b,
                const Eigen::VectorXd& r_x, const Eigen::VectorXd& r_y,
                const Eigen::VectorXd& c) {
  if (r_x.size() != nm.d1() || r_y.size() != nm.d1() || c.size() != nm.d1())
    return false;
  const double c2 = c.squaredNorm();
  if (!(c2 <= 1.0 - kStrictTol)) return false;

  const double rxc = 1.0 + r_x.dot(c);
  const double bscale = std::max(1.0, std::abs(b));

  if (std::abs(b - nm.beta_med) <= kEqTol * bscale) {
    // beta_med route: existence of p1 solving the treatment-equation system
    if (std::abs(rxc) < 1e-12) return false;
    const double z = r_x.dot(nm.sigma_w1x) * std::sqrt(1.0 - c2) / rxc;
    return z * z <= nm.k0 * (1.0 - kStrictTol);
  }

  if (std::abs(rxc) < 1e-12) return false;
  const double z = r_x.dot(nm.sigma_w1x) * std::sqrt(1.0 - c2) / rxc;
  if (z == 0.0) return false;
  if (!(z * z <= nm.k0 * (1.0 - kStrictTol))) return false;

  const double kdiff = nm.k1 - b * nm.k0;
  const Eigen::VectorXd vec =
      z * std::sqrt(1.0 - c2) * (nm.sigma_w1y - b * nm.sigma_w1x) - kdiff * c;
  const double rhs = r_y.dot(vec);
  const double scale =
      std::max({1.0, std::abs(kdiff), r_y.norm() * vec.norm()});
  if (std::abs(kdiff - rhs) > kEqTol * scale) return false;

  const double dsq = devsq(nm, z);
  const double gap = (b - nm.beta_med) * (b - nm.beta_med);
  return gap <= dsq * (1.0 - kStrictTol);
}

IdentifiedInterval brute_force_bounds(const NormalizedModel& nm,
                                      const SensitivityBudget& budget,
                                      std::int64_t n_samples,
                                      std::uint64_t seed) {
  budget.validate();
  require_no_knife_edge(nm);
  const int d = nm.d1();
  const double a_lo = budget.c_low;
  const double a_hi = std::min(budget.c_high, 1.0 - 1e-9);
  const bool ry_capped = std::isfinite(budget.ry_bar);

  // span basis for the c-annulus sampling (plus orthogonal toggles)
  const Eigen::VectorXd e1 = nm.sigma_w1x / nm.sigma_w1x.norm();
  Eigen::VectorXd wy = nm.sigma_w1y - nm.sigma_w1y.dot(e1) * e1;
  const bool have_e2 = wy.norm() > 1e-14;
  const Eigen::VectorXd e2 = have_e2 ? Eigen::VectorXd(wy / wy.norm())
                                     : Eigen::VectorXd::Zero(d);

  double lo = nm.beta_med;
  double hi = nm.beta_med;

  const auto admit = [&](double b, const Eigen::VectorXd& r_x, double z,
                         const Eigen::VectorXd& c) -> bool {
    Eigen::VectorXd r_y;
    try {
      r_y = minimal_r_y(nm, z, c, b);
    } catch (const DomainError&) {
      return false;
    }
    if (ry_capped && r_y.norm() > budget.ry_bar) return false;
    if (!membership(nm, b, r_x, r_y, c)) return false;
    lo = std::min(lo, b);
    hi = std::max(hi, b);
    return true;
  };

  for (std::int64_t i = 0; i < n_samples; ++i) {
    Rng rng(seed, std::uint64_t(i));

    // r_x: mostly on the budget sphere, with an aligned stratum because the
    // extreme points concentrate along Cov(W1,X)
    Eigen::VectorXd rdir;
    const double stratum = rng.uniform01();
    if (stratum < 0.2) {
      rdir = (rng.uniform01() < 0.5 ? 1.0 : -1.0) * e1;
    } else if (stratum < 0.6 && have_e2) {
      const double ang = rng.uniform(0.0, 2.0 * M_PI);
      rdir = std::cos(ang) * e1 + std::sin(ang) * e2;
    } else {
      rdir = random_direction(rng, d);
    }
    const double rmag = rng.uniform01() < 0.7
                            ? budget.rx_bar
                            : budget.rx_bar * rng.uniform01();
    const Eigen::VectorXd r_x = rmag * rdir;

    // c: norm in the annulus window, direction in the span with an
    // occasional orthogonal component to stress the dimension reduction
    const double a = rng.uniform(a_lo, a_hi);
    Eigen::VectorXd cdir;
    const double cpick = rng.uniform01();
    if (cpick < 0.25) {
      cdir = -rdir;  // anti-aligned with r_x, where |z_X| peaks
    } else if (cpick < 0.85 || !have_e2 || d <= 2) {
      const double ang = rng.uniform(0.0, 2.0 * M_PI);
      cdir = have_e2 ? Eigen::VectorXd(std::cos(ang) * e1 + std::sin(ang) * e2)
                     : Eigen::VectorXd((ang < M_PI ? 1.0 : -1.0) * e1);
    } else {
      cdir = random_direction(rng, d);
    }
    const Eigen::VectorXd c = a * cdir;
    if (c.squaredNorm() >= 1.0) continue;

    double z;
    try {
      z = z_x(nm, r_x, c);
    } catch (const DomainError&) {
      continue;
    }
    if (z == 0.0 || !(z * z < nm.k0)) continue;

    const double dmax = std::sqrt(devsq(nm, z));
    for (double side : {-1.0, 1.0}) {
      // walk b toward the open edge of the per-(r_x, c) interval; under a
      // finite r_Y budget back off until the witness norm fits
      double t = 1.0 - 1e-9;
      bool ok = admit(nm.beta_med + side * t * dmax, r_x, z, c);
      if (!ok && ry_capped) {
        double t_lo = 0.0, t_hi = t;
        for (int it = 0; it < 40; ++it) {
          const double mid = 0.5 * (t_lo + t_hi);
          if (admit(nm.beta_med + side * mid * dmax, r_x, z, c))
            t_lo = mid;
          else
            t_hi = mid;
        }
      }
    }
  }

  IdentifiedInterval out = IdentifiedInterval::asymmetric(lo, true, hi, true);
  out.center = nm.beta_med;
  return out;
}

double zbar_oracle(const NormalizedModel& nm, double rx_bar, double c_low,
                   double c_high, std::int64_t grid_density,
                   std::uint64_t seed) {
  if (rx_bar == 0.0) return 0.0;
  const int d = nm.d1();
  const double a_hi = std::min(c_high, 1.0 - 1e-9);
  double best = 0.0;

  const auto consider = [&](const Eigen::VectorXd& r_x,
                            const Eigen::VectorXd& c) {
    if (c.squaredNorm() >= 1.0) return;
    try {
      best = std::max(best, std::abs(z_x(nm, r_x, c)));
    } catch (const DomainError&) {
    }
  };

  // the aligned/anti-aligned profile, scanned over the c-norm window
  const Eigen::VectorXd e1 = nm.sigma_w1x / nm.sigma_w1x.norm();
  const std::int64_t n_line = std::max<std::int64_t>(grid_density, 64);
  for (std::int64_t i = 0; i <= n_line; ++i) {
    const double a = c_low + (a_hi - c_low) * double(i) / double(n_line);
    consider(rx_bar * e1, -a * e1);
    consider(rx_bar * e1, a * e1);
  }

  const std::int64_t n_random = grid_density * grid_density;
  for (std::int64_t i = 0; i < n_random; ++i) {
    Rng rng(seed, std::uint64_t(i));
    const Eigen::VectorXd rdir = random_direction(rng, d);
    const double rmag = rng.uniform01() < 0.5 ? rx_bar
                                              : rx_bar * rng.uniform01();
    const double a = rng.uniform(c_low, a_hi);
    const Eigen::VectorXd cdir = random_direction(rng, d);
    consider(rmag * rdir, a * cdir);
  }
  return best;
}

}  // namespace ovbsens
