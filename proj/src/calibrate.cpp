#include "ovbsens/calibrate.hpp"

#include <algorithm>
#include <cmath>

#include "ovbsens/identify.hpp"

namespace ovbsens {

namespace {
constexpr double kDegenerate = 1e-14;

// pi_med on the controls-partialled covariance (original W1 scale)
Eigen::VectorXd treatment_coefficients(const CovarianceModel& m,
                                       std::vector<Eigen::Index>& iw) {
  const std::string x = m.labels_with_role(Role::treatment)[0];
  const Eigen::Index ix = m.index_of(x);
  const auto w1 = m.labels_with_role(Role::calibration);
  iw.clear();
  for (const auto& l : w1) iw.push_back(m.index_of(l));
  Eigen::MatrixXd vw(iw.size(), iw.size());
  Eigen::VectorXd cwx(iw.size());
  for (std::size_t a = 0; a < iw.size(); ++a) {
    cwx(Eigen::Index(a)) = m.sigma()(iw[a], ix);
    for (std::size_t b = 0; b < iw.size(); ++b)
      vw(Eigen::Index(a), Eigen::Index(b)) = m.sigma()(iw[a], iw[b]);
  }
  return vw.llt().solve(cwx);
}

}  // namespace

double rho_group(const NormalizedModel& nm,
                 const std::vector<std::string>& group) {
  const CovarianceModel& m = nm.partialled;
  const auto w1 = m.labels_with_role(Role::calibration);
  if (w1.size() < 2)
    throw DegenerateIndex("rho_k needs at least two calibration covariates");
  for (const auto& g : group)
    if (std::find(w1.begin(), w1.end(), g) == w1.end())
      throw RoleMismatch("not a calibration covariate: " + g);

  std::vector<Eigen::Index> iw;
  const Eigen::VectorXd pi_med = treatment_coefficients(m, iw);

  std::vector<std::size_t> in, out;
  for (std::size_t a = 0; a < w1.size(); ++a) {
    if (std::find(group.begin(), group.end(), w1[a]) != group.end())
      in.push_back(a);
    else
      out.push_back(a);
  }
  if (out.empty())
    throw DegenerateIndex("rho group must leave at least one covariate out");

  auto index_var = [&](const std::vector<std::size_t>& sel) {
    double s = 0.0;
    for (std::size_t a : sel)
      for (std::size_t b : sel)
        s += pi_med(Eigen::Index(a)) * m.sigma()(iw[a], iw[b]) *
             pi_med(Eigen::Index(b));
    return s;
  };
  const double num = index_var(in);
  const double den = index_var(out);
  if (den < kDegenerate)
    throw DegenerateIndex("the leave-out index variance is degenerate");
  return std::sqrt(std::max(num, 0.0) / den);
}

double rho_k(const NormalizedModel& nm, const std::string& k) {
  return rho_group(nm, {k});
}

double c_k(const CovarianceModel& model, const std::string& k) {
  const auto w1 = model.labels_with_role(Role::calibration);
  if (w1.size() < 2)
    throw DegenerateIndex("c_k needs at least two calibration covariates");
  if (std::find(w1.begin(), w1.end(), k) == w1.end())
    throw RoleMismatch("not a calibration covariate: " + k);
  std::vector<std::string> others;
  for (const auto& l : w1)
    if (l != k) others.push_back(l);
  const auto w0 = model.labels_with_role(Role::control);
  return std::sqrt(partial_r2(model, k, others, w0));
}

CalibrationReport calibration_report(const CovarianceModel& model) {
  model.validate_roles();
  CalibrationReport rep;
  const NormalizedModel nm = prepare(model);
  const auto w1 = model.labels_with_role(Role::calibration);
  if (w1.size() >= 2) {
    for (const auto& l : w1) {
      rep.rho[l] = rho_k(nm, l);
      const double ck = c_k(model, l);
      rep.c[l] = ck;
      rep.c_sq[l] = ck * ck;
    }
    double lo = 1.0, hi = 0.0;
    for (const auto& [l, v] : rep.c) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    rep.c_suggest_low = lo;
    rep.c_suggest_high = hi;
  }
  try {
    rep.breakdown_reference = breakdown_point_rx(nm);
  } catch (const KnifeEdgeViolated&) {
    rep.breakdown_reference.reset();
  }
  return rep;
}

}  // namespace ovbsens
