#include "ovbsens/covkernel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ovbsens {

namespace {

constexpr double kSymmetryTol = 1e-10;     // relative
constexpr double kEigenFloor = 1e-12;      // smallest/largest eigenvalue
constexpr double kConditionCap = 1e12;     // for any solve
constexpr double kDegenerateVar = 1e-14;

void check_symmetric(const Eigen::MatrixXd& m) {
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1.0);
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol * scale) {
    std::ostringstream os;
    os << "covariance matrix not symmetric: max |A - A'| = " << asym;
    throw NotSymmetric(os.str());
  }
}

void check_positive_definite(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > kEigenFloor * std::max(hi, 0.0))) {
    std::ostringstream os;
    os << "covariance matrix not positive definite: eigenvalues in [" << lo
       << ", " << hi << "]";
    throw NotPositiveDefinite(os.str());
  }
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m,
                          const std::vector<Eigen::Index>& rows,
                          const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(Eigen::Index(i), Eigen::Index(j)) = m(rows[i], cols[j]);
  return out;
}

}  // namespace

std::string role_name(Role r) {
  switch (r) {
    case Role::outcome: return "outcome";
    case Role::treatment: return "treatment";
    case Role::calibration: return "calibration";
    case Role::control: return "control";
  }
  return "?";
}

Role role_from_name(const std::string& s) {
  if (s == "outcome") return Role::outcome;
  if (s == "treatment") return Role::treatment;
  if (s == "calibration") return Role::calibration;
  if (s == "control") return Role::control;
  throw RoleMismatch("unknown role: " + s);
}

CovarianceModel::CovarianceModel(Eigen::MatrixXd sigma,
                                 std::vector<std::string> labels,
                                 std::map<std::string, Role> roles)
    : sigma_(std::move(sigma)),
      labels_(std::move(labels)),
      roles_(std::move(roles)) {
  if (sigma_.rows() != sigma_.cols() ||
      sigma_.rows() != Eigen::Index(labels_.size())) {
    throw RoleMismatch("matrix dimension does not match label count");
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (!index_.emplace(labels_[i], Eigen::Index(i)).second)
      throw RoleMismatch("duplicate label: " + labels_[i]);
    if (roles_.find(labels_[i]) == roles_.end())
      throw RoleMismatch("label without role: " + labels_[i]);
  }
  check_symmetric(sigma_);
  sigma_ = ((sigma_ + sigma_.transpose()) / 2.0).eval();
  check_positive_definite(sigma_);
}

Eigen::Index CovarianceModel::index_of(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) throw RoleMismatch("unknown label: " + label);
  return it->second;
}

bool CovarianceModel::has_label(const std::string& label) const {
  return index_.count(label) > 0;
}

Role CovarianceModel::role_of(const std::string& label) const {
  auto it = roles_.find(label);
  if (it == roles_.end()) throw RoleMismatch("unknown label: " + label);
  return it->second;
}

std::vector<std::string> CovarianceModel::labels_with_role(Role r) const {
  std::vector<std::string> out;
  for (const auto& l : labels_)
    if (roles_.at(l) == r) out.push_back(l);
  return out;
}

void CovarianceModel::validate_roles() const {
  const auto ys = labels_with_role(Role::outcome);
  const auto xs = labels_with_role(Role::treatment);
  const auto w1 = labels_with_role(Role::calibration);
  if (ys.size() != 1)
    throw RoleMismatch("need exactly one outcome label, got " +
                       std::to_string(ys.size()));
  if (xs.size() != 1)
    throw RoleMismatch("need exactly one treatment label, got " +
                       std::to_string(xs.size()));
  if (w1.empty()) throw RoleMismatch("need at least one calibration label");
}

CovarianceModel partial_out(const CovarianceModel& model,
                            const std::vector<std::string>& conditioners) {
  if (conditioners.empty()) return model;

  std::vector<Eigen::Index> cidx;
  cidx.reserve(conditioners.size());
  for (const auto& c : conditioners) cidx.push_back(model.index_of(c));

  std::vector<Eigen::Index> kidx;
  std::vector<std::string> keep_labels;
  for (std::size_t i = 0; i < model.labels().size(); ++i) {
    if (std::find(conditioners.begin(), conditioners.end(),
                  model.labels()[i]) == conditioners.end()) {
      kidx.push_back(Eigen::Index(i));
      keep_labels.push_back(model.labels()[i]);
    }
  }
  if (keep_labels.empty())
    throw RoleMismatch("partial_out would remove every variable");

  const Eigen::MatrixXd scc = submatrix(model.sigma(), cidx, cidx);
  const Eigen::MatrixXd skc = submatrix(model.sigma(), kidx, cidx);
  const Eigen::MatrixXd skk = submatrix(model.sigma(), kidx, kidx);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(scc);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kConditionCap) {
    throw SingularConditionerBlock(
        "conditioner block is numerically singular (condition number > 1e12)");
  }
  const Eigen::MatrixXd solved =
      es.eigenvectors() *
      es.eigenvalues().cwiseInverse().asDiagonal() *
      es.eigenvectors().transpose() * skc.transpose();
  Eigen::MatrixXd schur = skk - skc * solved;
  schur = ((schur + schur.transpose()) / 2.0).eval();

  std::map<std::string, Role> roles;
  for (const auto& l : keep_labels) roles[l] = model.role_of(l);
  return CovarianceModel(std::move(schur), std::move(keep_labels),
                         std::move(roles));
}

NormalizedModel normalize(const CovarianceModel& model) {
  model.validate_roles();
  if (!model.labels_with_role(Role::control).empty())
    throw RoleMismatch("normalize() expects controls already partialled out");

  const std::string y = model.labels_with_role(Role::outcome)[0];
  const std::string x = model.labels_with_role(Role::treatment)[0];
  const std::vector<std::string> w1 = model.labels_with_role(Role::calibration);
  const Eigen::Index iy = model.index_of(y);
  const Eigen::Index ix = model.index_of(x);
  const Eigen::Index d1 = Eigen::Index(w1.size());

  std::vector<Eigen::Index> iw(w1.size());
  for (std::size_t k = 0; k < w1.size(); ++k) iw[k] = model.index_of(w1[k]);

  // symmetric inverse square root of Var(W1); whitening is basis-symmetric
  Eigen::MatrixXd vw1(d1, d1);
  for (Eigen::Index a = 0; a < d1; ++a)
    for (Eigen::Index b = 0; b < d1; ++b)
      vw1(a, b) = model.sigma()(iw[std::size_t(a)], iw[std::size_t(b)]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(vw1);
  if (!(es.eigenvalues().minCoeff() > 0.0))
    throw NotPositiveDefinite("Var(W1) not positive definite");
  const Eigen::MatrixXd inv_sqrt =
      es.eigenvectors() *
      es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
      es.eigenvectors().transpose();

  const double sx = std::sqrt(model.sigma()(ix, ix));

  // transform T acting on (Y, X, W1): Y unchanged, X /= sd(X), W1 whitened
  const Eigen::Index n = 2 + d1;
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
  t(0, 0) = 1.0;
  t(1, 1) = 1.0 / sx;
  t.block(2, 2, d1, d1) = inv_sqrt;

  Eigen::MatrixXd orig(n, n);
  std::vector<Eigen::Index> order;
  order.push_back(iy);
  order.push_back(ix);
  for (auto i : iw) order.push_back(i);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b)
      orig(a, b) = model.sigma()(order[std::size_t(a)], order[std::size_t(b)]);

  Eigen::MatrixXd norm_sigma = t * orig * t.transpose();
  norm_sigma = ((norm_sigma + norm_sigma.transpose()) / 2.0).eval();

  std::vector<std::string> labels;
  labels.push_back(y);
  labels.push_back(x);
  for (const auto& l : w1) labels.push_back(l);
  std::map<std::string, Role> roles;
  roles[y] = Role::outcome;
  roles[x] = Role::treatment;
  for (const auto& l : w1) roles[l] = Role::calibration;

  NormalizedModel nm{
      CovarianceModel(norm_sigma, labels, roles),
      CovarianceModel(orig, labels, roles),
      w1,
      norm_sigma.block(2, 1, d1, 1),
      norm_sigma.block(2, 0, d1, 1),
      norm_sigma(0, 1),
      norm_sigma(0, 0),
      0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, sx};

  nm.r2_x_w1 = nm.sigma_w1x.squaredNorm();
  nm.k0 = 1.0 - nm.r2_x_w1;
  nm.k1 = nm.sigma_xy - nm.sigma_w1y.dot(nm.sigma_w1x);
  nm.k2 = nm.var_y - nm.sigma_w1y.squaredNorm();
  if (!(nm.k0 > 0.0) || !(nm.k2 > 0.0))
    throw NotPositiveDefinite("residual variances must be positive");
  nm.beta_med = nm.k1 / nm.k0;
  nm.var_y_perp_xw1 = nm.k2 - nm.k1 * nm.k1 / nm.k0;
  if (!(nm.var_y_perp_xw1 > 0.0))
    throw NotPositiveDefinite("Var(Y^{perp X,W1}) must be positive");
  nm.r2_yx_dot_w1 = nm.k1 * nm.k1 / (nm.k0 * nm.k2);
  return nm;
}

NormalizedModel prepare(const CovarianceModel& model) {
  const auto controls = model.labels_with_role(Role::control);
  return normalize(partial_out(model, controls));
}

NormalizedModel NormalizedModel::mirrored() const {
  auto flip = [](const CovarianceModel& m) {
    Eigen::MatrixXd s = m.sigma();
    const auto ys = m.labels_with_role(Role::outcome);
    const Eigen::Index iy = m.index_of(ys[0]);
    s.row(iy) *= -1.0;
    s.col(iy) *= -1.0;
    return CovarianceModel(s, m.labels(), m.roles());
  };
  NormalizedModel out = *this;
  out.base = flip(base);
  out.partialled = flip(partialled);
  out.sigma_w1y = -sigma_w1y;
  out.sigma_xy = -sigma_xy;
  out.k1 = -k1;
  out.beta_med = -beta_med;
  return out;
}

double partial_r2(const CovarianceModel& model, const std::string& target,
                  const std::vector<std::string>& regressors,
                  const std::vector<std::string>& conditioners) {
  for (const auto& r : regressors) {
    if (r == target ||
        std::find(conditioners.begin(), conditioners.end(), r) !=
            conditioners.end())
      throw RoleMismatch("partial_r2 label sets must be disjoint");
  }
  if (std::find(conditioners.begin(), conditioners.end(), target) !=
      conditioners.end())
    throw RoleMismatch("partial_r2 label sets must be disjoint");

  const CovarianceModel reduced = partial_out(model, conditioners);
  const Eigen::Index it = reduced.index_of(target);
  const double var_t = reduced.sigma()(it, it);
  if (var_t <= kDegenerateVar)
    throw DegenerateTargetVariance("Var(target | conditioners) <= 1e-14");
  if (regressors.empty()) return 0.0;

  std::vector<Eigen::Index> ir;
  ir.reserve(regressors.size());
  for (const auto& r : regressors) ir.push_back(reduced.index_of(r));
  Eigen::MatrixXd vrr(ir.size(), ir.size());
  Eigen::VectorXd vrt(ir.size());
  for (std::size_t a = 0; a < ir.size(); ++a) {
    vrt(Eigen::Index(a)) = reduced.sigma()(ir[a], it);
    for (std::size_t b = 0; b < ir.size(); ++b)
      vrr(Eigen::Index(a), Eigen::Index(b)) = reduced.sigma()(ir[a], ir[b]);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(vrr);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kConditionCap)
    throw SingularConditionerBlock("regressor block numerically singular");
  const Eigen::VectorXd coef = es.eigenvectors() *
                               es.eigenvalues().cwiseInverse().asDiagonal() *
                               es.eigenvectors().transpose() * vrt;
  double r2 = vrt.dot(coef) / var_t;
  if (r2 < 0.0) r2 = 0.0;
  if (r2 > 1.0) r2 = 1.0;
  return r2;
}

}  // namespace ovbsens
