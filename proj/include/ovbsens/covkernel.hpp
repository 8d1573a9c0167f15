#ifndef OVBSENS_COVKERNEL_HPP
#define OVBSENS_COVKERNEL_HPP

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "ovbsens/errors.hpp"

namespace ovbsens {

enum class Role { outcome, treatment, calibration, control };

std::string role_name(Role r);
Role role_from_name(const std::string& s);

// Labeled symmetric positive-definite covariance matrix with role
// assignments. Single source of truth for every estimand downstream.
//
// Invariants checked at construction: symmetry within 1e-10 relative, smallest
// eigenvalue > 1e-12 * largest (no automatic jitter; a silent repair would
// corrupt identification quantities), every label has a role.
class CovarianceModel {
 public:
  CovarianceModel(Eigen::MatrixXd sigma, std::vector<std::string> labels,
                  std::map<std::string, Role> roles);

  const Eigen::MatrixXd& sigma() const { return sigma_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::map<std::string, Role>& roles() const { return roles_; }

  Eigen::Index index_of(const std::string& label) const;
  bool has_label(const std::string& label) const;
  Role role_of(const std::string& label) const;
  std::vector<std::string> labels_with_role(Role r) const;

  // Throws RoleMismatch unless there is exactly one outcome, exactly one
  // treatment, and at least one calibration label. Called by analysis entry
  // points, not by intermediate Schur-complement results.
  void validate_roles() const;

 private:
  Eigen::MatrixXd sigma_;
  std::vector<std::string> labels_;
  std::map<std::string, Role> roles_;
  std::map<std::string, Eigen::Index> index_;
};

// Model after partialling out controls and whitening, together with every
// scalar the identification theorems consume. All scalars are computed once
// here; downstream modules never re-derive them.
struct NormalizedModel {
  CovarianceModel base;        // whitened: Var(X)=1, Var(W1)=I
  CovarianceModel partialled;  // controls partialled out, original W1 scale
  std::vector<std::string> w1_labels;
  Eigen::VectorXd sigma_w1x;  // Cov(W1, X) after normalization
  Eigen::VectorXd sigma_w1y;  // Cov(W1, Y) after normalization
  double sigma_xy = 0.0;      // Cov(Y, X) after normalization
  double var_y = 0.0;         // Var(Y) (Y is left unscaled)
  double k0 = 0.0;            // Var(X^{perp W1}) = 1 - |sigma_w1x|^2
  double k1 = 0.0;            // Cov(Y^{perp W1}, X^{perp W1})
  double k2 = 0.0;            // Var(Y^{perp W1})
  double beta_med = 0.0;      // k1 / k0
  double var_y_perp_xw1 = 0.0;
  double r2_x_w1 = 0.0;
  double r2_yx_dot_w1 = 0.0;
  double x_scale = 1.0;  // sd(X) before normalization; divides bounds back
                         // into the input scale of X

  int d1() const { return int(sigma_w1x.size()); }

  // Same model with Y replaced by -Y. Used by the mirrored bound problems.
  NormalizedModel mirrored() const;
};

// Covariance of the residuals A^{perp C} for every non-conditioner variable:
// the Schur complement of the conditioner block. Empty conditioner set
// returns the model unchanged.
CovarianceModel partial_out(const CovarianceModel& model,
                            const std::vector<std::string>& conditioners);

// X scaled to unit variance, W1 whitened by the symmetric inverse square root
// of Var(W1), Y left unscaled. Requires controls already partialled out.
NormalizedModel normalize(const CovarianceModel& model);

// partial_out of all control-role labels followed by normalize.
NormalizedModel prepare(const CovarianceModel& model);

// R-squared of target^{perp conditioners} on regressors^{perp conditioners},
// from covariances only.
double partial_r2(const CovarianceModel& model, const std::string& target,
                  const std::vector<std::string>& regressors,
                  const std::vector<std::string>& conditioners);

}  // namespace ovbsens

#endif  // OVBSENS_COVKERNEL_HPP
