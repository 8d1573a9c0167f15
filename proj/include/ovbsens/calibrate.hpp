#ifndef OVBSENS_CALIBRATE_HPP
#define OVBSENS_CALIBRATE_HPP

#include <map>
#include <optional>

#include "ovbsens/covkernel.hpp"

namespace ovbsens {

struct CalibrationReport {
  std::map<std::string, double> rho;   // label -> rho_k
  std::map<std::string, double> c;     // label -> c_k
  std::map<std::string, double> c_sq;  // label -> c_k^2
  std::optional<double> breakdown_reference;  // rx breakdown for display
  double c_suggest_low = 0.0;   // min_k c_k
  double c_suggest_high = 0.0;  // max_k c_k
};

// Relative importance of calibration covariate k in the treatment equation:
// sd(pi_med_k W1k) / sd(pi_med_{-k}' W1_{-k}), computed on the
// controls-partialled (not whitened) covariance.
double rho_k(const NormalizedModel& nm, const std::string& k);

// Grouped generalization; the singleton group reproduces rho_k.
double rho_group(const NormalizedModel& nm,
                 const std::vector<std::string>& group);

// c_k = sqrt(R^2 of W1k on the other calibration covariates given W0),
// computed from the unpartialled model.
double c_k(const CovarianceModel& model, const std::string& k);

CalibrationReport calibration_report(const CovarianceModel& model);

}  // namespace ovbsens

#endif  // OVBSENS_CALIBRATE_HPP
